#include <doctest.h>

#include "augmentor/features.hpp"
#include "test_support.hpp"

using namespace augmentor;
using test_support::error_kind;
using V = std::vector<std::string>;

TEST_CASE("FNV-1a reference vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("feature_index folds and masks") {
  // Values from an independent Python implementation.
  CHECK(feature_index("a", 18) == 143552);
  CHECK(feature_index("u\x1fhello", 18) == 126704);
  CHECK(feature_index("b\x1fhello\x1fworld", 18) == 111327);
  CHECK(feature_index("u\x1fworld", 18) == 57216);
  for (unsigned bits = 1; bits <= 30; ++bits) CHECK(feature_index("anything", bits) < (1u << bits));
}

TEST_CASE("tokenize") {
  CHECK(tokenize("Hello, World!") == V{"hello", "world"});
  CHECK(tokenize("don't stop") == V{"don't", "stop"});
  CHECK(tokenize("'quoted' words'") == V{"quoted", "words"});
  CHECK(tokenize("it\xE2\x80\x99s") == V{"it's"});
  CHECK(tokenize("3.14 is pi") == V{"3", "14", "is", "pi"});
  CHECK(tokenize("") == V{});
  CHECK(tokenize("  ...  ") == V{});
  CHECK(tokenize("\xC3\x89T\xC3\x89 caf\xC3\xA9") == V{"\xC3\xA9t\xC3\xA9", "caf\xC3\xA9"});
  CHECK(tokenize("\xCE\xA3\xCE\x9F\xCE\xA6\xCE\x99\xCE\x91") ==
        V{"\xCF\x83\xCE\xBF\xCF\x86\xCE\xB9\xCE\xB1"});                  // Greek
  CHECK(tokenize("\xD0\x9F\xD1\x80\xD0\xB8\xD0\xB2\xD0\xB5\xD1\x82") ==
        V{"\xD0\xBF\xD1\x80\xD0\xB8\xD0\xB2\xD0\xB5\xD1\x82"});          // Cyrillic
  CHECK(tokenize("hi\xF0\x9F\x98\x80there") == V{"hi", "there"});       // emoji separates
  CHECK(tokenize("bad\xFFutf8") == V{"bad", "utf8"});
}

TEST_CASE("featurize counts unigrams and bigrams") {
  auto fv = featurize("hello world");
  CHECK(fv.bits == 18);
  CHECK(fv.entries == std::vector<std::pair<std::uint32_t, std::uint32_t>>{
                          {57216, 1}, {111327, 1}, {126704, 1}});

  auto twice = featurize("hello hello");
  std::uint32_t total = 0;
  for (auto [i, c] : twice.entries) total += c;
  CHECK(total == 3);  // two unigrams, one bigram

  CHECK(featurize("").empty());
  CHECK(featurize("HELLO, world") == fv);
  CHECK(error_kind([] { featurize("x", 0); }) == "InvalidConfig");
  CHECK(error_kind([] { featurize("x", 31); }) == "InvalidConfig");
}

TEST_CASE("featurize entries are sorted and unique") {
  auto fv = featurize("the quick brown fox jumps over the lazy dog the end", 6);
  for (std::size_t i = 1; i < fv.entries.size(); ++i) {
    CHECK(fv.entries[i - 1].first < fv.entries[i].first);
  }
  std::uint32_t total = 0;
  for (auto [i, c] : fv.entries) {
    CHECK(c >= 1);
    CHECK(i < 64);
    total += c;
  }
  CHECK(total == 11 + 10);
}
