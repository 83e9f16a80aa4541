#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace augmentor {

inline constexpr unsigned kDefaultHashBits = 18;

// Sparse bag of hashed unigrams and bigrams, sorted by index.
struct FeatureVector {
  unsigned bits = kDefaultHashBits;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;  // (index, count >= 1)

  bool empty() const { return entries.empty(); }
  bool operator==(const FeatureVector&) const = default;
};

// Lowercased word tokens. A word is a maximal run of letters/digits (ASCII
// and non-punctuation code points outside ASCII); an apostrophe between two
// word characters stays inside the word. Case folding covers ASCII, Latin-1,
// Greek and Cyrillic.
std::vector<std::string> tokenize(std::string_view text);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

// Feature index: FNV-1a of the key, upper half folded into the lower, masked
// to `bits`. Unigram keys are "u\x1f<tok>", bigram keys "b\x1f<a>\x1f<b>".
std::uint32_t feature_index(std::string_view key, unsigned bits);

FeatureVector featurize(std::string_view text, unsigned bits = kDefaultHashBits);

}  // namespace augmentor
