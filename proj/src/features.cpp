#include "augmentor/features.hpp"

#include <algorithm>
#include <map>

#include "augmentor/error.hpp"

namespace augmentor {

namespace {

constexpr char32_t kInvalid = 0xFFFD;

// Decodes one UTF-8 sequence at s[i], advancing i. Malformed input yields
// U+FFFD and consumes one byte.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
  auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = (b0 & 0xE0) == 0xC0 ? 2 : (b0 & 0xF0) == 0xE0 ? 3 : (b0 & 0xF8) == 0xF0 ? 4 : 0;
  if (len == 0 || i + len > s.size()) {
    ++i;
    return kInvalid;
  }
  char32_t cp = b0 & (0x7F >> len);
  for (int k = 1; k < len; ++k) {
    auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return kInvalid;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += len;
  return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_word_char(char32_t c) {
  if (c < 0x80) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
  }
  if (c == kInvalid) return false;
  if (c <= 0xBF) return c == 0xAA || c == 0xB5 || c == 0xBA;
  if (c == 0xD7 || c == 0xF7) return false;
  if (c >= 0x2000 && c <= 0x2BFF) return false;  // punctuation, symbols, arrows, math
  if (c >= 0x3000 && c <= 0x303F) return false;  // CJK punctuation
  if (c >= 0xE000 && c <= 0xF8FF) return false;  // private use
  if (c >= 0xFE30 && c <= 0xFE4F) return false;
  if (c >= 0xFF00 && c <= 0xFF0F) return false;
  if (c >= 0xFF1A && c <= 0xFF20) return false;
  if (c >= 0x1F000 && c <= 0x1FAFF) return false;  // emoji and pictographs
  return true;
}

bool is_apostrophe(char32_t c) { return c == '\'' || c == 0x2019; }

char32_t fold_case(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 0x20;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 0x20;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 0x20;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  return c;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<char32_t> cps;
  for (std::size_t i = 0; i < text.size();) cps.push_back(decode_utf8(text, i));

  std::vector<std::string> tokens;
  std::string current;
  for (std::size_t k = 0; k < cps.size(); ++k) {
    char32_t c = cps[k];
    if (is_word_char(c)) {
      encode_utf8(fold_case(c), current);
    } else if (is_apostrophe(c) && !current.empty() && k + 1 < cps.size() &&
               is_word_char(cps[k + 1])) {
      current.push_back('\'');
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint32_t feature_index(std::string_view key, unsigned bits) {
  std::uint64_t h = fnv1a64(key);
  h ^= h >> 32;
  return static_cast<std::uint32_t>(h & ((std::uint64_t{1} << bits) - 1));
}

FeatureVector featurize(std::string_view text, unsigned bits) {
  if (bits < 1 || bits > 30) throw PreconditionError("InvalidConfig", "hash bits must be in [1, 30]");
  FeatureVector fv;
  fv.bits = bits;
  auto tokens = tokenize(text);
  std::map<std::uint32_t, std::uint32_t> counts;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    ++counts[feature_index("u\x1f" + tokens[i], bits)];
    if (i + 1 < tokens.size()) {
      ++counts[feature_index("b\x1f" + tokens[i] + "\x1f" + tokens[i + 1], bits)];
    }
  }
  fv.entries.assign(counts.begin(), counts.end());
  return fv;
}

}  // namespace augmentor
