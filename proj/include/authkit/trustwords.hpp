#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "authkit/fingerprint.hpp"

namespace authkit {

/// 2^16 distinct words, index = position.
class Dictionary {
public:
  static constexpr std::size_t kSize = 1u << 16;

  /// Throws ValidationError unless `words` holds exactly 65536 distinct,
  /// non-empty entries.
  Dictionary(std::vector<std::string> words, std::string language_tag);

  /// UTF-8, one word per line, line number = index. CRLF tolerated.
  static Dictionary load(const std::filesystem::path& path, std::string language_tag = "und");

  /// "0000".."ffff", for tests and as a fallback when no word list is given.
  static Dictionary hex_test();

  const std::string& operator[](std::uint16_t i) const { return words_[i]; }
  const std::string& language_tag() const { return language_tag_; }

private:
  std::vector<std::string> words_;
  std::string language_tag_;
};

struct TrustwordList {
  std::vector<std::string> words;
  std::vector<std::uint16_t> indices;
};

Fingerprint xor_fingerprints(const Fingerprint& a, const Fingerprint& b);

/// Ten big-endian 16-bit blocks of a XOR b, each looked up in `dict`;
/// `count` 5 keeps the first five (the first 80 bits). Throws
/// ValidationError for any other count.
TrustwordList trustwords(const Fingerprint& a, const Fingerprint& b, const Dictionary& dict, int count = 10);

}  // namespace authkit
