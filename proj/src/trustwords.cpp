#include "authkit/trustwords.hpp"

#include <cstdio>
#include <fstream>
#include <unordered_set>

#include "authkit/crypto.hpp"
#include "authkit/errors.hpp"

namespace authkit {

Fingerprint Fingerprint::from_bytes(ByteView b)
{
  if (b.size() != kSize) throw ValidationError("fingerprint must be 20 bytes, got " + std::to_string(b.size()));
  Fingerprint f;
  std::copy(b.begin(), b.end(), f.bits.begin());
  return f;
}

Fingerprint Fingerprint::from_hex(std::string_view hex)
{
  std::string compact;
  for (char c : hex) {
    if (c == ' ' || c == ':') continue;
    compact.push_back(c);
  }
  if (compact.size() != 2 * kSize) {
    throw ValidationError("fingerprint must be 40 hex digits, got " + std::to_string(compact.size()));
  }
  return from_bytes(authkit::from_hex(compact));
}

Fingerprint fingerprint_of(ByteView public_key)
{
  Digest d = sha256(public_key);
  return Fingerprint::from_bytes(ByteView(d).first(Fingerprint::kSize));
}

Dictionary::Dictionary(std::vector<std::string> words, std::string language_tag)
    : words_(std::move(words)), language_tag_(std::move(language_tag))
{
  if (words_.size() != kSize) {
    throw ValidationError("dictionary must have 65536 words, got " + std::to_string(words_.size()));
  }
  std::unordered_set<std::string_view> seen;
  seen.reserve(kSize);
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i].empty()) throw ValidationError("dictionary word " + std::to_string(i) + " is empty");
    if (!seen.insert(words_[i]).second) {
      throw ValidationError("dictionary word " + std::to_string(i) + " is a duplicate: " + words_[i]);
    }
  }
}

Dictionary Dictionary::load(const std::filesystem::path& path, std::string language_tag)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open dictionary " + path.string());
  std::vector<std::string> words;
  words.reserve(kSize);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    words.push_back(std::move(line));
  }
  return Dictionary(std::move(words), std::move(language_tag));
}

Dictionary Dictionary::hex_test()
{
  std::vector<std::string> words(kSize);
  char buf[8];
  for (std::size_t i = 0; i < kSize; ++i) {
    std::snprintf(buf, sizeof buf, "%04zx", i);
    words[i] = buf;
  }
  return Dictionary(std::move(words), "hex");
}

Fingerprint xor_fingerprints(const Fingerprint& a, const Fingerprint& b)
{
  Fingerprint out;
  for (std::size_t i = 0; i < Fingerprint::kSize; ++i) out.bits[i] = a.bits[i] ^ b.bits[i];
  return out;
}

TrustwordList trustwords(const Fingerprint& a, const Fingerprint& b, const Dictionary& dict, int count)
{
  if (count != 5 && count != 10) throw ValidationError("trustword count must be 5 or 10");
  Fingerprint x = xor_fingerprints(a, b);
  TrustwordList out;
  for (int i = 0; i < count; ++i) {
    auto index = static_cast<std::uint16_t>(x.bits[2 * i] << 8 | x.bits[2 * i + 1]);
    out.indices.push_back(index);
    out.words.push_back(dict[index]);
  }
  return out;
}

}  // namespace authkit
