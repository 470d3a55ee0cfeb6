#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "authkit/bytes.hpp"

namespace authkit {

/// 160-bit public-key digest, the length of a PGP v4 fingerprint.
struct Fingerprint {
  static constexpr std::size_t kSize = 20;
  std::array<std::uint8_t, kSize> bits{};

  /// Throws ValidationError unless `b` is exactly 20 bytes.
  static Fingerprint from_bytes(ByteView b);
  /// Accepts 40 hex digits, optionally separated by spaces or colons.
  static Fingerprint from_hex(std::string_view hex);

  std::string hex() const { return to_hex(bits); }
  ByteView view() const { return bits; }

  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

/// First 160 bits of SHA-256 over the public-key bytes.
Fingerprint fingerprint_of(ByteView public_key);

}  // namespace authkit
