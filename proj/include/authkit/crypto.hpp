#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

#include "authkit/bytes.hpp"

namespace authkit {

inline constexpr std::size_t kHashSize = 32;
using Digest = std::array<std::uint8_t, kHashSize>;

Digest sha256(ByteView data);

Digest hmac_sha256(ByteView key, ByteView data);

/// Extract-then-expand key derivation over SHA-256 with an empty salt.
SecureBytes hkdf_sha256(ByteView ikm, std::string_view info, std::size_t out_len);
SecureBytes hkdf_sha256(ByteView ikm, ByteView info, std::size_t out_len);

/// Length-checked constant-time comparison.
bool ct_equal(ByteView a, ByteView b);

class RandomSource {
public:
  virtual ~RandomSource() = default;
  /// Fills `out` with uniform bytes. Throws EnvironmentError on failure.
  virtual void fill(std::span<std::uint8_t> out) = 0;

  Bytes bytes(std::size_t n);
};

/// Operating-system CSPRNG via OpenSSL.
class SystemRandom final : public RandomSource {
public:
  void fill(std::span<std::uint8_t> out) override;
};

/// Reproducible stream: SHA-256 in counter mode over a seed. Test and
/// simulation use only.
class DeterministicRandom final : public RandomSource {
public:
  explicit DeterministicRandom(std::uint64_t seed);
  explicit DeterministicRandom(ByteView seed);

  void fill(std::span<std::uint8_t> out) override;

  /// Independent child stream, e.g. one per simulated party.
  DeterministicRandom fork(std::string_view label);

private:
  Digest seed_{};
  std::uint64_t counter_ = 0;
  Digest block_{};
  std::size_t used_ = kHashSize;
};

}  // namespace authkit
