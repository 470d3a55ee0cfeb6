#include "authkit/crypto.hpp"

#include <cstring>

#include <openssl/core_names.h>
#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/kdf.h>
#include <openssl/rand.h>

#include "authkit/errors.hpp"

namespace authkit {

Digest sha256(ByteView data)
{
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != kHashSize) {
    throw EnvironmentError("SHA-256 failed");
  }
  return out;
}

Digest hmac_sha256(ByteView key, ByteView data)
{
  Digest out{};
  std::size_t len = 0;
  // EVP_Q_mac rejects a null key pointer even for zero length.
  static const std::uint8_t empty_key = 0;
  const std::uint8_t* key_ptr = key.empty() ? &empty_key : key.data();
  if (EVP_Q_mac(nullptr, "HMAC", nullptr, "SHA256", nullptr, key_ptr, key.size(), data.data(), data.size(),
                out.data(), out.size(), &len) == nullptr ||
      len != kHashSize) {
    throw EnvironmentError("HMAC-SHA256 failed");
  }
  return out;
}

SecureBytes hkdf_sha256(ByteView ikm, std::string_view info, std::size_t out_len)
{
  return hkdf_sha256(ikm, as_bytes(info), out_len);
}

SecureBytes hkdf_sha256(ByteView ikm, ByteView info, std::size_t out_len)
{
  EVP_KDF* kdf = EVP_KDF_fetch(nullptr, "HKDF", nullptr);
  if (kdf == nullptr) throw EnvironmentError("HKDF unavailable");
  EVP_KDF_CTX* ctx = EVP_KDF_CTX_new(kdf);
  EVP_KDF_free(kdf);
  if (ctx == nullptr) throw EnvironmentError("HKDF context allocation failed");

  char digest[] = "SHA256";
  OSSL_PARAM params[4];
  params[0] = OSSL_PARAM_construct_utf8_string(OSSL_KDF_PARAM_DIGEST, digest, 0);
  params[1] = OSSL_PARAM_construct_octet_string(OSSL_KDF_PARAM_KEY, const_cast<std::uint8_t*>(ikm.data()),
                                                ikm.size());
  params[2] = OSSL_PARAM_construct_octet_string(OSSL_KDF_PARAM_INFO, const_cast<std::uint8_t*>(info.data()),
                                                info.size());
  params[3] = OSSL_PARAM_construct_end();

  SecureBytes out(out_len);
  int ok = EVP_KDF_derive(ctx, out.data(), out.size(), params);
  EVP_KDF_CTX_free(ctx);
  if (ok != 1) throw EnvironmentError("HKDF derivation failed");
  return out;
}

bool ct_equal(ByteView a, ByteView b)
{
  if (a.size() != b.size()) return false;
  return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

Bytes RandomSource::bytes(std::size_t n)
{
  Bytes out(n);
  fill(out);
  return out;
}

void SystemRandom::fill(std::span<std::uint8_t> out)
{
  if (out.empty()) return;
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
    throw EnvironmentError("system random generator failed");
  }
}

DeterministicRandom::DeterministicRandom(std::uint64_t seed)
{
  ByteWriter w;
  w.raw("authkit-drbg");
  w.u64(seed);
  seed_ = sha256(w.bytes());
}

DeterministicRandom::DeterministicRandom(ByteView seed)
{
  ByteWriter w;
  w.raw("authkit-drbg");
  w.framed(seed);
  seed_ = sha256(w.bytes());
}

void DeterministicRandom::fill(std::span<std::uint8_t> out)
{
  std::size_t pos = 0;
  while (pos < out.size()) {
    if (used_ == kHashSize) {
      ByteWriter w;
      w.raw(seed_);
      w.u64(counter_++);
      block_ = sha256(w.bytes());
      used_ = 0;
    }
    std::size_t n = std::min(out.size() - pos, kHashSize - used_);
    std::memcpy(out.data() + pos, block_.data() + used_, n);
    used_ += n;
    pos += n;
  }
}

DeterministicRandom DeterministicRandom::fork(std::string_view label)
{
  ByteWriter w;
  w.raw(bytes(kHashSize));
  w.framed(label);
  return DeterministicRandom(ByteView(w.bytes()));
}

}  // namespace authkit
