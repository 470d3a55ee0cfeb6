#include "authkit/bytes.hpp"

#include <atomic>

#include <openssl/crypto.h>

#include "authkit/errors.hpp"

namespace authkit {

namespace {
std::atomic<std::uint64_t> g_wipes{0};

int hex_value(char c)
{
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

std::string to_hex(ByteView data)
{
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

Bytes from_hex(std::string_view hex)
{
  if (hex.size() % 2 != 0) throw ValidationError("hex string has odd length");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = hex_value(hex[2 * i]);
    int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw ValidationError("invalid hex digit at offset " + std::to_string(2 * i));
    out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return out;
}

SecureBytes& SecureBytes::operator=(const SecureBytes& other)
{
  if (this != &other) {
    wipe();
    data_ = other.data_;
  }
  return *this;
}

SecureBytes& SecureBytes::operator=(SecureBytes&& other) noexcept
{
  if (this != &other) {
    wipe();
    data_ = std::move(other.data_);
    other.data_.clear();
  }
  return *this;
}

void SecureBytes::wipe() noexcept
{
  if (data_.empty()) return;
  OPENSSL_cleanse(data_.data(), data_.size());
  data_.clear();
  g_wipes.fetch_add(1, std::memory_order_relaxed);
}

bool operator==(const SecureBytes& a, const SecureBytes& b)
{
  return a.size() == b.size() && CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

std::uint64_t secure_wipe_count()
{
  return g_wipes.load(std::memory_order_relaxed);
}

void ByteWriter::u32(std::uint32_t v)
{
  for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void ByteWriter::u64(std::uint64_t v)
{
  for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void ByteWriter::framed(ByteView v)
{
  if (v.size() > 0xffffffffu) throw ValidationError("field too large to frame");
  u32(static_cast<std::uint32_t>(v.size()));
  raw(v);
}

void ByteReader::need(std::size_t n) const
{
  if (remaining() < n) {
    throw ValidationError("truncated input at offset " + std::to_string(pos_) + ": need " +
                          std::to_string(n) + " bytes, have " + std::to_string(remaining()));
  }
}

std::uint8_t ByteReader::u8()
{
  need(1);
  return in_[pos_++];
}

std::uint32_t ByteReader::u32()
{
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = v << 8 | in_[pos_++];
  return v;
}

std::uint64_t ByteReader::u64()
{
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = v << 8 | in_[pos_++];
  return v;
}

ByteView ByteReader::raw(std::size_t n)
{
  need(n);
  auto out = in_.subspan(pos_, n);
  pos_ += n;
  return out;
}

ByteView ByteReader::framed(std::size_t max_len)
{
  std::size_t at = pos_;
  std::uint32_t len = u32();
  if (len > max_len) {
    throw ValidationError("field at offset " + std::to_string(at) + " declares " + std::to_string(len) +
                          " bytes, limit " + std::to_string(max_len));
  }
  return raw(len);
}

}  // namespace authkit
