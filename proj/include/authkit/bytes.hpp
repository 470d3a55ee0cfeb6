#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace authkit {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_bytes(std::string_view s)
{
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::string to_hex(ByteView data);

/// Parses an even-length hex string (either case). Throws ValidationError.
Bytes from_hex(std::string_view hex);

/// Byte buffer that is wiped when destroyed or cleared.
///
/// Every wipe bumps a process-wide counter so tests can observe that key
/// material was actually erased.
class SecureBytes {
public:
  SecureBytes() = default;
  explicit SecureBytes(std::size_t n) : data_(n, 0) {}
  explicit SecureBytes(ByteView v) : data_(v.begin(), v.end()) {}
  SecureBytes(const SecureBytes&) = default;
  SecureBytes(SecureBytes&& other) noexcept : data_(std::move(other.data_)) { other.data_.clear(); }
  SecureBytes& operator=(const SecureBytes& other);
  SecureBytes& operator=(SecureBytes&& other) noexcept;
  ~SecureBytes() { wipe(); }

  void wipe() noexcept;

  std::uint8_t* data() { return data_.data(); }
  const std::uint8_t* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  ByteView view() const { return {data_.data(), data_.size()}; }
  std::span<std::uint8_t> mutable_view() { return {data_.data(), data_.size()}; }
  std::uint8_t operator[](std::size_t i) const { return data_[i]; }

  friend bool operator==(const SecureBytes& a, const SecureBytes& b);

private:
  std::vector<std::uint8_t> data_;
};

/// Number of non-empty SecureBytes buffers wiped so far in this process.
std::uint64_t secure_wipe_count();

/// Big-endian framing writer shared by the hash inputs and wire codecs.
class ByteWriter {
public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void raw(ByteView v) { out_.insert(out_.end(), v.begin(), v.end()); }
  void raw(std::string_view s) { raw(as_bytes(s)); }
  /// 4-byte big-endian length followed by the bytes.
  void framed(ByteView v);
  void framed(std::string_view s) { framed(as_bytes(s)); }

  const Bytes& bytes() const& { return out_; }
  Bytes take() && { return std::move(out_); }

private:
  Bytes out_;
};

/// Cursor over a byte buffer. Reads past the end throw ValidationError with
/// the offending offset.
class ByteReader {
public:
  explicit ByteReader(ByteView in) : in_(in) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  ByteView raw(std::size_t n);
  /// Reads a 4-byte length prefix then that many bytes; `max_len` bounds it.
  ByteView framed(std::size_t max_len);

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }
  bool done() const { return pos_ == in_.size(); }

private:
  void need(std::size_t n) const;

  ByteView in_;
  std::size_t pos_ = 0;
};

}  // namespace authkit
