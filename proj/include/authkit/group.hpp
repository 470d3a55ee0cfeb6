#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "authkit/bytes.hpp"
#include "authkit/crypto.hpp"

namespace authkit {

class Group;

/// Exponent in [0, q), stored as a fixed-width big-endian integer of the
/// group's scalar size. Wiped on destruction since coins and password
/// scalars are both secrets.
class Scalar {
public:
  const Group& group() const { return *group_; }
  ByteView bytes() const { return be_.view(); }
  /// Only meaningful for groups whose order fits in 64 bits.
  std::uint64_t to_u64() const;

  friend bool operator==(const Scalar& a, const Scalar& b);

private:
  friend class Group;
  Scalar(const Group* g, SecureBytes be) : group_(g), be_(std::move(be)) {}

  const Group* group_;
  SecureBytes be_;
};

/// Member of the prime-order subgroup, held in canonical encoding.
class GroupElement {
public:
  const Group& group() const { return *group_; }
  ByteView bytes() const { return enc_; }
  std::string hex() const { return to_hex(enc_); }

  friend bool operator==(const GroupElement& a, const GroupElement& b)
  {
    return a.group_ == b.group_ && a.enc_ == b.enc_;
  }

private:
  friend class Group;
  GroupElement(const Group* g, Bytes enc) : group_(g), enc_(std::move(enc)) {}

  const Group* group_;
  Bytes enc_;
};

/// Cyclic group of prime order q with a fixed generator g.
///
/// Groups are process-lifetime singletons obtained from tiny23(), p256() or
/// group_by_name(); elements and scalars refer back to them by address and
/// every binary operation checks that both operands come from the same one.
class Group {
public:
  virtual ~Group() = default;
  Group(const Group&) = delete;
  Group& operator=(const Group&) = delete;

  virtual std::string_view name() const = 0;
  /// Length of every canonical element encoding.
  virtual std::size_t element_size() const = 0;
  /// Length of every scalar encoding (byte length of q).
  virtual std::size_t scalar_size() const = 0;
  /// q as big-endian bytes.
  virtual Bytes order() const = 0;

  GroupElement identity() const;
  GroupElement generator() const;

  GroupElement g_pow(const Scalar& s) const;
  GroupElement mul(const GroupElement& a, const GroupElement& b) const;
  GroupElement div(const GroupElement& a, const GroupElement& b) const;
  GroupElement inverse(const GroupElement& a) const;
  GroupElement pow(const GroupElement& a, const Scalar& s) const;
  bool is_identity(const GroupElement& a) const;

  /// Rejects anything that is not the canonical encoding of a subgroup member.
  GroupElement decode(ByteView enc) const;

  Scalar scalar(std::uint64_t v) const;
  /// Interprets `be` as a big-endian integer and reduces it mod q.
  Scalar scalar_from_bytes(ByteView be) const;
  /// Reduces (bit length of q + 128) random bits mod q.
  Scalar random_scalar(RandomSource& rng) const;

  /// Deterministic try-and-increment map from a label to a non-identity
  /// element whose discrete log nobody knows.
  GroupElement hash_to_element(std::string_view label) const;

protected:
  Group() = default;

  virtual Bytes encode_identity() const = 0;
  virtual Bytes encode_generator() const = 0;
  virtual Bytes op_mul(ByteView a, ByteView b) const = 0;
  virtual Bytes op_inverse(ByteView a) const = 0;
  virtual Bytes op_pow(ByteView a, ByteView scalar_be) const = 0;
  virtual Bytes op_g_pow(ByteView scalar_be) const = 0;
  /// Returns false if `enc` is not a canonical subgroup encoding.
  virtual bool op_validate(ByteView enc) const = 0;
  virtual Bytes op_reduce(ByteView be) const = 0;
  /// Candidate element for one hash-to-group attempt, or empty on failure.
  virtual Bytes op_from_hash(const Digest& h) const = 0;

private:
  void check_same(const GroupElement& a) const;
  void check_same(const Scalar& s) const;
};

/// Order-11 subgroup of the integers mod 23 generated by 2. Small enough to
/// enumerate every scalar, element and password.
const Group& tiny23();

/// NIST P-256 (cofactor 1). Elements are 33-byte compressed points; the
/// identity is encoded as 33 zero bytes.
const Group& p256();

/// "tiny23" or "p256"; throws ValidationError otherwise.
const Group& group_by_name(std::string_view name);

}  // namespace authkit
