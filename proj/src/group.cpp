#include "authkit/group.hpp"

#include <algorithm>
#include <memory>

#include <openssl/bn.h>
#include <openssl/ec.h>
#include <openssl/obj_mac.h>

#include "authkit/errors.hpp"

namespace authkit {

namespace {

struct BnFree {
  void operator()(BIGNUM* b) const { BN_clear_free(b); }
};
struct CtxFree {
  void operator()(BN_CTX* c) const { BN_CTX_free(c); }
};
struct PointFree {
  void operator()(EC_POINT* p) const { EC_POINT_clear_free(p); }
};
struct EcGroupFree {
  void operator()(EC_GROUP* g) const { EC_GROUP_free(g); }
};

using Bn = std::unique_ptr<BIGNUM, BnFree>;
using BnCtx = std::unique_ptr<BN_CTX, CtxFree>;
using Point = std::unique_ptr<EC_POINT, PointFree>;

Bn bn_new()
{
  Bn b(BN_new());
  if (!b) throw EnvironmentError("BN_new failed");
  return b;
}

Bn bn_from(ByteView be)
{
  Bn b(BN_bin2bn(be.data(), static_cast<int>(be.size()), nullptr));
  if (!b) throw EnvironmentError("BN_bin2bn failed");
  return b;
}

Bn bn_from_u64(std::uint64_t v)
{
  Bn b = bn_new();
  if (BN_set_word(b.get(), v) != 1) throw EnvironmentError("BN_set_word failed");
  return b;
}

Bytes bn_to(const BIGNUM* b, std::size_t width)
{
  Bytes out(width);
  if (BN_bn2binpad(b, out.data(), static_cast<int>(width)) < 0) throw EnvironmentError("BN_bn2binpad failed");
  return out;
}

BnCtx ctx_new()
{
  BnCtx c(BN_CTX_new());
  if (!c) throw EnvironmentError("BN_CTX_new failed");
  return c;
}

void check(int ok, const char* what)
{
  if (ok != 1) throw EnvironmentError(what);
}

/// Prime-order-q subgroup of Z_p^* for prime p with q | p - 1.
class ModpGroup final : public Group {
public:
  ModpGroup(std::string name, std::uint64_t p, std::uint64_t q, std::uint64_t g)
      : name_(std::move(name)), p_(bn_from_u64(p)), q_(bn_from_u64(q)), g_(bn_from_u64(g)),
        cofactor_(bn_from_u64((p - 1) / q))
  {
    elem_size_ = static_cast<std::size_t>(BN_num_bytes(p_.get()));
    scalar_size_ = static_cast<std::size_t>(BN_num_bytes(q_.get()));
  }

  std::string_view name() const override { return name_; }
  std::size_t element_size() const override { return elem_size_; }
  std::size_t scalar_size() const override { return scalar_size_; }
  Bytes order() const override { return bn_to(q_.get(), scalar_size_); }

protected:
  Bytes encode_identity() const override { return bn_to(BN_value_one(), elem_size_); }
  Bytes encode_generator() const override { return bn_to(g_.get(), elem_size_); }

  Bytes op_mul(ByteView a, ByteView b) const override
  {
    auto ctx = ctx_new();
    auto x = bn_from(a), y = bn_from(b), r = bn_new();
    check(BN_mod_mul(r.get(), x.get(), y.get(), p_.get(), ctx.get()), "BN_mod_mul failed");
    return bn_to(r.get(), elem_size_);
  }

  Bytes op_inverse(ByteView a) const override
  {
    auto ctx = ctx_new();
    auto x = bn_from(a);
    Bn r(BN_mod_inverse(nullptr, x.get(), p_.get(), ctx.get()));
    if (!r) throw EnvironmentError("BN_mod_inverse failed");
    return bn_to(r.get(), elem_size_);
  }

  Bytes op_pow(ByteView a, ByteView scalar_be) const override
  {
    auto ctx = ctx_new();
    auto x = bn_from(a), e = bn_from(scalar_be), r = bn_new();
    check(BN_mod_exp(r.get(), x.get(), e.get(), p_.get(), ctx.get()), "BN_mod_exp failed");
    return bn_to(r.get(), elem_size_);
  }

  Bytes op_g_pow(ByteView scalar_be) const override { return op_pow(encode_generator(), scalar_be); }

  bool op_validate(ByteView enc) const override
  {
    if (enc.size() != elem_size_) return false;
    auto v = bn_from(enc);
    if (BN_is_zero(v.get()) || BN_cmp(v.get(), p_.get()) >= 0) return false;
    auto ctx = ctx_new();
    auto r = bn_new();
    check(BN_mod_exp(r.get(), v.get(), q_.get(), p_.get(), ctx.get()), "BN_mod_exp failed");
    return BN_is_one(r.get());
  }

  Bytes op_reduce(ByteView be) const override
  {
    auto ctx = ctx_new();
    auto v = bn_from(be), r = bn_new();
    check(BN_nnmod(r.get(), v.get(), q_.get(), ctx.get()), "BN_nnmod failed");
    return bn_to(r.get(), scalar_size_);
  }

  Bytes op_from_hash(const Digest& h) const override
  {
    auto ctx = ctx_new();
    auto v = bn_from(h), base = bn_new(), r = bn_new();
    check(BN_nnmod(base.get(), v.get(), p_.get(), ctx.get()), "BN_nnmod failed");
    if (BN_is_zero(base.get())) return {};
    check(BN_mod_exp(r.get(), base.get(), cofactor_.get(), p_.get(), ctx.get()), "BN_mod_exp failed");
    if (BN_is_one(r.get())) return {};
    return bn_to(r.get(), elem_size_);
  }

private:
  std::string name_;
  Bn p_, q_, g_, cofactor_;
  std::size_t elem_size_ = 0;
  std::size_t scalar_size_ = 0;
};

class EcGroup final : public Group {
public:
  EcGroup(std::string name, int nid) : name_(std::move(name)), group_(EC_GROUP_new_by_curve_name(nid))
  {
    if (!group_) throw EnvironmentError("curve unavailable");
    q_ = bn_new();
    check(EC_GROUP_get_order(group_.get(), q_.get(), nullptr), "EC_GROUP_get_order failed");
    Bn cof = bn_new();
    check(EC_GROUP_get_cofactor(group_.get(), cof.get(), nullptr), "EC_GROUP_get_cofactor failed");
    if (!BN_is_one(cof.get())) throw EnvironmentError("only prime-order curves are supported");
    scalar_size_ = static_cast<std::size_t>(BN_num_bytes(q_.get()));
    elem_size_ = (static_cast<std::size_t>(EC_GROUP_get_degree(group_.get())) + 7) / 8 + 1;
  }

  std::string_view name() const override { return name_; }
  std::size_t element_size() const override { return elem_size_; }
  std::size_t scalar_size() const override { return scalar_size_; }
  Bytes order() const override { return bn_to(q_.get(), scalar_size_); }

protected:
  Bytes encode_identity() const override { return Bytes(elem_size_, 0); }

  Bytes encode_generator() const override { return encode(EC_GROUP_get0_generator(group_.get())); }

  Bytes op_mul(ByteView a, ByteView b) const override
  {
    auto ctx = ctx_new();
    auto x = decode_point(a), y = decode_point(b), r = point_new();
    check(EC_POINT_add(group_.get(), r.get(), x.get(), y.get(), ctx.get()), "EC_POINT_add failed");
    return encode(r.get());
  }

  Bytes op_inverse(ByteView a) const override
  {
    auto ctx = ctx_new();
    auto x = decode_point(a);
    check(EC_POINT_invert(group_.get(), x.get(), ctx.get()), "EC_POINT_invert failed");
    return encode(x.get());
  }

  Bytes op_pow(ByteView a, ByteView scalar_be) const override
  {
    auto ctx = ctx_new();
    auto x = decode_point(a), r = point_new();
    auto e = bn_from(scalar_be);
    check(EC_POINT_mul(group_.get(), r.get(), nullptr, x.get(), e.get(), ctx.get()), "EC_POINT_mul failed");
    return encode(r.get());
  }

  Bytes op_g_pow(ByteView scalar_be) const override
  {
    auto ctx = ctx_new();
    auto r = point_new();
    auto e = bn_from(scalar_be);
    check(EC_POINT_mul(group_.get(), r.get(), e.get(), nullptr, nullptr, ctx.get()), "EC_POINT_mul failed");
    return encode(r.get());
  }

  bool op_validate(ByteView enc) const override
  {
    if (enc.size() != elem_size_) return false;
    if (std::all_of(enc.begin(), enc.end(), [](std::uint8_t b) { return b == 0; })) return true;
    if (enc[0] != 0x02 && enc[0] != 0x03) return false;
    auto ctx = ctx_new();
    auto pt = point_new();
    if (EC_POINT_oct2point(group_.get(), pt.get(), enc.data(), enc.size(), ctx.get()) != 1) return false;
    // oct2point tolerates x >= field prime on some builds; the round trip does not.
    Bytes again = encode(pt.get());
    return std::equal(again.begin(), again.end(), enc.begin(), enc.end());
  }

  Bytes op_reduce(ByteView be) const override
  {
    auto ctx = ctx_new();
    auto v = bn_from(be), r = bn_new();
    check(BN_nnmod(r.get(), v.get(), q_.get(), ctx.get()), "BN_nnmod failed");
    return bn_to(r.get(), scalar_size_);
  }

  Bytes op_from_hash(const Digest& h) const override
  {
    Bytes candidate(elem_size_, 0);
    candidate[0] = 0x02;
    std::copy_n(h.begin(), std::min(h.size(), elem_size_ - 1), candidate.begin() + 1);
    if (!op_validate(candidate)) return {};
    return candidate;
  }

private:
  Point point_new() const
  {
    Point p(EC_POINT_new(group_.get()));
    if (!p) throw EnvironmentError("EC_POINT_new failed");
    return p;
  }

  Point decode_point(ByteView enc) const
  {
    auto pt = point_new();
    if (std::all_of(enc.begin(), enc.end(), [](std::uint8_t b) { return b == 0; })) {
      check(EC_POINT_set_to_infinity(group_.get(), pt.get()), "EC_POINT_set_to_infinity failed");
      return pt;
    }
    auto ctx = ctx_new();
    check(EC_POINT_oct2point(group_.get(), pt.get(), enc.data(), enc.size(), ctx.get()), "EC_POINT_oct2point failed");
    return pt;
  }

  Bytes encode(const EC_POINT* pt) const
  {
    if (EC_POINT_is_at_infinity(group_.get(), pt)) return encode_identity();
    Bytes out(elem_size_);
    auto ctx = ctx_new();
    std::size_t n =
        EC_POINT_point2oct(group_.get(), pt, POINT_CONVERSION_COMPRESSED, out.data(), out.size(), ctx.get());
    if (n != elem_size_) throw EnvironmentError("EC_POINT_point2oct failed");
    return out;
  }

  std::string name_;
  std::unique_ptr<EC_GROUP, EcGroupFree> group_;
  Bn q_;
  std::size_t elem_size_ = 0;
  std::size_t scalar_size_ = 0;
};

}  // namespace

std::uint64_t Scalar::to_u64() const
{
  if (be_.size() > 8) throw UsageError("scalar does not fit in 64 bits");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < be_.size(); ++i) v = v << 8 | be_[i];
  return v;
}

bool operator==(const Scalar& a, const Scalar& b)
{
  return a.group_ == b.group_ && a.be_ == b.be_;
}

void Group::check_same(const GroupElement& a) const
{
  if (a.group_ != this) {
    throw UsageError("element of group " + std::string(a.group_->name()) + " used with group " + std::string(name()));
  }
}

void Group::check_same(const Scalar& s) const
{
  if (s.group_ != this) {
    throw UsageError("scalar of group " + std::string(s.group_->name()) + " used with group " + std::string(name()));
  }
}

GroupElement Group::identity() const
{
  return GroupElement(this, encode_identity());
}

GroupElement Group::generator() const
{
  return GroupElement(this, encode_generator());
}

GroupElement Group::g_pow(const Scalar& s) const
{
  check_same(s);
  return GroupElement(this, op_g_pow(s.bytes()));
}

GroupElement Group::mul(const GroupElement& a, const GroupElement& b) const
{
  check_same(a);
  check_same(b);
  return GroupElement(this, op_mul(a.enc_, b.enc_));
}

GroupElement Group::inverse(const GroupElement& a) const
{
  check_same(a);
  return GroupElement(this, op_inverse(a.enc_));
}

GroupElement Group::div(const GroupElement& a, const GroupElement& b) const
{
  return mul(a, inverse(b));
}

GroupElement Group::pow(const GroupElement& a, const Scalar& s) const
{
  check_same(a);
  check_same(s);
  return GroupElement(this, op_pow(a.enc_, s.bytes()));
}

bool Group::is_identity(const GroupElement& a) const
{
  check_same(a);
  return a.enc_ == encode_identity();
}

GroupElement Group::decode(ByteView enc) const
{
  if (!op_validate(enc)) {
    throw ValidationError("not a canonical " + std::string(name()) + " subgroup element");
  }
  return GroupElement(this, Bytes(enc.begin(), enc.end()));
}

Scalar Group::scalar(std::uint64_t v) const
{
  ByteWriter w;
  w.u64(v);
  return scalar_from_bytes(w.bytes());
}

Scalar Group::scalar_from_bytes(ByteView be) const
{
  Bytes reduced = op_reduce(be);
  SecureBytes s(reduced);
  std::fill(reduced.begin(), reduced.end(), 0);
  return Scalar(this, std::move(s));
}

Scalar Group::random_scalar(RandomSource& rng) const
{
  std::size_t order_bits = scalar_size() * 8;
  SecureBytes wide((order_bits + 128 + 7) / 8);
  rng.fill(wide.mutable_view());
  return scalar_from_bytes(wide.view());
}

GroupElement Group::hash_to_element(std::string_view label) const
{
  for (std::uint32_t counter = 0; counter < 1u << 16; ++counter) {
    ByteWriter w;
    w.raw("authkit-hash-to-group");
    w.framed(name());
    w.framed(label);
    w.u32(counter);
    Bytes candidate = op_from_hash(sha256(w.bytes()));
    if (!candidate.empty() && candidate != encode_identity()) return GroupElement(this, std::move(candidate));
  }
  throw EnvironmentError("hash_to_element did not converge");
}

const Group& tiny23()
{
  static const ModpGroup group("tiny23", 23, 11, 2);
  return group;
}

const Group& p256()
{
  static const EcGroup group("p256", NID_X9_62_prime256v1);
  return group;
}

const Group& group_by_name(std::string_view name)
{
  if (name == "tiny23") return tiny23();
  if (name == "p256") return p256();
  throw ValidationError("unknown group: " + std::string(name));
}

}  // namespace authkit
