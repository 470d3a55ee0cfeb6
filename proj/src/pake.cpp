#include "authkit/pake.hpp"

#include <memory>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>
#include <unicode/ustring.h>

#include "authkit/errors.hpp"

namespace authkit {

namespace {

constexpr std::size_t kMaxIdentity = 1024;
constexpr std::size_t kMaxPublicKey = 16 * 1024;

const GroupElement& blinding_point(const PublicParams& params, PakeRole role)
{
  return role == PakeRole::Initiator ? params.m : params.n;
}

PakeRole other(PakeRole r)
{
  return r == PakeRole::Initiator ? PakeRole::Responder : PakeRole::Initiator;
}

}  // namespace

struct PakeOps {
  static PakeStart start(const PublicParams& params, PakeRole role, const PasswordScalar& pi, std::string identity,
                         ByteView pk, Scalar coin)
  {
    if (identity.empty()) throw ValidationError("identity must not be empty");
    const Group& g = params.group();
    GroupElement blinded = g.mul(g.g_pow(coin), g.pow(blinding_point(params, role), pi.pi));
    FlowMessage flow{identity, Bytes(pk.begin(), pk.end()), blinded};
    EphemeralState st(params, role, std::move(coin), pi, std::move(identity), fingerprint_of(pk), std::move(blinded));
    return PakeStart{std::move(st), std::move(flow)};
  }

  static RawSharedSecret finish(EphemeralState& st, const FlowMessage& peer)
  {
    if (st.consumed_) throw UsageError("ephemeral state already consumed");
    const PublicParams& params = *st.params_;
    const Group& g = params.group();
    if (&peer.blinded.group() != &g) throw ProtocolError("malformed flow: peer element from another group");
    if (params.identity_guard && g.is_identity(peer.blinded)) {
      throw ProtocolError("malformed flow: identity element rejected");
    }
    GroupElement k = pake_shared_element(params, st.role_, st.coin_, st.pi_, peer.blinded);

    const bool initiator = st.role_ == PakeRole::Initiator;
    const std::string& a = initiator ? st.identity_ : peer.identity;
    const std::string& b = initiator ? peer.identity : st.identity_;
    const GroupElement& x_star = initiator ? st.blinded_ : peer.blinded;
    const GroupElement& y_star = initiator ? peer.blinded : st.blinded_;

    Bytes input = pake_hash_input(a, b, x_star, y_star, st.pi_.pi, k);
    Digest d = sha256(input);
    std::fill(input.begin(), input.end(), 0);
    st.consumed_ = true;
    // Drop the coin as soon as it is no longer needed.
    st.coin_ = g.scalar(0);
    return RawSharedSecret{SecureBytes(d)};
  }
};

const char* to_string(PakeRole r)
{
  return r == PakeRole::Initiator ? "initiator" : "responder";
}

PublicParams PublicParams::derive(const Group& group)
{
  GroupElement m = group.hash_to_element("pake-authkit:M");
  GroupElement n = group.hash_to_element("pake-authkit:N");
  // Small groups can map both labels onto the same element.
  for (int i = 1; n == m; ++i) {
    n = group.hash_to_element("pake-authkit:N#" + std::to_string(i));
  }
  return PublicParams(group, std::move(m), std::move(n));
}

PublicParams::PublicParams(const Group& group, GroupElement m_, GroupElement n_)
    : group_(&group), m(std::move(m_)), n(std::move(n_))
{
  if (&m.group() != &group || &n.group() != &group) throw ValidationError("M and N must belong to the group");
  if (group.is_identity(m) || group.is_identity(n)) throw ValidationError("M and N must not be the identity");
  if (m == n) throw ValidationError("M and N must differ");
}

std::string normalize_secret(std::string_view secret)
{
  UErrorCode status = U_ZERO_ERROR;
  int32_t needed = 0;
  u_strFromUTF8(nullptr, 0, &needed, secret.data(), static_cast<int32_t>(secret.size()), &status);
  if (status == U_INVALID_CHAR_FOUND || status == U_ILLEGAL_CHAR_FOUND) {
    throw ValidationError("secret is not valid UTF-8");
  }

  icu::UnicodeString text = icu::UnicodeString::fromUTF8(icu::StringPiece(secret.data(), secret.size()));
  status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw EnvironmentError("ICU NFC normalizer unavailable");
  icu::UnicodeString normalized = nfc->normalize(text, status);
  if (U_FAILURE(status)) throw ValidationError("secret could not be normalized");
  normalized.trim();
  normalized.toUpper(icu::Locale::getRoot());
  // Upper-casing can produce decomposed sequences; recompose.
  icu::UnicodeString recomposed = nfc->normalize(normalized, status);
  if (U_FAILURE(status)) throw ValidationError("secret could not be normalized");

  std::string out;
  recomposed.toUTF8String(out);
  return out;
}

PasswordScalar derive_password_scalar(std::string_view secret, const PublicParams& params, SecretSource source)
{
  std::string normalized = normalize_secret(secret);
  if (normalized.empty()) throw ValidationError("secret must not be empty");
  ByteWriter w;
  w.raw("pwd-to-scalar");
  w.raw(normalized);
  Bytes input = std::move(w).take();
  Digest d = sha256(input);
  std::fill(input.begin(), input.end(), 0);
  std::fill(normalized.begin(), normalized.end(), '\0');
  PasswordScalar out{params.group().scalar_from_bytes(d), source};
  std::fill(d.begin(), d.end(), 0);
  return out;
}

Bytes FlowMessage::serialize() const
{
  ByteWriter w;
  w.framed(identity);
  w.framed(pk);
  w.framed(blinded.bytes());
  return std::move(w).take();
}

FlowMessage FlowMessage::parse(ByteView data, const Group& group)
{
  try {
    ByteReader r(data);
    ByteView id = r.framed(kMaxIdentity);
    ByteView pk = r.framed(kMaxPublicKey);
    ByteView blinded = r.framed(group.element_size());
    if (!r.done()) throw ValidationError("trailing bytes at offset " + std::to_string(r.offset()));
    if (id.empty()) throw ValidationError("empty identity");
    return FlowMessage{std::string(id.begin(), id.end()), Bytes(pk.begin(), pk.end()), group.decode(blinded)};
  } catch (const ValidationError& e) {
    throw ProtocolError(std::string("malformed flow: ") + e.what());
  }
}

PakeStart pake_start(const PublicParams& params, PakeRole role, const PasswordScalar& pi, std::string identity,
                     ByteView pk, RandomSource& rng)
{
  const Group& g = params.group();
  const GroupElement factor = g.pow(blinding_point(params, role), pi.pi);
  for (;;) {
    Scalar coin = g.random_scalar(rng);
    if (!g.is_identity(g.mul(g.g_pow(coin), factor))) {
      return PakeOps::start(params, role, pi, std::move(identity), pk, std::move(coin));
    }
  }
}

PakeStart pake_start_with_coin(const PublicParams& params, PakeRole role, const PasswordScalar& pi,
                               std::string identity, ByteView pk, const Scalar& coin)
{
  return PakeOps::start(params, role, pi, std::move(identity), pk, coin);
}

RawSharedSecret pake_finish(EphemeralState& state, const FlowMessage& peer)
{
  return PakeOps::finish(state, peer);
}

GroupElement pake_shared_element(const PublicParams& params, PakeRole own_role, const Scalar& coin,
                                 const PasswordScalar& pi, const GroupElement& peer_blinded)
{
  const Group& g = params.group();
  GroupElement unblinded = g.div(peer_blinded, g.pow(blinding_point(params, other(own_role)), pi.pi));
  return g.pow(unblinded, coin);
}

Bytes pake_hash_input(std::string_view initiator_id, std::string_view responder_id, const GroupElement& x_star,
                      const GroupElement& y_star, const Scalar& pi, const GroupElement& k)
{
  ByteWriter w;
  w.framed(initiator_id);
  w.framed(responder_id);
  w.raw(x_star.bytes());
  w.raw(y_star.bytes());
  w.raw(pi.bytes());
  w.raw(k.bytes());
  return std::move(w).take();
}

}  // namespace authkit
