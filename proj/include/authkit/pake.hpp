#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "authkit/bytes.hpp"
#include "authkit/crypto.hpp"
#include "authkit/fingerprint.hpp"
#include "authkit/group.hpp"

namespace authkit {

enum class PakeRole : std::uint8_t {
  Initiator,  // blinds with M
  Responder,  // blinds with N
};

const char* to_string(PakeRole r);

/// Group, the two blinding points and the protocol hash.
struct PublicParams {
  /// M and N derived by hashing "pake-authkit:M" / "pake-authkit:N".
  static PublicParams derive(const Group& group);

  /// Explicit blinding points; throws ValidationError if either is the
  /// identity, they coincide, or they belong to another group.
  PublicParams(const Group& group, GroupElement m, GroupElement n);

  const Group& group() const { return *group_; }

  const Group* group_;
  GroupElement m;
  GroupElement n;
  std::string hash_id = "SHA-256";
  /// Refuse an identity peer element before exponentiating. Only the
  /// exhaustive tiny-group coin sweeps switch this off, since there some
  /// coins legitimately blind to the identity.
  bool identity_guard = true;
};

enum class SecretSource : std::uint8_t { Direct, Embedded };

struct PasswordScalar {
  Scalar pi;
  SecretSource source = SecretSource::Direct;
};

/// NFC, surrounding whitespace trimmed, upper-cased (root locale).
/// Throws ValidationError on invalid UTF-8.
std::string normalize_secret(std::string_view secret);

/// pi = SHA-256("pwd-to-scalar" || normalized secret) mod q.
PasswordScalar derive_password_scalar(std::string_view secret, const PublicParams& params,
                                      SecretSource source = SecretSource::Direct);

/// One flow of the exchange: who I am, my public key, my blinded ephemeral.
struct FlowMessage {
  std::string identity;
  Bytes pk;
  GroupElement blinded;

  Bytes serialize() const;
  /// Throws ProtocolError("malformed flow: ...") on any framing or group error.
  static FlowMessage parse(ByteView data, const Group& group);

  friend bool operator==(const FlowMessage&, const FlowMessage&) = default;
};

struct RawSharedSecret {
  SecureBytes sk;
};

/// Secret per-run state. Move-only and consumed by pake_finish.
class EphemeralState {
public:
  EphemeralState(EphemeralState&&) noexcept = default;
  EphemeralState& operator=(EphemeralState&&) noexcept = default;
  EphemeralState(const EphemeralState&) = delete;
  EphemeralState& operator=(const EphemeralState&) = delete;

  PakeRole role() const { return role_; }
  const GroupElement& blinded() const { return blinded_; }
  const std::string& identity() const { return identity_; }
  const Fingerprint& pk_fingerprint() const { return pk_fpr_; }
  bool consumed() const { return consumed_; }

private:
  friend struct PakeOps;
  EphemeralState(const PublicParams& params, PakeRole role, Scalar coin, PasswordScalar pi, std::string identity,
                 Fingerprint fpr, GroupElement blinded)
      : params_(&params), role_(role), coin_(std::move(coin)), pi_(std::move(pi)), identity_(std::move(identity)),
        pk_fpr_(fpr), blinded_(std::move(blinded))
  {
  }

  const PublicParams* params_;
  PakeRole role_;
  Scalar coin_;
  PasswordScalar pi_;
  std::string identity_;
  Fingerprint pk_fpr_;
  GroupElement blinded_;
  bool consumed_ = false;
};

struct PakeStart {
  EphemeralState state;
  FlowMessage flow;
};

/// Draws a fresh coin and blinds g^coin with M^pi (initiator) or N^pi
/// (responder). Coins that would blind to the identity are redrawn.
/// `params` must outlive the returned state.
PakeStart pake_start(const PublicParams& params, PakeRole role, const PasswordScalar& pi, std::string identity,
                     ByteView pk, RandomSource& rng);

/// Same, with a caller-chosen coin (oracle tests, simulations).
PakeStart pake_start_with_coin(const PublicParams& params, PakeRole role, const PasswordScalar& pi,
                               std::string identity, ByteView pk, const Scalar& coin);

/// K = (peer / (other role's blinding point)^pi)^coin and
/// sk = H(A, B, X*, Y*, pi, K), initiator's values always in the A/X* slots.
/// Throws ProtocolError on a peer element from another group or, with the
/// guard on, the identity. Throws UsageError if `state` was already used.
RawSharedSecret pake_finish(EphemeralState& state, const FlowMessage& peer);

/// The unhashed Diffie-Hellman value K, exposed for oracle tests.
GroupElement pake_shared_element(const PublicParams& params, PakeRole own_role, const Scalar& coin,
                                 const PasswordScalar& pi, const GroupElement& peer_blinded);

/// The framed hash input for sk, exposed for oracle tests.
Bytes pake_hash_input(std::string_view initiator_id, std::string_view responder_id, const GroupElement& x_star,
                      const GroupElement& y_star, const Scalar& pi, const GroupElement& k);

}  // namespace authkit
