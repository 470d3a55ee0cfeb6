#pragma once

#include <optional>
#include <span>
#include <string>

#include "authkit/bytes.hpp"
#include "authkit/crypto.hpp"
#include "authkit/fingerprint.hpp"
#include "authkit/pake.hpp"

namespace authkit {

inline constexpr std::size_t kKeySize = 32;
inline constexpr std::size_t kTagSize = 32;

/// (K, k_mac_a, k_mac_b) from HKDF-SHA256 over sk with labels
/// "session-key", "mac-key-A", "mac-key-B".
struct KeyBundle {
  SecureBytes session_key;
  SecureBytes k_mac_a;
  SecureBytes k_mac_b;
};

KeyBundle derive_key_bundle(const RawSharedSecret& sk);

struct SessionId {
  Digest sid{};
  std::string hex() const { return to_hex(sid); }
  friend bool operator==(const SessionId&, const SessionId&) = default;
};

/// SHA-256("sid" || framed(initiator flow) || framed(responder flow)).
SessionId compute_sid(const FlowMessage& initiator_flow, const FlowMessage& responder_flow);
/// Throws ProtocolError unless the transcript holds exactly the two
/// first-round flows, initiator first.
SessionId compute_sid(std::span<const FlowMessage> transcript);

enum class TagDirection : std::uint8_t { FromA = 1, FromB = 2 };

struct ConfirmationTag {
  Bytes tag;
  TagDirection direction = TagDirection::FromA;

  Bytes serialize() const;
  /// Any length is accepted here; short tags simply fail verification.
  static ConfirmationTag parse(ByteView data);

  friend bool operator==(const ConfirmationTag&, const ConfirmationTag&) = default;
};

/// HMAC-SHA256(k_mac, fpr_a || fpr_b || sid). Throws ValidationError if a
/// fingerprint is not 20 bytes.
ConfirmationTag compute_tag(ByteView k_mac, ByteView fpr_a, ByteView fpr_b, const SessionId& sid,
                            TagDirection direction);
ConfirmationTag compute_tag(ByteView k_mac, const Fingerprint& fpr_a, const Fingerprint& fpr_b,
                            const SessionId& sid, TagDirection direction);

/// Embedded-secret mode, where the fingerprints already sit inside pi:
/// HMAC-SHA256(k_mac, sid).
ConfirmationTag compute_embedded_tag(ByteView k_mac, const SessionId& sid, TagDirection direction);

/// Constant-time; false on direction mismatch or truncated tag.
bool verify_peer_tag(const ConfirmationTag& expected, const ConfirmationTag& received);

/// user_secret || hex(fpr_a) || hex(fpr_b). Throws ValidationError for an
/// empty secret or wrong-length fingerprint.
std::string compose_embedded_secret(std::string_view user_secret, ByteView fpr_a, ByteView fpr_b);
std::string compose_embedded_secret(std::string_view user_secret, const Fingerprint& fpr_a,
                                    const Fingerprint& fpr_b);

enum class ConfirmMode : std::uint8_t { Direct, Embedded };

const char* to_string(ConfirmMode m);

enum class ConfirmOutcome : std::uint8_t { Accepted, AuthenticationFailed };

struct ConfirmResult {
  ConfirmOutcome outcome;
  /// Present only when accepted.
  std::optional<KeyBundle> keys;
};

/// Holds the key bundle for one run and releases it only after the peer's
/// tag verifies. One verification per instance: a second call throws
/// UsageError, so a run can test at most one candidate password.
class KeyConfirmation {
public:
  /// `fpr_a` / `fpr_b` are this party's view of the initiator's and the
  /// responder's key fingerprints.
  KeyConfirmation(const RawSharedSecret& sk, PakeRole self, ConfirmMode mode, const Fingerprint& fpr_a,
                  const Fingerprint& fpr_b, const SessionId& sid);

  const ConfirmationTag& own_tag() const { return own_tag_; }
  const SessionId& sid() const { return sid_; }
  bool spent() const { return spent_; }

  ConfirmResult verify_peer(const ConfirmationTag& received);

private:
  std::optional<KeyBundle> keys_;
  ConfirmationTag own_tag_;
  ConfirmationTag expected_peer_tag_;
  SessionId sid_;
  bool spent_ = false;
};

/// Process-wide count of KeyConfirmation::verify_peer calls (instrumentation).
std::uint64_t tag_verification_count();

}  // namespace authkit
