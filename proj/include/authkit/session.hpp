#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "authkit/confirm.hpp"
#include "authkit/envelope.hpp"
#include "authkit/errors.hpp"
#include "authkit/pake.hpp"
#include "authkit/trust_store.hpp"

namespace authkit {

/// A session with this peer is already in progress.
class BusySession : public UsageError {
public:
  using UsageError::UsageError;
};

/// Too many failed authentications; a manual reset is required.
class PeerLocked : public UsageError {
public:
  using UsageError::UsageError;
};

/// Renewal requested for a peer that was never authenticated.
class NoChainRoot : public UsageError {
public:
  using UsageError::UsageError;
};

enum class SessionPhase : std::uint8_t { AwaitSecret, FlowSent, FlowReceived, AwaitTag, Accepted, Aborted };
const char* to_string(SessionPhase p);

enum class SessionOutcome : std::uint8_t { Accepted, AuthenticationFailed, Timeout, ProtocolViolation };
const char* to_string(SessionOutcome o);

/// Either a user secret (normalized and hashed internally) or a ready-made
/// scalar. Raw scalars only work in direct mode; simulations use them to
/// sweep the whole password space of a small group.
using SecretInput = std::variant<std::string, PasswordScalar>;

struct SessionRecord {
  ConversationId conversation_id{};
  bool has_conversation = false;
  std::optional<SessionId> session_id;
  std::string peer_identity;
  SessionPhase phase = SessionPhase::AwaitSecret;
  PakeRole role = PakeRole::Initiator;
  ConfirmMode mode = ConfirmMode::Direct;
  bool renewal = false;
  std::uint32_t failed_attempts = 0;
  std::uint64_t chain_counter = 0;
  /// Present iff phase == Accepted.
  std::optional<KeyBundle> established_key;
  std::optional<SessionOutcome> outcome;
  std::optional<Fingerprint> peer_fingerprint;
  std::uint64_t created_at = 0;
  std::uint64_t updated_at = 0;

  bool terminal() const { return phase == SessionPhase::Accepted || phase == SessionPhase::Aborted; }
};

struct HandleResult {
  std::string peer;
  std::vector<Envelope> outbound;
  std::optional<SessionOutcome> outcome;
  /// Why the envelope was refused. State is unchanged when set.
  std::optional<std::string> violation;
  /// Replay of something already processed, or our own echo.
  bool ignored = false;
};

struct Transition {
  std::string owner;
  std::string peer;
  SessionPhase from;
  SessionPhase to;
  std::optional<SessionOutcome> outcome;
  std::uint64_t at;
};
using TransitionObserver = std::function<void(const Transition&)>;

/// Per-peer session state machine for one local identity.
///
/// Initiator: start_session -> FlowSent -> (Flow2) AwaitTag -> (TagB) done.
/// Responder: Flow1 and provide_secret in either order -> AwaitTag, sending
/// Flow2 and TagB together -> (TagA) done.
///
/// Each run verifies at most one peer tag. Only a verified mismatch counts
/// as a failed attempt; timeouts and refused envelopes never do.
class SessionManager {
public:
  using Clock = std::function<std::uint64_t()>;

  /// `params`, `store` and `rng` must outlive the manager. `timeout` is in
  /// clock units of inactivity.
  SessionManager(const PublicParams& params, std::string identity, Bytes public_key, PeerTrustStore& store,
                 RandomSource& rng, Clock clock, std::uint64_t timeout);
  ~SessionManager();
  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  const std::string& identity() const { return identity_; }
  const Bytes& public_key() const { return public_key_; }
  PeerTrustStore& store() { return store_; }
  const PublicParams& params() const { return params_; }

  /// Throws BusySession, PeerLocked, or ValidationError (empty secret,
  /// embedded mode without `expected_peer_pk`, raw scalar in embedded mode).
  Envelope start_session(const std::string& peer, SecretInput secret, ConfirmMode mode,
                         std::optional<Bytes> expected_peer_pk = std::nullopt);

  /// Arms the responder side. If the peer's first flow already arrived the
  /// reply (Flow2 then TagB) is returned, otherwise nothing.
  std::vector<Envelope> provide_secret(const std::string& peer, SecretInput secret, ConfirmMode mode,
                                       std::optional<Bytes> expected_peer_pk = std::nullopt);

  /// Automated run keyed by the chain. Presents `new_pk` instead of the
  /// current key when given; it becomes public_key() once accepted.
  /// Throws NoChainRoot, BusySession or PeerLocked.
  Envelope renew_chain(const std::string& peer, std::optional<Bytes> new_pk = std::nullopt);

  HandleResult handle_envelope(const Envelope& env);

  /// Aborts every non-terminal session idle for at least the timeout.
  /// Returns the affected peers.
  std::vector<std::string> expire();

  /// Latest session with `peer`, or nullptr.
  const SessionRecord* session(const std::string& peer) const;
  bool has_active_session(const std::string& peer) const;
  /// Every peer with a current or finished session, in name order.
  std::vector<std::string> known_peers() const;
  /// Peers with a session that has not yet ended.
  std::vector<std::string> active_peers() const;
  /// Forgets the session and wipes its key material.
  void drop_session(const std::string& peer);

  void set_observer(TransitionObserver obs) { observer_ = std::move(obs); }

private:
  struct Session;

  Session& fresh_session(const std::string& peer, PakeRole role, std::optional<SecretInput> secret,
                         ConfirmMode mode, std::optional<Bytes> expected_peer_pk, bool renewal, Bytes own_pk);
  Envelope initiate(Session& s);
  void ensure_can_start(const std::string& peer) const;
  SecretInput chain_secret(const std::string& peer) const;
  PasswordScalar password_for(const Session& s, const Fingerprint& fpr_a, const Fingerprint& fpr_b) const;
  Envelope envelope(const Session& s, FlowType type, Bytes payload) const;
  std::vector<Envelope> respond(Session& s);
  HandleResult on_first_flow(const Envelope& env);
  HandleResult on_second_flow(Session& s, const Envelope& env);
  HandleResult on_tag(Session& s, const Envelope& env);
  std::optional<SessionOutcome> verify(Session& s, const ConfirmationTag& tag);
  void set_phase(Session& s, SessionPhase to, std::optional<SessionOutcome> outcome = std::nullopt);
  void finish(Session& s);
  Session* by_conversation(const ConversationId& id);

  const PublicParams& params_;
  std::string identity_;
  Bytes public_key_;
  PeerTrustStore& store_;
  RandomSource& rng_;
  Clock clock_;
  std::uint64_t timeout_;
  std::map<std::string, std::unique_ptr<Session>> sessions_;
  /// Conversations that ended or were superseded; later traffic is ignored.
  std::set<ConversationId> closed_;
  TransitionObserver observer_;
};

}  // namespace authkit
