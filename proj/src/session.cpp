#include "authkit/session.hpp"

#include <openssl/crypto.h>

#include "authkit/crypto.hpp"

namespace authkit {

const char* to_string(SessionPhase p)
{
  switch (p) {
    case SessionPhase::AwaitSecret: return "AwaitSecret";
    case SessionPhase::FlowSent: return "FlowSent";
    case SessionPhase::FlowReceived: return "FlowReceived";
    case SessionPhase::AwaitTag: return "AwaitTag";
    case SessionPhase::Accepted: return "Accepted";
    case SessionPhase::Aborted: return "Aborted";
  }
  return "?";
}

const char* to_string(SessionOutcome o)
{
  switch (o) {
    case SessionOutcome::Accepted: return "Accepted";
    case SessionOutcome::AuthenticationFailed: return "AuthenticationFailed";
    case SessionOutcome::Timeout: return "Timeout";
    case SessionOutcome::ProtocolViolation: return "ProtocolViolation";
  }
  return "?";
}

struct SessionManager::Session {
  SessionRecord record;
  std::optional<SecretInput> secret;
  std::optional<Bytes> expected_peer_pk;
  Bytes own_pk;
  std::optional<EphemeralState> ephemeral;
  std::optional<FlowMessage> own_flow;
  std::optional<FlowMessage> peer_flow;
  std::optional<KeyConfirmation> kc;
  std::optional<ConfirmationTag> buffered_tag;
  std::set<FlowType> seen;
};

namespace {

void wipe_secret(std::optional<SecretInput>& secret)
{
  if (!secret) return;
  if (auto* text = std::get_if<std::string>(&*secret)) OPENSSL_cleanse(text->data(), text->size());
  secret.reset();
}

void validate_secret(const SecretInput& secret, ConfirmMode mode)
{
  if (const auto* text = std::get_if<std::string>(&secret)) {
    std::string normalized = normalize_secret(*text);
    const bool empty = normalized.empty();
    OPENSSL_cleanse(normalized.data(), normalized.size());
    if (empty) throw ValidationError("secret must not be empty");
  } else if (mode == ConfirmMode::Embedded) {
    throw ValidationError("raw password scalars only work in direct mode");
  }
}

HandleResult refused(std::string peer, std::string why)
{
  HandleResult r;
  r.peer = std::move(peer);
  r.violation = std::move(why);
  return r;
}

}  // namespace

SessionManager::SessionManager(const PublicParams& params, std::string identity, Bytes public_key,
                               PeerTrustStore& store, RandomSource& rng, Clock clock, std::uint64_t timeout)
    : params_(params), identity_(std::move(identity)), public_key_(std::move(public_key)), store_(store), rng_(rng),
      clock_(std::move(clock)), timeout_(timeout)
{
  if (identity_.empty()) throw ValidationError("identity must not be empty");
  if (identity_.size() > Envelope::kMaxIdentity) throw ValidationError("identity too long");
  if (!clock_) throw ValidationError("clock required");
}

SessionManager::~SessionManager() = default;

void SessionManager::ensure_can_start(const std::string& peer) const
{
  if (peer.empty() || peer.size() > Envelope::kMaxIdentity) throw ValidationError("invalid peer identity");
  if (peer == identity_) throw ValidationError("cannot authenticate with yourself");
  if (has_active_session(peer)) throw BusySession("a session with " + peer + " is already in progress");
  if (store_.enforce_guess_budget(peer) == GuessBudget::Locked) {
    throw PeerLocked(peer + " is locked after repeated failures; reset the lock to continue");
  }
}

SessionManager::Session& SessionManager::fresh_session(const std::string& peer, PakeRole role,
                                                       std::optional<SecretInput> secret, ConfirmMode mode,
                                                       std::optional<Bytes> expected_peer_pk, bool renewal,
                                                       Bytes own_pk)
{
  auto s = std::make_unique<Session>();
  const std::uint64_t now = clock_();
  s->record.peer_identity = peer;
  s->record.role = role;
  s->record.mode = mode;
  s->record.renewal = renewal;
  s->record.created_at = now;
  s->record.updated_at = now;
  if (auto entry = store_.lookup(peer)) {
    s->record.failed_attempts = entry->failed_attempts;
    s->record.chain_counter = entry->chain_counter;
  }
  s->secret = std::move(secret);
  s->expected_peer_pk = std::move(expected_peer_pk);
  s->own_pk = std::move(own_pk);

  auto it = sessions_.find(peer);
  if (it != sessions_.end() && it->second->record.has_conversation) closed_.insert(it->second->record.conversation_id);
  Session& ref = *s;
  sessions_[peer] = std::move(s);
  return ref;
}

PasswordScalar SessionManager::password_for(const Session& s, const Fingerprint& fpr_a,
                                            const Fingerprint& fpr_b) const
{
  const SecretInput& secret = *s.secret;
  if (const auto* pi = std::get_if<PasswordScalar>(&secret)) return *pi;
  const std::string& text = std::get<std::string>(secret);
  if (s.record.mode == ConfirmMode::Direct) return derive_password_scalar(text, params_, SecretSource::Direct);
  std::string composed = compose_embedded_secret(text, fpr_a, fpr_b);
  PasswordScalar pi = derive_password_scalar(composed, params_, SecretSource::Embedded);
  OPENSSL_cleanse(composed.data(), composed.size());
  return pi;
}

Envelope SessionManager::envelope(const Session& s, FlowType type, Bytes payload) const
{
  Envelope e;
  e.flow_type = type;
  e.conversation_id = s.record.conversation_id;
  e.sender_identity = identity_;
  e.payload = std::move(payload);
  return e;
}

void SessionManager::set_phase(Session& s, SessionPhase to, std::optional<SessionOutcome> outcome)
{
  Transition t{identity_, s.record.peer_identity, s.record.phase, to, outcome, clock_()};
  s.record.phase = to;
  s.record.updated_at = t.at;
  if (outcome) s.record.outcome = outcome;
  if (observer_) observer_(t);
}

void SessionManager::finish(Session& s)
{
  if (s.record.has_conversation) closed_.insert(s.record.conversation_id);
  wipe_secret(s.secret);
  s.ephemeral.reset();
  s.kc.reset();
  s.buffered_tag.reset();
  if (auto entry = store_.lookup(s.record.peer_identity)) {
    s.record.failed_attempts = entry->failed_attempts;
    s.record.chain_counter = entry->chain_counter;
  }
}

SessionManager::Session* SessionManager::by_conversation(const ConversationId& id)
{
  for (auto& [_, s] : sessions_) {
    if (s->record.has_conversation && s->record.conversation_id == id) return s.get();
  }
  return nullptr;
}

Envelope SessionManager::initiate(Session& s)
{
  rng_.fill(s.record.conversation_id);
  s.record.has_conversation = true;
  Fingerprint fpr_a = fingerprint_of(s.own_pk);
  Fingerprint fpr_b = s.expected_peer_pk ? fingerprint_of(*s.expected_peer_pk) : Fingerprint{};
  PakeStart start = pake_start(params_, PakeRole::Initiator, password_for(s, fpr_a, fpr_b), identity_, s.own_pk, rng_);
  s.own_flow = std::move(start.flow);
  s.ephemeral.emplace(std::move(start.state));
  s.seen.insert(s.record.renewal ? FlowType::Renewal : FlowType::Flow1);
  set_phase(s, SessionPhase::FlowSent);
  return envelope(s, s.record.renewal ? FlowType::Renewal : FlowType::Flow1, s.own_flow->serialize());
}

Envelope SessionManager::start_session(const std::string& peer, SecretInput secret, ConfirmMode mode,
                                       std::optional<Bytes> expected_peer_pk)
{
  ensure_can_start(peer);
  validate_secret(secret, mode);
  if (mode == ConfirmMode::Embedded && !expected_peer_pk) {
    throw ValidationError("embedded mode needs the peer's public key to compose the secret");
  }
  Session& s = fresh_session(peer, PakeRole::Initiator, std::move(secret), mode, std::move(expected_peer_pk), false,
                             public_key_);
  return initiate(s);
}

std::vector<Envelope> SessionManager::provide_secret(const std::string& peer, SecretInput secret, ConfirmMode mode,
                                                     std::optional<Bytes> expected_peer_pk)
{
  if (peer.empty() || peer == identity_) throw ValidationError("invalid peer identity");
  validate_secret(secret, mode);
  if (store_.enforce_guess_budget(peer) == GuessBudget::Locked) {
    throw PeerLocked(peer + " is locked after repeated failures; reset the lock to continue");
  }
  auto it = sessions_.find(peer);
  if (it != sessions_.end() && !it->second->record.terminal()) {
    Session& s = *it->second;
    if (s.record.role != PakeRole::Responder || s.record.phase != SessionPhase::AwaitSecret || s.secret) {
      throw BusySession("a session with " + peer + " is already in progress");
    }
    s.secret = std::move(secret);
    s.record.mode = mode;
    s.expected_peer_pk = std::move(expected_peer_pk);
    return s.peer_flow ? respond(s) : std::vector<Envelope>{};
  }
  fresh_session(peer, PakeRole::Responder, std::move(secret), mode, std::move(expected_peer_pk), false, public_key_);
  return {};
}

SecretInput SessionManager::chain_secret(const std::string& peer) const
{
  auto entry = store_.lookup(peer);
  if (!entry || !entry->has_chain()) throw NoChainRoot("no authenticated chain with " + peer);
  ByteWriter info;
  info.raw("chain");
  info.u64(entry->chain_counter + 1);
  SecureBytes next = hkdf_sha256(entry->chain_key.view(), ByteView(info.bytes()), kKeySize);
  return SecretInput{to_hex(next.view())};
}

Envelope SessionManager::renew_chain(const std::string& peer, std::optional<Bytes> new_pk)
{
  ensure_can_start(peer);
  SecretInput secret = chain_secret(peer);
  Session& s = fresh_session(peer, PakeRole::Initiator, std::move(secret), ConfirmMode::Direct, std::nullopt, true,
                             new_pk.value_or(public_key_));
  return initiate(s);
}

std::vector<Envelope> SessionManager::respond(Session& s)
{
  const FlowMessage& peer = *s.peer_flow;
  Fingerprint peer_fpr = fingerprint_of(s.expected_peer_pk ? ByteView(*s.expected_peer_pk) : ByteView(peer.pk));
  Fingerprint own_fpr = fingerprint_of(s.own_pk);
  PakeStart start =
      pake_start(params_, PakeRole::Responder, password_for(s, peer_fpr, own_fpr), identity_, s.own_pk, rng_);
  set_phase(s, SessionPhase::FlowReceived);
  RawSharedSecret sk = pake_finish(start.state, peer);
  SessionId sid = compute_sid(peer, start.flow);
  s.kc.emplace(sk, PakeRole::Responder, s.record.mode, peer_fpr, own_fpr, sid);
  s.record.session_id = sid;
  s.record.peer_fingerprint = peer_fpr;
  s.own_flow = std::move(start.flow);
  wipe_secret(s.secret);
  set_phase(s, SessionPhase::AwaitTag);
  return {envelope(s, FlowType::Flow2, s.own_flow->serialize()),
          envelope(s, FlowType::TagB, s.kc->own_tag().serialize())};
}

HandleResult SessionManager::handle_envelope(const Envelope& env)
{
  HandleResult res;
  res.peer = env.sender_identity;
  if (env.sender_identity == identity_ || closed_.count(env.conversation_id) != 0) {
    res.ignored = true;
    return res;
  }
  Session* s = by_conversation(env.conversation_id);
  if (s == nullptr) {
    if (env.flow_type == FlowType::Flow1 || env.flow_type == FlowType::Renewal) return on_first_flow(env);
    return refused(env.sender_identity, "message for an unknown conversation");
  }
  if (s->record.peer_identity != env.sender_identity) {
    return refused(env.sender_identity, "sender does not match the conversation");
  }
  if (s->seen.count(env.flow_type) != 0) {
    res.ignored = true;
    return res;
  }
  switch (env.flow_type) {
    case FlowType::Flow2: return on_second_flow(*s, env);
    case FlowType::TagA:
    case FlowType::TagB: return on_tag(*s, env);
    default: return refused(env.sender_identity, "unexpected first flow in an open conversation");
  }
}

HandleResult SessionManager::on_first_flow(const Envelope& env)
{
  const std::string& peer = env.sender_identity;
  const bool renewal = env.flow_type == FlowType::Renewal;
  std::optional<FlowMessage> parsed;
  try {
    parsed = FlowMessage::parse(env.payload, params_.group());
  } catch (const ProtocolError& e) {
    return refused(peer, e.what());
  }
  FlowMessage& flow = *parsed;
  if (flow.identity != peer) return refused(peer, "flow identity does not match the sender");
  if (params_.identity_guard && params_.group().is_identity(flow.blinded)) {
    return refused(peer, "identity element rejected");
  }
  if (store_.enforce_guess_budget(peer) == GuessBudget::Locked) return refused(peer, "peer is locked");

  Session* s = nullptr;
  auto it = sessions_.find(peer);
  if (it != sessions_.end() && !it->second->record.terminal()) {
    Session& cur = *it->second;
    if (!renewal && cur.record.role == PakeRole::Responder && cur.record.phase == SessionPhase::AwaitSecret &&
        !cur.record.has_conversation) {
      s = &cur;
    } else if (cur.record.role == PakeRole::Initiator && cur.record.phase == SessionPhase::FlowSent &&
               cur.record.renewal == renewal) {
      // Both sides initiated at once: the smaller conversation id keeps the
      // initiator role, the other side answers it with the same secret.
      if (cur.record.conversation_id < env.conversation_id) {
        return refused(peer, "concurrent initiation; keeping our conversation");
      }
      std::optional<SecretInput> secret = std::move(cur.secret);
      std::optional<Bytes> expected = std::move(cur.expected_peer_pk);
      Bytes own_pk = cur.own_pk;
      ConfirmMode mode = cur.record.mode;
      s = &fresh_session(peer, PakeRole::Responder, std::move(secret), mode, std::move(expected), renewal,
                         std::move(own_pk));
    } else {
      return refused(peer, "a session with this peer is already in progress");
    }
  } else if (renewal) {
    SecretInput secret;
    try {
      secret = chain_secret(peer);
    } catch (const NoChainRoot& e) {
      return refused(peer, e.what());
    }
    s = &fresh_session(peer, PakeRole::Responder, std::move(secret), ConfirmMode::Direct, std::nullopt, true,
                       public_key_);
  } else {
    s = &fresh_session(peer, PakeRole::Responder, std::nullopt, ConfirmMode::Direct, std::nullopt, false, public_key_);
  }

  s->record.conversation_id = env.conversation_id;
  s->record.has_conversation = true;
  s->record.updated_at = clock_();
  s->peer_flow = std::move(flow);
  s->seen.insert(env.flow_type);

  HandleResult res;
  res.peer = peer;
  if (s->secret) res.outbound = respond(*s);
  return res;
}

HandleResult SessionManager::on_second_flow(Session& s, const Envelope& env)
{
  const std::string& peer = env.sender_identity;
  if (s.record.role != PakeRole::Initiator || s.record.phase != SessionPhase::FlowSent) {
    return refused(peer, "unexpected second flow");
  }
  std::optional<FlowMessage> parsed;
  try {
    parsed = FlowMessage::parse(env.payload, params_.group());
  } catch (const ProtocolError& e) {
    return refused(peer, e.what());
  }
  FlowMessage& flow = *parsed;
  if (flow.identity != peer) return refused(peer, "flow identity does not match the sender");

  RawSharedSecret sk;
  try {
    sk = pake_finish(*s.ephemeral, flow);
  } catch (const ProtocolError& e) {
    return refused(peer, e.what());
  }
  set_phase(s, SessionPhase::FlowReceived);
  s.ephemeral.reset();
  Fingerprint own_fpr = fingerprint_of(s.own_pk);
  Fingerprint peer_fpr = fingerprint_of(s.expected_peer_pk ? ByteView(*s.expected_peer_pk) : ByteView(flow.pk));
  SessionId sid = compute_sid(*s.own_flow, flow);
  s.kc.emplace(sk, PakeRole::Initiator, s.record.mode, own_fpr, peer_fpr, sid);
  s.record.session_id = sid;
  s.record.peer_fingerprint = peer_fpr;
  s.peer_flow = std::move(flow);
  s.seen.insert(FlowType::Flow2);
  wipe_secret(s.secret);
  set_phase(s, SessionPhase::AwaitTag);

  HandleResult res;
  res.peer = peer;
  res.outbound.push_back(envelope(s, FlowType::TagA, s.kc->own_tag().serialize()));
  if (s.buffered_tag) {
    ConfirmationTag tag = std::move(*s.buffered_tag);
    s.buffered_tag.reset();
    res.outcome = verify(s, tag);
  }
  return res;
}

HandleResult SessionManager::on_tag(Session& s, const Envelope& env)
{
  const std::string& peer = env.sender_identity;
  const bool initiator = s.record.role == PakeRole::Initiator;
  const FlowType wanted = initiator ? FlowType::TagB : FlowType::TagA;
  if (env.flow_type != wanted) return refused(peer, "tag from the wrong direction");
  ConfirmationTag tag;
  try {
    tag = ConfirmationTag::parse(env.payload);
  } catch (const ProtocolError& e) {
    return refused(peer, e.what());
  }
  if (tag.direction != (initiator ? TagDirection::FromB : TagDirection::FromA)) {
    return refused(peer, "tag direction does not match its envelope");
  }

  HandleResult res;
  res.peer = peer;
  if (s.kc) {
    s.seen.insert(env.flow_type);
    res.outcome = verify(s, tag);
  } else if (initiator && s.record.phase == SessionPhase::FlowSent) {
    // The responder sends its tag right behind its flow; tolerate reordering.
    s.seen.insert(env.flow_type);
    s.buffered_tag = std::move(tag);
    s.record.updated_at = clock_();
  } else {
    return refused(peer, "tag before the key exchange completed");
  }
  return res;
}

std::optional<SessionOutcome> SessionManager::verify(Session& s, const ConfirmationTag& tag)
{
  ConfirmResult r = s.kc->verify_peer(tag);
  s.kc.reset();
  const std::uint64_t now = clock_();
  const std::string& peer = s.record.peer_identity;
  if (r.outcome == ConfirmOutcome::Accepted) {
    s.record.established_key = std::move(r.keys);
    const Fingerprint& fpr = *s.record.peer_fingerprint;
    if (s.record.renewal) {
      store_.record_renewal(peer, fpr, s.record.established_key->session_key.view(), now);
      if (s.record.role == PakeRole::Initiator) public_key_ = s.own_pk;
    } else {
      store_.record_authenticated(peer, fpr, s.record.established_key->session_key.view(), now);
    }
    finish(s);
    set_phase(s, SessionPhase::Accepted, SessionOutcome::Accepted);
    return SessionOutcome::Accepted;
  }
  if (s.record.renewal) {
    store_.record_incident(peer, "renewal key confirmation failed", now);
  } else {
    store_.record_failure(peer, now);
  }
  finish(s);
  set_phase(s, SessionPhase::Aborted, SessionOutcome::AuthenticationFailed);
  return SessionOutcome::AuthenticationFailed;
}

std::vector<std::string> SessionManager::expire()
{
  const std::uint64_t now = clock_();
  std::vector<std::string> out;
  for (auto& [peer, s] : sessions_) {
    if (s->record.terminal() || now - s->record.updated_at < timeout_) continue;
    finish(*s);
    set_phase(*s, SessionPhase::Aborted, SessionOutcome::Timeout);
    out.push_back(peer);
  }
  return out;
}

const SessionRecord* SessionManager::session(const std::string& peer) const
{
  auto it = sessions_.find(peer);
  return it == sessions_.end() ? nullptr : &it->second->record;
}

bool SessionManager::has_active_session(const std::string& peer) const
{
  const SessionRecord* r = session(peer);
  return r != nullptr && !r->terminal();
}

std::vector<std::string> SessionManager::known_peers() const
{
  std::vector<std::string> out;
  for (const auto& [peer, _] : sessions_) out.push_back(peer);
  return out;
}

std::vector<std::string> SessionManager::active_peers() const
{
  std::vector<std::string> out;
  for (const auto& [peer, s] : sessions_) {
    if (!s->record.terminal()) out.push_back(peer);
  }
  return out;
}

void SessionManager::drop_session(const std::string& peer)
{
  auto it = sessions_.find(peer);
  if (it == sessions_.end()) return;
  if (it->second->record.has_conversation) closed_.insert(it->second->record.conversation_id);
  sessions_.erase(it);
}

}  // namespace authkit
