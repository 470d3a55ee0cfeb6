#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "authkit/crypto.hpp"
#include "authkit/envelope.hpp"
#include "authkit/session.hpp"
#include "authkit/trust_store.hpp"

namespace authkit::sim {

/// An envelope on the wire between two named endpoints.
struct InFlight {
  std::string from;
  std::string to;
  Envelope env;
};

struct TraceEvent {
  enum class Kind : std::uint8_t { Send, Deliver, Drop, Modify, Inject, Transition, Refused, Note };
  std::uint64_t tick = 0;
  Kind kind = Kind::Note;
  std::string text;
  /// Encoded envelope for wire events, empty otherwise.
  Bytes wire;
};
const char* to_string(TraceEvent::Kind k);

struct Trace {
  std::vector<TraceEvent> events;
  /// One line per event; byte-identical across reruns with the same seed.
  std::string serialize() const;
  /// Every envelope that crossed the wire, encoded.
  std::vector<Bytes> wire_images() const;
};

/// Per-link policy applied to whatever the adversary lets through.
struct LinkRule {
  enum class Action : std::uint8_t { Deliver, Drop, Delay, Modify };
  std::string from = "*";
  std::string to = "*";
  std::optional<FlowType> flow;
  Action action = Action::Deliver;
  std::uint64_t delay = 0;
  /// Payload byte to flip for Modify (taken modulo the payload size).
  std::size_t flip_offset = 0;
  /// Remaining applications; unset means unlimited.
  std::optional<std::uint32_t> limit;

  bool matches(const InFlight& m) const;
};

class Fabric;

/// Dolev-Yao network attacker: sees and rewrites envelopes in transit and
/// may run the honest protocol under any identity, nothing more.
class Adversary {
public:
  virtual ~Adversary() = default;
  /// Called for every envelope sent by an honest party. Returns what goes on.
  virtual std::vector<InFlight> intercept(const InFlight& msg, Fabric& net) = 0;
  /// Called when the network goes quiet and sessions are expired.
  virtual void expire(Fabric&) {}
  /// Candidate passwords confirmed or eliminated so far.
  virtual std::uint64_t candidates_tested() const { return 0; }
  /// Her sessions with honest parties that got as far as holding keys.
  virtual std::uint64_t sessions_completed() const { return 0; }
  virtual bool active() const { return false; }
};

/// Simulated honest endpoint.
struct Party {
  std::string name;
  Bytes public_key;
  DeterministicRandom rng;
  PeerTrustStore store;
  std::unique_ptr<SessionManager> manager;
  /// Entered whenever a peer's first flow asks for it.
  std::optional<SecretInput> respond_secret;
  ConfirmMode respond_mode = ConfirmMode::Direct;
  /// Secrets typed by the simulated user, initial or answering.
  std::uint64_t prompts = 0;

  Party(std::string name, DeterministicRandom rng);
};

/// Deterministic discrete-event network. Every hop costs one tick; when
/// nothing is in flight the clock jumps by the session timeout and all
/// sessions are expired.
class Fabric {
public:
  Fabric(const PublicParams& params, std::uint64_t seed, std::uint64_t timeout = 16);
  ~Fabric();
  Fabric(const Fabric&) = delete;
  Fabric& operator=(const Fabric&) = delete;

  Party& add_party(const std::string& name, std::optional<SecretInput> respond_secret = std::nullopt,
                   ConfirmMode mode = ConfirmMode::Direct);
  Party& party(const std::string& name);
  bool has_party(const std::string& name) const { return parties_.count(name) != 0; }
  const PublicParams& params() const { return params_; }

  void add_rule(LinkRule rule) { rules_.push_back(rule); }
  /// Non-owning; the adversary must outlive run().
  void set_adversary(Adversary* adv) { adversary_ = adv; }

  /// The user at `from` starts authenticating `to` with `secret` (one prompt).
  /// Embedded mode takes the peer's key from the fabric's directory.
  void start(const std::string& from, const std::string& to, SecretInput secret,
             ConfirmMode mode = ConfirmMode::Direct);
  void renew(const std::string& from, const std::string& to, std::optional<Bytes> new_pk = std::nullopt);

  /// Honest send: through the adversary, then the link rules.
  void send(const InFlight& msg);
  /// Adversarial send: bypasses the adversary hook but not the link rules.
  void inject(const InFlight& msg, std::uint64_t delay = 0);

  /// Runs until quiet and every session has ended, or `max_ticks` elapse.
  /// Returns false on the deadline (partial trace kept).
  bool run(std::uint64_t max_ticks = 100000);

  std::uint64_t now() const { return now_; }
  std::uint64_t timeout() const { return timeout_; }
  const SessionManager::Clock& clock() const { return clock_; }
  Trace& trace() { return trace_; }
  DeterministicRandom& rng() { return rng_; }
  void note(std::string text);
  TransitionObserver observer();
  /// Tag verifications performed by honest parties so far.
  std::uint64_t honest_tag_checks() const { return honest_tag_checks_; }

private:
  struct Pending {
    std::uint64_t at;
    std::uint64_t seq;
    InFlight msg;
    bool operator>(const Pending& o) const { return at != o.at ? at > o.at : seq > o.seq; }
  };

  void route(InFlight msg, std::uint64_t extra_delay);
  void deliver(const InFlight& msg);
  void record(TraceEvent::Kind kind, std::string text, const Envelope* env = nullptr);
  bool any_active() const;

  const PublicParams& params_;
  DeterministicRandom rng_;
  std::uint64_t timeout_;
  std::uint64_t now_ = 0;
  std::uint64_t seq_ = 0;
  SessionManager::Clock clock_;
  std::map<std::string, std::unique_ptr<Party>> parties_;
  std::vector<LinkRule> rules_;
  Adversary* adversary_ = nullptr;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue_;
  Trace trace_;
  std::uint64_t honest_tag_checks_ = 0;
};

/// Full key substitution between `alice` and `bob`: Mallory answers each of
/// them under the other's name, with her own key and one password guess.
class MitmAdversary : public Adversary {
public:
  MitmAdversary(Fabric& net, std::string alice, std::string bob, SecretInput guess, Bytes mallory_pk);
  ~MitmAdversary() override;

  std::vector<InFlight> intercept(const InFlight& msg, Fabric& net) override;
  void expire(Fabric& net) override;
  std::uint64_t candidates_tested() const override { return tests_; }
  std::uint64_t sessions_completed() const override { return keyed_; }
  bool active() const override;

private:
  std::vector<InFlight> feed(SessionManager& m, const std::string& honest, const Envelope& env, Fabric& net);

  std::string alice_;
  std::string bob_;
  SecretInput guess_;
  Bytes mallory_pk_;
  DeterministicRandom rng_;
  PeerTrustStore store_a_;
  PeerTrustStore store_b_;
  /// Talks to alice posing as bob, and to bob posing as alice.
  std::unique_ptr<SessionManager> as_bob_;
  std::unique_ptr<SessionManager> as_alice_;
  bool relayed_ = false;
  std::uint64_t tests_ = 0;
  std::uint64_t keyed_ = 0;
};

/// Online guess against `victim`, posing as `claimed`: completes the run,
/// checks the victim's tag with her own keys, and on a mismatch drops her
/// final tag so the victim only sees silence.
class GuessAndAbortAdversary : public Adversary {
public:
  GuessAndAbortAdversary(Fabric& net, std::string claimed, std::string victim);
  ~GuessAndAbortAdversary() override;

  /// Opens one session testing `guess`.
  void attempt(Fabric& net, SecretInput guess);

  std::vector<InFlight> intercept(const InFlight& msg, Fabric& net) override;
  void expire(Fabric& net) override;
  std::uint64_t candidates_tested() const override { return tests_; }
  std::uint64_t sessions_completed() const override { return keyed_; }
  bool active() const override;

  /// Set once a guess was confirmed.
  bool learned() const { return learned_; }
  /// Key shared with the victim after a correct guess.
  const std::optional<KeyBundle>& stolen_key() const { return stolen_key_; }

private:
  std::string claimed_;
  std::string victim_;
  DeterministicRandom rng_;
  PeerTrustStore store_;
  std::unique_ptr<SessionManager> self_;
  /// Our own tag, withheld until the victim's tag has been checked.
  std::vector<Envelope> held_;
  bool learned_ = false;
  std::uint64_t tests_ = 0;
  std::uint64_t keyed_ = 0;
  std::optional<KeyBundle> stolen_key_;
};

struct GuessAndAbortResult {
  bool learned = false;
  std::optional<SessionOutcome> victim_outcome;
  std::uint32_t victim_failed_attempts = 0;
  std::uint64_t candidates_tested = 0;
  /// KeyConfirmation checks run by the victim during the attempt.
  std::uint64_t victim_tag_checks = 0;
  bool adversary_key_matches_victim = false;
};

/// One session: Mallory claims `claimed`'s name and tests `guess` against
/// a `victim` that answers with `victim_secret`.
GuessAndAbortResult guess_and_abort(const PublicParams& params, const SecretInput& victim_secret,
                                    const SecretInput& guess, std::uint64_t seed);

struct MitmResult {
  std::optional<SessionOutcome> alice;
  std::optional<SessionOutcome> bob;
  std::uint64_t candidates_tested = 0;
  /// What alice now trusts as bob's key.
  std::optional<Fingerprint> alice_view_of_bob;
};

MitmResult mitm_key_substitution(const PublicParams& params, const SecretInput& honest_secret,
                                 const SecretInput& guess, std::uint64_t seed);

/// For every candidate password scalar c in [0, q): how many coins x satisfy
/// g^x * B^c == blinded, where B is the sender role's blinding point.
/// Small groups only (q < 2^16); throws UsageError otherwise.
std::vector<std::uint64_t> consistent_coin_counts(const PublicParams& params, PakeRole sender,
                                                  const GroupElement& blinded);

/// Every (image index, needle index) pair where the needle occurs inside the
/// image. Needles shorter than 8 bytes are skipped since they match by chance.
std::vector<std::pair<std::size_t, std::size_t>> scan_for_secrets(const std::vector<Bytes>& wire,
                                                                 const std::vector<Bytes>& needles);

}  // namespace authkit::sim
