#include "authkit/adversary.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "authkit/errors.hpp"

namespace authkit::sim {

const char* to_string(TraceEvent::Kind k)
{
  switch (k) {
    case TraceEvent::Kind::Send: return "send";
    case TraceEvent::Kind::Deliver: return "deliver";
    case TraceEvent::Kind::Drop: return "drop";
    case TraceEvent::Kind::Modify: return "modify";
    case TraceEvent::Kind::Inject: return "inject";
    case TraceEvent::Kind::Transition: return "state";
    case TraceEvent::Kind::Refused: return "refused";
    case TraceEvent::Kind::Note: return "note";
  }
  return "?";
}

std::string Trace::serialize() const
{
  std::ostringstream out;
  for (const auto& e : events) {
    out << e.tick << ' ' << to_string(e.kind) << ' ' << e.text;
    if (!e.wire.empty()) out << ' ' << to_hex(e.wire);
    out << '\n';
  }
  return out.str();
}

std::vector<Bytes> Trace::wire_images() const
{
  std::vector<Bytes> out;
  for (const auto& e : events) {
    if (!e.wire.empty()) out.push_back(e.wire);
  }
  return out;
}

bool LinkRule::matches(const InFlight& m) const
{
  if (limit && *limit == 0) return false;
  if (from != "*" && from != m.from) return false;
  if (to != "*" && to != m.to) return false;
  return !flow || *flow == m.env.flow_type;
}

Party::Party(std::string n, DeterministicRandom r) : name(std::move(n)), rng(std::move(r)) {}

Fabric::Fabric(const PublicParams& params, std::uint64_t seed, std::uint64_t timeout)
    : params_(params), rng_(seed), timeout_(timeout), clock_([this] { return now_; })
{
  if (timeout_ == 0) throw ValidationError("timeout must be positive");
}

Fabric::~Fabric() = default;

Party& Fabric::add_party(const std::string& name, std::optional<SecretInput> respond_secret, ConfirmMode mode)
{
  if (has_party(name)) throw ValidationError("duplicate party " + name);
  auto p = std::make_unique<Party>(name, rng_.fork("party/" + name));
  p->public_key = rng_.fork("pk/" + name).bytes(32);
  p->manager = std::make_unique<SessionManager>(params_, name, p->public_key, p->store, p->rng, clock_, timeout_);
  p->manager->set_observer(observer());
  p->respond_secret = std::move(respond_secret);
  p->respond_mode = mode;
  Party& ref = *p;
  parties_[name] = std::move(p);
  return ref;
}

Party& Fabric::party(const std::string& name)
{
  auto it = parties_.find(name);
  if (it == parties_.end()) throw ValidationError("unknown party " + name);
  return *it->second;
}

void Fabric::record(TraceEvent::Kind kind, std::string text, const Envelope* env)
{
  TraceEvent e;
  e.tick = now_;
  e.kind = kind;
  e.text = std::move(text);
  if (env != nullptr) {
    try {
      e.wire = encode_envelope(*env);
    } catch (const ValidationError&) {
      e.text += " (unencodable)";
    }
  }
  trace_.events.push_back(std::move(e));
}

void Fabric::note(std::string text)
{
  record(TraceEvent::Kind::Note, std::move(text));
}

TransitionObserver Fabric::observer()
{
  return [this](const Transition& t) {
    if (t.outcome == SessionOutcome::Accepted || t.outcome == SessionOutcome::AuthenticationFailed) {
      ++honest_tag_checks_;
    }
    std::string text = t.owner + "[" + t.peer + "] " + to_string(t.from) + "->" + to_string(t.to);
    if (t.outcome) text += std::string(" ") + to_string(*t.outcome);
    record(TraceEvent::Kind::Transition, std::move(text));
  };
}

namespace {
std::string hop(const InFlight& m)
{
  return m.from + "->" + m.to + " " + to_string(m.env.flow_type);
}
}  // namespace

void Fabric::start(const std::string& from, const std::string& to, SecretInput secret, ConfirmMode mode)
{
  Party& p = party(from);
  std::optional<Bytes> expected;
  if (mode == ConfirmMode::Embedded && has_party(to)) expected = party(to).public_key;
  ++p.prompts;
  Envelope e = p.manager->start_session(to, std::move(secret), mode, std::move(expected));
  send({from, to, std::move(e)});
}

void Fabric::renew(const std::string& from, const std::string& to, std::optional<Bytes> new_pk)
{
  Envelope e = party(from).manager->renew_chain(to, std::move(new_pk));
  send({from, to, std::move(e)});
}

void Fabric::send(const InFlight& msg)
{
  record(TraceEvent::Kind::Send, hop(msg), &msg.env);
  if (adversary_ == nullptr) {
    route(msg, 0);
    return;
  }
  for (auto& out : adversary_->intercept(msg, *this)) route(std::move(out), 0);
}

void Fabric::inject(const InFlight& msg, std::uint64_t delay)
{
  record(TraceEvent::Kind::Inject, hop(msg), &msg.env);
  route(msg, delay);
}

void Fabric::route(InFlight msg, std::uint64_t extra_delay)
{
  for (auto& rule : rules_) {
    if (!rule.matches(msg)) continue;
    if (rule.limit) --*rule.limit;
    switch (rule.action) {
      case LinkRule::Action::Drop:
        record(TraceEvent::Kind::Drop, hop(msg), &msg.env);
        return;
      case LinkRule::Action::Delay:
        extra_delay += rule.delay;
        break;
      case LinkRule::Action::Modify:
        if (!msg.env.payload.empty()) msg.env.payload[rule.flip_offset % msg.env.payload.size()] ^= 0x01;
        record(TraceEvent::Kind::Modify, hop(msg), &msg.env);
        break;
      case LinkRule::Action::Deliver:
        break;
    }
    break;
  }
  queue_.push(Pending{now_ + 1 + extra_delay, seq_++, std::move(msg)});
}

void Fabric::deliver(const InFlight& msg)
{
  if (!has_party(msg.to)) {
    record(TraceEvent::Kind::Drop, hop(msg) + " (no such endpoint)", &msg.env);
    return;
  }
  record(TraceEvent::Kind::Deliver, hop(msg), &msg.env);
  Party& p = party(msg.to);
  HandleResult r = p.manager->handle_envelope(msg.env);
  if (r.violation) record(TraceEvent::Kind::Refused, p.name + ": " + *r.violation);
  std::vector<Envelope> out = std::move(r.outbound);
  const SessionRecord* rec = p.manager->session(r.peer);
  const bool waiting = rec != nullptr && rec->phase == SessionPhase::AwaitSecret && rec->has_conversation;
  if (!r.ignored && !r.violation && out.empty() && waiting && p.respond_secret) {
    std::optional<Bytes> expected;
    if (p.respond_mode == ConfirmMode::Embedded && has_party(r.peer)) expected = party(r.peer).public_key;
    ++p.prompts;
    try {
      out = p.manager->provide_secret(r.peer, *p.respond_secret, p.respond_mode, std::move(expected));
    } catch (const Error& e) {
      record(TraceEvent::Kind::Refused, p.name + ": " + e.what());
    }
  }
  for (auto& e : out) send({p.name, r.peer, std::move(e)});
}

bool Fabric::any_active() const
{
  for (const auto& [_, p] : parties_) {
    if (!p->manager->active_peers().empty()) return true;
  }
  return adversary_ != nullptr && adversary_->active();
}

bool Fabric::run(std::uint64_t max_ticks)
{
  const std::uint64_t deadline = now_ + max_ticks;
  for (;;) {
    if (!queue_.empty()) {
      Pending next = queue_.top();
      if (next.at > deadline) {
        note("deadline reached with messages in flight");
        return false;
      }
      queue_.pop();
      now_ = std::max(now_, next.at);
      deliver(next.msg);
      continue;
    }
    if (!any_active()) return true;
    now_ += timeout_;
    if (now_ > deadline) {
      note("deadline reached with sessions open");
      return false;
    }
    for (auto& [_, p] : parties_) p->manager->expire();
    if (adversary_ != nullptr) adversary_->expire(*this);
  }
}

// ---------------------------------------------------------------------------

MitmAdversary::MitmAdversary(Fabric& net, std::string alice, std::string bob, SecretInput guess, Bytes mallory_pk)
    : alice_(std::move(alice)), bob_(std::move(bob)), guess_(std::move(guess)), mallory_pk_(std::move(mallory_pk)),
      rng_(net.rng().fork("mallory"))
{
  // Her own failed confirmations are information, not a reason to stop.
  store_a_.set_max_attempts(std::numeric_limits<std::uint32_t>::max());
  store_b_.set_max_attempts(std::numeric_limits<std::uint32_t>::max());
  as_bob_ = std::make_unique<SessionManager>(net.params(), bob_, mallory_pk_, store_a_, rng_, net.clock(),
                                             net.timeout());
  as_alice_ = std::make_unique<SessionManager>(net.params(), alice_, mallory_pk_, store_b_, rng_, net.clock(),
                                               net.timeout());
  auto count = [this](const Transition& t) {
    if (t.to == SessionPhase::AwaitTag) ++keyed_;
  };
  as_bob_->set_observer(count);
  as_alice_->set_observer(count);
}

MitmAdversary::~MitmAdversary() = default;

std::vector<InFlight> MitmAdversary::feed(SessionManager& m, const std::string& honest, const Envelope& env,
                                          Fabric& net)
{
  HandleResult r = m.handle_envelope(env);
  if (r.outcome == SessionOutcome::Accepted || r.outcome == SessionOutcome::AuthenticationFailed) {
    ++tests_;
    net.note("mallory as " + m.identity() + " checked a guess against " + honest + ": " + to_string(*r.outcome));
  }
  std::vector<InFlight> out;
  for (auto& e : r.outbound) out.push_back({m.identity(), honest, std::move(e)});
  return out;
}

std::vector<InFlight> MitmAdversary::intercept(const InFlight& msg, Fabric& net)
{
  if (msg.from == alice_ && msg.to == bob_) {
    std::vector<InFlight> out;
    if (msg.env.flow_type == FlowType::Flow1 && !relayed_) {
      relayed_ = true;
      as_bob_->provide_secret(alice_, guess_, ConfirmMode::Direct);
      out = feed(*as_bob_, alice_, msg.env, net);
      Envelope own = as_alice_->start_session(bob_, guess_, ConfirmMode::Direct);
      out.push_back({alice_, bob_, std::move(own)});
      return out;
    }
    return feed(*as_bob_, alice_, msg.env, net);
  }
  if (msg.from == bob_ && msg.to == alice_) return feed(*as_alice_, bob_, msg.env, net);
  return {msg};
}

void MitmAdversary::expire(Fabric&)
{
  as_bob_->expire();
  as_alice_->expire();
}

bool MitmAdversary::active() const
{
  return !as_bob_->active_peers().empty() || !as_alice_->active_peers().empty();
}

// ---------------------------------------------------------------------------

GuessAndAbortAdversary::GuessAndAbortAdversary(Fabric& net, std::string claimed, std::string victim)
    : claimed_(std::move(claimed)), victim_(std::move(victim)), rng_(net.rng().fork("mallory"))
{
  store_.set_max_attempts(std::numeric_limits<std::uint32_t>::max());
  Bytes pk = rng_.bytes(32);
  self_ = std::make_unique<SessionManager>(net.params(), claimed_, std::move(pk), store_, rng_, net.clock(),
                                           net.timeout());
  self_->set_observer([this](const Transition& t) {
    if (t.to == SessionPhase::AwaitTag) ++keyed_;
  });
}

GuessAndAbortAdversary::~GuessAndAbortAdversary() = default;

void GuessAndAbortAdversary::attempt(Fabric& net, SecretInput guess)
{
  self_->drop_session(victim_);
  held_.clear();
  Envelope e = self_->start_session(victim_, std::move(guess), ConfirmMode::Direct);
  net.inject({claimed_, victim_, std::move(e)});
}

std::vector<InFlight> GuessAndAbortAdversary::intercept(const InFlight& msg, Fabric& net)
{
  if (msg.from != victim_ || msg.to != claimed_) return {msg};
  HandleResult r = self_->handle_envelope(msg.env);
  for (auto& e : r.outbound) held_.push_back(std::move(e));
  if (!r.outcome) return {};
  std::vector<InFlight> out;
  if (r.outcome == SessionOutcome::Accepted || r.outcome == SessionOutcome::AuthenticationFailed) {
    ++tests_;
    net.note(std::string("mallory checked a guess against ") + victim_ + ": " + to_string(*r.outcome));
  }
  if (r.outcome == SessionOutcome::Accepted) {
    learned_ = true;
    stolen_key_ = self_->session(victim_)->established_key;
    for (auto& e : held_) out.push_back({claimed_, victim_, std::move(e)});
  } else {
    net.note("mallory drops her tag");
  }
  held_.clear();
  return out;
}

void GuessAndAbortAdversary::expire(Fabric&)
{
  self_->expire();
}

bool GuessAndAbortAdversary::active() const
{
  return !self_->active_peers().empty();
}

// ---------------------------------------------------------------------------

GuessAndAbortResult guess_and_abort(const PublicParams& params, const SecretInput& victim_secret,
                                    const SecretInput& guess, std::uint64_t seed)
{
  Fabric net(params, seed);
  Party& victim = net.add_party("bob", victim_secret);
  GuessAndAbortAdversary mallory(net, "alice", "bob");
  net.set_adversary(&mallory);
  const std::uint64_t checks_before = tag_verification_count();
  mallory.attempt(net, guess);
  net.run();

  GuessAndAbortResult res;
  res.learned = mallory.learned();
  res.candidates_tested = mallory.candidates_tested();
  res.victim_tag_checks = tag_verification_count() - checks_before - mallory.candidates_tested();
  const SessionRecord* rec = victim.manager->session("alice");
  if (rec != nullptr) {
    res.victim_outcome = rec->outcome;
    res.victim_failed_attempts = rec->failed_attempts;
    res.adversary_key_matches_victim = mallory.stolen_key() && rec->established_key &&
                                       mallory.stolen_key()->session_key == rec->established_key->session_key;
  }
  return res;
}

MitmResult mitm_key_substitution(const PublicParams& params, const SecretInput& honest_secret,
                                 const SecretInput& guess, std::uint64_t seed)
{
  Fabric net(params, seed);
  Party& alice = net.add_party("alice");
  Party& bob = net.add_party("bob", honest_secret);
  Bytes mallory_pk = net.rng().fork("mallory-pk").bytes(32);
  MitmAdversary mallory(net, "alice", "bob", guess, mallory_pk);
  net.set_adversary(&mallory);
  net.start("alice", "bob", honest_secret);
  net.run();

  MitmResult res;
  if (const SessionRecord* r = alice.manager->session("bob")) res.alice = r->outcome;
  if (const SessionRecord* r = bob.manager->session("alice")) res.bob = r->outcome;
  res.candidates_tested = mallory.candidates_tested();
  if (auto entry = alice.store.lookup("bob")) res.alice_view_of_bob = entry->fingerprint;
  return res;
}

std::vector<std::uint64_t> consistent_coin_counts(const PublicParams& params, PakeRole sender,
                                                  const GroupElement& blinded)
{
  const Group& g = params.group();
  Bytes order = g.order();
  if (order.size() > 2) throw UsageError("exhaustive coin search needs a group of order below 2^16");
  std::uint64_t q = 0;
  for (std::uint8_t b : order) q = q << 8 | b;
  const GroupElement& point = sender == PakeRole::Initiator ? params.m : params.n;

  std::vector<GroupElement> coins;
  coins.reserve(q);
  for (std::uint64_t x = 0; x < q; ++x) coins.push_back(g.g_pow(g.scalar(x)));
  std::vector<std::uint64_t> counts(q, 0);
  for (std::uint64_t c = 0; c < q; ++c) {
    GroupElement mask = g.pow(point, g.scalar(c));
    for (const auto& gx : coins) {
      if (g.mul(gx, mask) == blinded) ++counts[c];
    }
  }
  return counts;
}

std::vector<std::pair<std::size_t, std::size_t>> scan_for_secrets(const std::vector<Bytes>& wire,
                                                                 const std::vector<Bytes>& needles)
{
  std::vector<std::pair<std::size_t, std::size_t>> hits;
  for (std::size_t i = 0; i < wire.size(); ++i) {
    for (std::size_t j = 0; j < needles.size(); ++j) {
      const Bytes& n = needles[j];
      if (n.size() < 8) continue;
      if (std::search(wire[i].begin(), wire[i].end(), n.begin(), n.end()) != wire[i].end()) hits.emplace_back(i, j);
    }
  }
  return hits;
}

}  // namespace authkit::sim
