// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <thread>

#include <sys/wait.h>
#include <unistd.h>

#include "authkit/adversary.hpp"
#include "authkit/attack_lab.hpp"
#include "authkit/envelope.hpp"
#include "authkit/relay.hpp"
#include "authkit/trustwords.hpp"
#include "support.hpp"

using namespace authkit;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  /// Records the first failing condition only, to keep the line short.
  void require(bool ok, const std::string& what)
  {
    if (!ok && pass) {
      pass = false;
      detail << "FAILED: " << what << "; ";
    }
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double ms_since(Clock::time_point t0)
{
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

PasswordScalar pw(std::uint64_t v) { return {tiny23().scalar(v), SecretSource::Direct}; }

PublicParams tiny_unguarded()
{
  PublicParams p = PublicParams::derive(tiny23());
  p.identity_guard = false;
  return p;
}

// --- 1 ----------------------------------------------------------------------

void case_study(Verdict& v)
{
  auto t0 = Clock::now();
  attack::AttackEstimate a = attack::attack_effort(attack::AttackParams::from_bits(80, 16, 32), 0.5);
  attack::AttackEstimate b = attack::attack_effort(attack::AttackParams::from_bits(80, 16, 16), 0.5);
  double dt = seconds_since(t0);
  v.require(a.feasible && a.log2_e >= 37 && a.log2_e <= 39, "u=32 log2_e outside [37, 39]");
  v.require(b.feasible && b.log2_e >= 31 && b.log2_e <= 33, "u=16 log2_e outside [31, 33]");
  v.require(dt < 1.0, "slower than 1 s");
  char buf[160];
  std::snprintf(buf, sizeof buf, "log2_e = %.3f (u=32), %.3f (u=16) in %.3f s", a.log2_e, b.log2_e, dt);
  v.detail << buf;
}

// --- 2 ----------------------------------------------------------------------

void oracle_equivalence(Verdict& v)
{
  auto t0 = Clock::now();
  testing::Gen gen(2);
  std::uint64_t partitions = 0;
  for (unsigned b = 1; b <= 16; ++b) {
    for (unsigned r = 0; 2 * r <= b; ++r) {
      for (unsigned u = 0; u <= b - 2 * r; ++u) {
        attack::AttackParams p = attack::AttackParams::from_bits(b, r, u);
        auto target = static_cast<std::uint32_t>(gen.next());
        std::uint64_t enumerated = attack::oracle_enumerate(p, target);
        attack::BigInt closed = attack::count_partial_preimages(p);
        v.require(attack::BigInt(enumerated) == closed,
                  "b=" + std::to_string(b) + " r=" + std::to_string(r) + " u=" + std::to_string(u));
        ++partitions;
      }
    }
  }
  double dt = seconds_since(t0);
  v.require(dt < 300, "slower than 5 min");
  v.detail << partitions << " partitions, enumeration equals closed form, " << dt << " s";
}

// --- 3 ----------------------------------------------------------------------

/// One full run with fixed coins; returns both confirmation outcomes and
/// whether the raw keys matched.
struct FixedRun {
  bool sk_equal;
  ConfirmOutcome a;
  ConfirmOutcome b;
  bool keys_equal;
};

FixedRun fixed_run(const PublicParams& p, std::uint64_t pa, std::uint64_t pb, std::uint64_t x, std::uint64_t y)
{
  const Group& g = p.group();
  Bytes pka{0xa}, pkb{0xb};
  PakeStart a = pake_start_with_coin(p, PakeRole::Initiator, pw(pa), "alice", pka, g.scalar(x));
  PakeStart b = pake_start_with_coin(p, PakeRole::Responder, pw(pb), "bob", pkb, g.scalar(y));
  RawSharedSecret ska = pake_finish(a.state, b.flow);
  RawSharedSecret skb = pake_finish(b.state, a.flow);
  SessionId sid = compute_sid(a.flow, b.flow);
  Fingerprint fa = fingerprint_of(pka), fb = fingerprint_of(pkb);
  KeyConfirmation ka(ska, PakeRole::Initiator, ConfirmMode::Direct, fa, fb, sid);
  KeyConfirmation kb(skb, PakeRole::Responder, ConfirmMode::Direct, fa, fb, sid);
  ConfirmResult ra = ka.verify_peer(kb.own_tag());
  ConfirmResult rb = kb.verify_peer(ka.own_tag());
  bool keys = ra.keys && rb.keys && ra.keys->session_key == rb.keys->session_key;
  return {ska.sk == skb.sk, ra.outcome, rb.outcome, keys};
}

void pake_exhaustive(Verdict& v)
{
  auto t0 = Clock::now();
  // Every coin, including the ones that blind to the identity, so the guard is off.
  PublicParams p = tiny_unguarded();
  std::uint64_t equal_runs = 0, unequal_runs = 0;
  for (std::uint64_t pa = 0; pa < 11; ++pa) {
    for (std::uint64_t pb = 0; pb < 11; ++pb) {
      for (std::uint64_t x = 0; x < 11; ++x) {
        for (std::uint64_t y = 0; y < 11; ++y) {
          FixedRun r = fixed_run(p, pa, pb, x, y);
          if (pa == pb) {
            ++equal_runs;
            v.require(r.sk_equal && r.keys_equal, "equal passwords gave different keys");
            v.require(r.a == ConfirmOutcome::Accepted && r.b == ConfirmOutcome::Accepted,
                      "equal passwords not accepted");
          } else {
            ++unequal_runs;
            v.require(r.a == ConfirmOutcome::AuthenticationFailed && r.b == ConfirmOutcome::AuthenticationFailed,
                      "unequal passwords accepted");
          }
        }
      }
    }
  }
  // With the guard on, identity-blinded coins are refused and every other run still agrees.
  PublicParams guarded = PublicParams::derive(tiny23());
  std::uint64_t refused = 0;
  for (std::uint64_t pi = 0; pi < 11; ++pi) {
    for (std::uint64_t x = 0; x < 11; ++x) {
      for (std::uint64_t y = 0; y < 11; ++y) {
        try {
          FixedRun r = fixed_run(guarded, pi, pi, x, y);
          v.require(r.a == ConfirmOutcome::Accepted && r.b == ConfirmOutcome::Accepted, "guarded run not accepted");
        } catch (const ProtocolError&) {
          ++refused;
        }
      }
    }
  }
  double dt = seconds_since(t0);
  v.require(dt < 60, "slower than 1 min");
  v.detail << equal_runs << " equal-password runs accepted, " << unequal_runs << " unequal runs aborted; guard on: "
           << refused << " identity-blinded runs refused; " << dt << " s";
}

// --- 4 ----------------------------------------------------------------------

void transcript_hiding(Verdict& v)
{
  auto t0 = Clock::now();
  PublicParams p = tiny_unguarded();
  const Group& g = tiny23();
  std::uint64_t transcripts = 0;
  for (PakeRole role : {PakeRole::Initiator, PakeRole::Responder}) {
    for (std::uint64_t pi = 0; pi < 11; ++pi) {
      for (std::uint64_t x = 0; x < 11; ++x) {
        PakeStart s = pake_start_with_coin(p, role, pw(pi), "x", {}, g.scalar(x));
        std::vector<std::uint64_t> counts = sim::consistent_coin_counts(p, role, s.flow.blinded);
        std::uint64_t ties = 0;
        for (auto c : counts) ties += c == 1;
        v.require(counts.size() == 11 && ties == 11, "a candidate was not explained by exactly one coin");
        ++transcripts;
      }
    }
  }
  double dt = seconds_since(t0);
  v.require(dt < 60, "slower than 1 min");
  v.detail << transcripts << " blinded values, each consistent with 11/11 passwords via one coin; " << dt << " s";
}

// --- 5 ----------------------------------------------------------------------

void mitm_detection(Verdict& v)
{
  auto t0 = Clock::now();
  PublicParams prod = PublicParams::derive(p256());
  int aborted = 0;
  testing::Gen gen(5);
  for (std::uint64_t trial = 0; trial < 1000; ++trial) {
    std::string honest = "secret-" + gen.word(12);
    std::string guess = "guess-" + gen.word(12);
    sim::MitmResult r = sim::mitm_key_substitution(prod, honest, guess, trial);
    bool a = r.alice == SessionOutcome::AuthenticationFailed || r.alice == SessionOutcome::Timeout;
    bool b = r.bob == SessionOutcome::AuthenticationFailed || r.bob == SessionOutcome::Timeout;
    aborted += a && b;
  }
  v.require(aborted == 1000, "a production-group substitution was accepted");

  PublicParams tiny = PublicParams::derive(tiny23());
  int accepted = 0;
  const std::uint64_t honest = 6;
  for (std::uint64_t guess = 0; guess < 11; ++guess) {
    sim::MitmResult r = sim::mitm_key_substitution(tiny, pw(honest), pw(guess), 500 + guess);
    bool acc = r.alice == SessionOutcome::Accepted && r.bob == SessionOutcome::Accepted;
    bool partial = r.alice == SessionOutcome::Accepted || r.bob == SessionOutcome::Accepted;
    v.require(acc == partial, "one side accepted alone");
    v.require(acc == (guess == honest), "wrong guess accepted or right guess rejected");
    accepted += acc;
  }
  v.require(accepted == 1, "tiny23 sweep did not accept exactly once");
  v.detail << "P-256: " << aborted << "/1000 aborted; tiny23: " << accepted << "/11 guesses accepted; "
           << seconds_since(t0) << " s";
}

// --- 6 ----------------------------------------------------------------------

void guess_and_abort(Verdict& v)
{
  PublicParams prod = PublicParams::derive(p256());
  sim::GuessAndAbortResult wrong = sim::guess_and_abort(prod, std::string("the real one"), std::string("nope"), 1);
  v.require(!wrong.learned, "wrong guess reported as learned");
  v.require(wrong.victim_outcome == SessionOutcome::Timeout, "victim not in timeout");
  v.require(wrong.victim_failed_attempts == 0, "victim counted a failed attempt");

  PublicParams tiny = PublicParams::derive(tiny23());
  std::uint64_t total_sessions = 0;
  for (std::uint64_t secret = 0; secret < 11; ++secret) {
    sim::Fabric net(tiny, 600 + secret);
    net.add_party("bob", pw(secret));
    sim::GuessAndAbortAdversary mallory(net, "alice", "bob");
    net.set_adversary(&mallory);
    std::uint64_t sessions = 0;
    for (std::uint64_t guess = 0; guess < 11 && !mallory.learned(); ++guess) {
      const std::uint64_t global0 = tag_verification_count();
      const std::uint64_t honest0 = net.honest_tag_checks();
      const std::uint64_t tested0 = mallory.candidates_tested();
      mallory.attempt(net, pw(guess));
      net.run();
      ++sessions;
      std::uint64_t adversary_checks = (tag_verification_count() - global0) - (net.honest_tag_checks() - honest0);
      v.require(adversary_checks == 1, "instrumented count is not one test per session");
      v.require(mallory.candidates_tested() - tested0 == 1, "adversary's own count is not one per session");
      const SessionRecord* rec = net.party("bob").manager->session("alice");
      if (!mallory.learned()) {
        v.require(rec && rec->outcome == SessionOutcome::Timeout, "victim did not time out");
      }
      auto entry = net.party("bob").store.lookup("alice");
      v.require(!entry || entry->failed_attempts == 0, "victim recorded a failed attempt");
    }
    v.require(mallory.learned() && sessions == secret + 1, "password not identified in the expected session");
    v.require(sessions <= 11, "more than 11 sessions");
    total_sessions += sessions;
  }
  v.detail << "wrong guess: victim TIMEOUT, failed_attempts 0; sweep: 11 passwords found in " << total_sessions
           << " sessions, exactly one candidate each";
}

// --- 7 ----------------------------------------------------------------------

void chaining(Verdict& v)
{
  PublicParams prod = PublicParams::derive(p256());
  sim::Fabric net(prod, 7);
  sim::Party& alice = net.add_party("alice");
  sim::Party& bob = net.add_party("bob", std::string("kitchen table"));
  net.start("alice", "bob", std::string("kitchen table"));
  net.run();
  v.require(alice.manager->session("bob")->outcome == SessionOutcome::Accepted, "initial run not accepted");
  const std::uint64_t prompts = alice.prompts + bob.prompts;
  std::vector<SecureBytes> keys{bob.store.lookup("alice")->chain_key};

  net.renew("alice", "bob");
  net.run();
  v.require(bob.manager->session("alice")->outcome == SessionOutcome::Accepted, "first renewal not accepted");
  keys.push_back(bob.store.lookup("alice")->chain_key);

  Bytes fresh = net.rng().fork("fresh-key").bytes(32);
  net.renew("alice", "bob", fresh);
  net.run();
  v.require(bob.manager->session("alice")->outcome == SessionOutcome::Accepted, "second renewal not accepted");
  keys.push_back(bob.store.lookup("alice")->chain_key);

  v.require(alice.prompts + bob.prompts == prompts, "renewal prompted the user");
  v.require(!(keys[0] == keys[1]) && !(keys[1] == keys[2]) && !(keys[0] == keys[2]), "chain keys repeat");
  auto entry = bob.store.lookup("alice");
  v.require(entry && entry->fingerprint == fingerprint_of(fresh), "store does not hold the newest fingerprint");
  v.require(entry && entry->chain_counter == 2 && entry->history.size() == 3, "renewal history incomplete");
  v.require(alice.store.lookup("bob")->chain_key == keys[2], "chain keys differ between the parties");
  v.detail << "3 runs, " << (alice.prompts + bob.prompts - prompts) << " renewal prompts, 3 distinct chain keys, "
           << "peer now " << entry->fingerprint->hex().substr(0, 16) << "...";
}

// --- 8 ----------------------------------------------------------------------

void trustword_properties(Verdict& v)
{
  Dictionary dict = Dictionary::hex_test();
  testing::Gen gen(8);
  std::uint64_t cases = 0;
  for (int i = 0; i < 20000; ++i) {
    Fingerprint a = Fingerprint::from_bytes(gen.bytes(20));
    Fingerprint b = Fingerprint::from_bytes(gen.bytes(20));
    TrustwordList ab = trustwords(a, b, dict);
    v.require(ab.words == trustwords(b, a, dict).words, "not symmetric");
    v.require(ab.words == trustwords(a, b, dict).words, "not deterministic");
    for (const auto& w : trustwords(a, a, dict).words) v.require(w == dict[0], "zero XOR not dict[0]");
    std::size_t bit = gen.below(160);
    Fingerprint c = b;
    c.bits[bit / 8] ^= static_cast<std::uint8_t>(0x80u >> (bit % 8));
    TrustwordList ac = trustwords(a, c, dict);
    for (std::size_t k = 0; k < 10; ++k) {
      v.require((ab.words[k] != ac.words[k]) == (k == bit / 16), "bit flip touched the wrong block");
    }
    TrustwordList five = trustwords(a, b, dict, 5);
    v.require(five.words.size() == 5 && std::equal(five.words.begin(), five.words.end(), ab.words.begin()),
              "five words not a prefix of ten");
    v.require((five.words != trustwords(a, c, dict, 5).words) == (bit < 80), "five words do not cover bits 0-79");
    ++cases;
  }
  v.detail << cases << " random pairs: symmetry, determinism, zero fixed point, block locality, 5-word prefix";
}

// --- 9 ----------------------------------------------------------------------

bool relay_kill_survives(const fs::path& dir)
{
  int fds[2];
  if (::pipe(fds) != 0) return false;
  pid_t child = ::fork();
  if (child < 0) return false;
  if (child == 0) {
    ::close(fds[0]);
    try {
      RelayConfig cfg;
      cfg.port = 0;
      cfg.dir = dir;
      RelayServer server(cfg);
      server.start();
      std::uint16_t port = server.port();
      (void)!::write(fds[1], &port, sizeof port);
      for (;;) ::pause();
    } catch (...) {
      ::_exit(1);
    }
  }
  ::close(fds[1]);
  std::uint16_t port = 0;
  bool ok = ::read(fds[0], &port, sizeof port) == static_cast<ssize_t>(sizeof port);
  ::close(fds[0]);
  Envelope e1, e2;
  e1.sender_identity = e2.sender_identity = "alice";
  e1.payload = {1};
  e2.payload = {2};
  std::uint64_t s1 = 0;
  MailboxAddress addr;
  if (ok) {
    RelayClient client({"127.0.0.1", port});
    addr = MailboxAddress::for_conversation(client.endpoint(), e1.conversation_id);
    s1 = client.post(addr, e1);
    client.post(addr, e2);
    client.ack(addr.mailbox_id, s1);
  }
  ::kill(child, SIGKILL);
  int status = 0;
  ::waitpid(child, &status, 0);
  if (!ok) return false;

  RelayConfig cfg;
  cfg.port = 0;
  cfg.dir = dir;
  RelayServer restarted(cfg);
  restarted.start();
  RelayClient again({"127.0.0.1", restarted.port()});
  FetchResult r = again.fetch(MailboxAddress::for_conversation(again.endpoint(), e1.conversation_id), 0);
  return r.envelopes.size() == 1 && r.envelopes[0] == e2 && r.cursor == s1 + 1;
}

void transport_robustness(Verdict& v)
{
  auto t0 = Clock::now();
  testing::Gen gen(9);
  std::uint64_t decoded = 0, rejected = 0;
  for (int i = 0; i < 1000000; ++i) {
    Bytes in;
    switch (i % 3) {
    case 0:
      in = gen.bytes(gen.below(96));
      break;
    case 1: {
      Envelope e;
      e.flow_type = static_cast<FlowType>(1 + gen.below(5));
      e.sender_identity = gen.word(20);
      e.payload = gen.bytes(gen.below(200));
      in = encode_envelope(e);
      for (std::uint64_t k = 1 + gen.below(3); k-- > 0;) in[gen.below(in.size())] ^= gen.next() | 1;
      break;
    }
    default: {
      Envelope e;
      e.sender_identity = gen.word(20);
      e.payload = gen.bytes(gen.below(200));
      in = encode_envelope(e);
      in.resize(gen.below(in.size() + 8));
      break;
    }
    }
    try {
      decode_envelope(in);
      ++decoded;
    } catch (const MalformedEnvelope&) {
      ++rejected;
    }
  }
  v.require(decoded + rejected == 1000000, "decoder threw something other than MalformedEnvelope");

  std::uint64_t armored = 0;
  for (int i = 0; i < 500; ++i) {
    Envelope e;
    e.flow_type = static_cast<FlowType>(1 + gen.below(5));
    e.sender_identity = gen.word(20) + "@example.org";
    e.payload = gen.bytes(gen.below(600));
    std::string a = to_attachment(e);
    std::string body;
    std::string head = a.substr(0, a.find("\n\n") + 2);
    std::string rest = a.substr(head.size());
    std::string foot = rest.substr(rest.find(kArmorEnd));
    for (char c : rest.substr(0, rest.size() - foot.size())) {
      if (c != '\n') body.push_back(c);
    }
    for (std::size_t width : {19, 64, 72, 76}) {
      for (std::string eol : {"\n", "\r\n"}) {
        std::string mangled = "> quoted reply" + eol;
        for (char c : head) mangled += c == '\n' ? eol : std::string(1, c);
        for (std::size_t k = 0; k < body.size(); k += width) mangled += body.substr(k, width) + " " + eol;
        for (char c : foot) mangled += c == '\n' ? eol : std::string(1, c);
        try {
          v.require(from_attachment(mangled) == e, "armor changed the envelope");
        } catch (const CarrierError&) {
          v.require(false, "armor rejected a re-wrapped block");
        }
        ++armored;
      }
    }
  }

  fs::path dir = fs::temp_directory_path() / ("authkit-accept-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  bool durable = relay_kill_survives(dir);
  fs::remove_all(dir);
  v.require(durable, "relay lost or resurrected data across SIGKILL");
  v.detail << "1e6 fuzz inputs (" << decoded << " decoded, " << rejected << " rejected, no crash); " << armored
           << " mangled armor round trips; relay survived SIGKILL between ack and fetch; " << seconds_since(t0)
           << " s";
}

// --- 10 ---------------------------------------------------------------------


Bytes key_for(const std::string& name)
{
  Fingerprint f = fingerprint_of(as_bytes(name));
  return Bytes(f.bits.begin(), f.bits.end());
}

struct Endpoint {
  std::string name;
  std::string peer;
  PublicParams params = PublicParams::derive(p256());
  SystemRandom rng;
  PeerTrustStore store;
  SessionManager manager;
  double protocol_ms = 0;

  Endpoint(std::string n, std::string p)
      : name(std::move(n)), peer(std::move(p)),
        manager(params, name, key_for(name), store, rng, [] { return std::uint64_t{0}; }, 1000)
  {
  }

  template <typename F>
  auto timed(F&& f)
  {
    auto t0 = Clock::now();
    auto r = f();
    protocol_ms += ms_since(t0);
    return r;
  }

  /// Polls the mailbox until this side's session ends or `deadline` passes.
  void drive(const RelayClient& relay, const MailboxAddress& box, std::chrono::milliseconds poll,
             Clock::time_point deadline)
  {
    EnvelopeDeduplicator dedup;
    std::uint64_t cursor = 0;
    while (Clock::now() < deadline) {
      const SessionRecord* rec = manager.session(peer);
      if (rec && rec->terminal()) return;
      FetchResult got = relay.fetch(box, cursor);
      cursor = got.cursor;
      for (const auto& e : got.envelopes) {
        if (e.sender_identity != peer || !dedup.first_time(e)) continue;
        std::vector<Envelope> out = timed([&] { return manager.handle_envelope(e).outbound; });
        rec = manager.session(peer);
        if (out.empty() && rec && rec->phase == SessionPhase::AwaitSecret && rec->has_conversation) {
          out = timed([&] { return manager.provide_secret(peer, std::string("winter orchard"), ConfirmMode::Direct); });
        }
        for (const auto& o : out) relay.post(box, o);
      }
      std::this_thread::sleep_for(poll);
    }
  }
};

void async_handshake(Verdict& v)
{
  fs::path dir = fs::temp_directory_path() / ("authkit-e2e-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  RelayConfig cfg;
  cfg.port = 0;
  cfg.dir = dir;
  RelayServer server(cfg);
  server.start();
  RelayClient relay({"127.0.0.1", server.port()});
  const auto poll = std::chrono::milliseconds(100);
  const auto offline = std::chrono::milliseconds(800);

  auto t0 = Clock::now();
  Endpoint alice("alice@example.org", "bob@example.org");
  Endpoint bob("bob@example.org", "alice@example.org");
  Envelope first = alice.timed([&] {
    return alice.manager.start_session(bob.name, std::string("winter orchard"), ConfirmMode::Direct);
  });
  MailboxAddress box = MailboxAddress::for_conversation(relay.endpoint(), first.conversation_id);
  relay.post(box, first);

  const auto deadline = t0 + std::chrono::seconds(30);
  std::thread initiator([&] { alice.drive(relay, box, poll, deadline); });
  // Bob is offline while the first flow sits at the relay.
  std::this_thread::sleep_for(offline);
  std::thread responder([&] { bob.drive(relay, box, poll, deadline); });
  initiator.join();
  responder.join();
  double wall_ms = ms_since(t0);
  server.stop();
  fs::remove_all(dir);

  const SessionRecord* a = alice.manager.session(bob.name);
  const SessionRecord* b = bob.manager.session(alice.name);
  bool accepted = a && b && a->outcome == SessionOutcome::Accepted && b->outcome == SessionOutcome::Accepted;
  v.require(accepted, "handshake did not complete on both sides");
  v.require(accepted && a->established_key->session_key == b->established_key->session_key, "keys differ");
  v.require(alice.protocol_ms < 100 && bob.protocol_ms < 100, "protocol work not under 100 ms per side");
  double waiting = static_cast<double>(offline.count());
  v.require(wall_ms > waiting && alice.protocol_ms + bob.protocol_ms < 0.25 * wall_ms,
            "wall time not dominated by waiting and polling");
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "P-256 over loopback relay, responder offline %lld ms, poll %lld ms: wall %.0f ms, protocol work "
                "%.2f ms (initiator) / %.2f ms (responder)",
                static_cast<long long>(offline.count()), static_cast<long long>(poll.count()), wall_ms,
                alice.protocol_ms, bob.protocol_ms);
  v.detail << buf;
}

}  // namespace

int main()
{
  struct Criterion {
    int id;
    const char* name;
    std::function<void(Verdict&)> run;
  };
  const Criterion criteria[] = {
      {1, "case-study reproduction", case_study},
      {2, "oracle equivalence", oracle_equivalence},
      {3, "PAKE correctness, exhaustive", pake_exhaustive},
      {4, "transcript hiding, exhaustive", transcript_hiding},
      {5, "MITM detection", mitm_detection},
      {6, "guess-and-abort demonstration", guess_and_abort},
      {7, "chaining", chaining},
      {8, "trustwords", trustword_properties},
      {9, "transport robustness", transport_robustness},
      {10, "end-to-end asynchronous handshake", async_handshake},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Verdict v;
    try {
      c.run(v);
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    std::printf("%s %2d %s: %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.str().c_str());
    std::fflush(stdout);
    failed += !v.pass;
  }
  std::printf("%d/10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}
