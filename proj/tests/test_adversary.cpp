#include <doctest.h>

#include "authkit/adversary.hpp"
#include "support.hpp"

using namespace authkit;
using namespace authkit::sim;

namespace {

const PublicParams& tiny_params()
{
  static const PublicParams p = PublicParams::derive(tiny23());
  return p;
}

const PublicParams& prod_params()
{
  static const PublicParams p = PublicParams::derive(p256());
  return p;
}

PasswordScalar pw(std::uint64_t v) { return {tiny23().scalar(v), SecretSource::Direct}; }

std::optional<SessionOutcome> outcome(Fabric& net, const std::string& who, const std::string& peer)
{
  const SessionRecord* r = net.party(who).manager->session(peer);
  return r ? r->outcome : std::nullopt;
}

}  // namespace

TEST_CASE("all-deliver baseline")
{
  for (const PublicParams* p : {&tiny_params(), &prod_params()}) {
    Fabric net(*p, 1);
    net.add_party("alice");
    net.add_party("bob", std::string("shared"));
    net.start("alice", "bob", std::string("shared"));
    CHECK(net.run());
    CHECK(outcome(net, "alice", "bob") == SessionOutcome::Accepted);
    CHECK(outcome(net, "bob", "alice") == SessionOutcome::Accepted);
    CHECK(net.party("alice").prompts == 1);
    CHECK(net.party("bob").prompts == 1);
  }
}

TEST_CASE("dropping everything times out without failed attempts")
{
  Fabric net(prod_params(), 2);
  net.add_party("alice");
  net.add_party("bob", std::string("s"));
  LinkRule drop;
  drop.action = LinkRule::Action::Drop;
  net.add_rule(drop);
  net.start("alice", "bob", std::string("s"));
  net.run();
  CHECK(outcome(net, "alice", "bob") == SessionOutcome::Timeout);
  CHECK_FALSE(net.party("alice").store.lookup("bob"));
  CHECK_FALSE(net.party("bob").manager->session("alice"));
}

TEST_CASE("dropping only the last tag leaves the responder timed out")
{
  Fabric net(prod_params(), 3);
  net.add_party("alice");
  net.add_party("bob", std::string("s"));
  LinkRule rule;
  rule.flow = FlowType::TagA;
  rule.action = LinkRule::Action::Drop;
  net.add_rule(rule);
  net.start("alice", "bob", std::string("s"));
  net.run();
  CHECK(outcome(net, "alice", "bob") == SessionOutcome::Accepted);
  CHECK(outcome(net, "bob", "alice") == SessionOutcome::Timeout);
  CHECK(net.party("bob").store.lookup("alice").has_value() == false);
}

TEST_CASE("bit flips in transit never produce acceptance")
{
  for (FlowType f : {FlowType::Flow1, FlowType::Flow2, FlowType::TagA, FlowType::TagB}) {
    for (std::size_t off : {0u, 7u, 40u, 90u}) {
      Fabric net(prod_params(), 4 + off);
      net.add_party("alice");
      net.add_party("bob", std::string("s"));
      LinkRule rule;
      rule.flow = f;
      rule.action = LinkRule::Action::Modify;
      rule.flip_offset = off;
      net.add_rule(rule);
      net.start("alice", "bob", std::string("s"));
      net.run();
      // At most one side may have finished before the flipped message.
      bool a = outcome(net, "alice", "bob") == SessionOutcome::Accepted;
      bool b = outcome(net, "bob", "alice") == SessionOutcome::Accepted;
      CHECK_FALSE((a && b));
      if (f == FlowType::TagA) CHECK_FALSE(b);
      if (f == FlowType::TagB) CHECK_FALSE(a);
    }
  }
}

TEST_CASE("fixed seed reproduces the trace byte for byte")
{
  auto trace = [](std::uint64_t seed) {
    Fabric net(prod_params(), seed);
    net.add_party("alice");
    net.add_party("bob", std::string("s"));
    LinkRule delay;
    delay.from = "bob";
    delay.flow = FlowType::Flow2;
    delay.action = LinkRule::Action::Delay;
    delay.delay = 3;
    net.add_rule(delay);
    net.start("alice", "bob", std::string("s"));
    net.run();
    return net.trace().serialize();
  };
  std::string t1 = trace(9);
  CHECK(t1 == trace(9));
  CHECK(t1 != trace(10));
  CHECK(t1.find("Accepted") != std::string::npos);
}

TEST_CASE("key substitution: exhaustive guesses over tiny23")
{
  for (std::uint64_t honest : {0u, 3u, 10u}) {
    int accepted = 0;
    for (std::uint64_t guess = 0; guess < 11; ++guess) {
      MitmResult r = mitm_key_substitution(tiny_params(), pw(honest), pw(guess), 100 + guess);
      bool a = r.alice == SessionOutcome::Accepted;
      bool b = r.bob == SessionOutcome::Accepted;
      CHECK(a == b);
      CHECK(a == (guess == honest));
      CHECK(r.candidates_tested == 2);
      accepted += a;
      if (a) CHECK_FALSE(*r.alice_view_of_bob == fingerprint_of(Bytes{}));
    }
    CHECK(accepted == 1);
  }
}

TEST_CASE("key substitution in the production group")
{
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    MitmResult r = mitm_key_substitution(prod_params(), std::string("real secret"), std::string("guess"), seed);
    CHECK(r.alice == SessionOutcome::AuthenticationFailed);
    CHECK(r.bob == SessionOutcome::AuthenticationFailed);
  }
  // An insider who knows the secret can substitute keys: the secret is the root of trust.
  MitmResult insider =
      mitm_key_substitution(prod_params(), std::string("real secret"), std::string("REAL SECRET"), 7);
  CHECK(insider.alice == SessionOutcome::Accepted);
  CHECK(insider.bob == SessionOutcome::Accepted);
}

TEST_CASE("guess and abort")
{
  GuessAndAbortResult wrong = guess_and_abort(prod_params(), std::string("secret"), std::string("nope"), 1);
  CHECK_FALSE(wrong.learned);
  CHECK(wrong.victim_outcome == SessionOutcome::Timeout);
  CHECK(wrong.victim_failed_attempts == 0);
  CHECK(wrong.candidates_tested == 1);
  CHECK(wrong.victim_tag_checks == 0);

  GuessAndAbortResult right = guess_and_abort(prod_params(), std::string("secret"), std::string("Secret"), 2);
  CHECK(right.learned);
  CHECK(right.victim_outcome == SessionOutcome::Accepted);
  CHECK(right.adversary_key_matches_victim);
  CHECK(right.candidates_tested == 1);
}

TEST_CASE("guess and abort sweep eliminates one candidate per session")
{
  for (std::uint64_t secret = 0; secret < 11; ++secret) {
    Fabric net(tiny_params(), 50 + secret, 16);
    net.add_party("bob", pw(secret));
    GuessAndAbortAdversary mallory(net, "alice", "bob");
    net.set_adversary(&mallory);
    std::uint64_t sessions = 0;
    for (std::uint64_t guess = 0; guess < 11 && !mallory.learned(); ++guess) {
      mallory.attempt(net, pw(guess));
      net.run();
      ++sessions;
      CHECK(mallory.candidates_tested() == sessions);
      CHECK(net.party("bob").store.lookup("alice").value_or(PeerEntry{}).failed_attempts == 0);
    }
    CHECK(mallory.learned());
    CHECK(sessions == secret + 1);
  }
}

TEST_CASE("every blinded value is consistent with every password exactly once")
{
  const Group& g = tiny23();
  DeterministicRandom rng(5);
  for (PakeRole role : {PakeRole::Initiator, PakeRole::Responder}) {
    for (std::uint64_t secret = 0; secret < 11; ++secret) {
      PakeStart s = pake_start(tiny_params(), role, pw(secret), "x", {}, rng);
      std::vector<std::uint64_t> counts = consistent_coin_counts(tiny_params(), role, s.flow.blinded);
      REQUIRE(counts.size() == 11);
      for (auto c : counts) CHECK(c == 1);
    }
  }
  CHECK_THROWS_AS(consistent_coin_counts(prod_params(), PakeRole::Initiator, p256().generator()), UsageError);
  (void)g;
}

TEST_CASE("secret scanner")
{
  Bytes hay{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<Bytes> wire{hay, Bytes{9, 9}};
  auto hits = scan_for_secrets(wire, {Bytes{2, 3, 4, 5, 6, 7, 8, 9}, Bytes{1, 2}, Bytes(8, 0xee)});
  REQUIRE(hits.size() == 1);
  CHECK(hits[0] == std::pair<std::size_t, std::size_t>{0, 0});
}

TEST_CASE("no secret or key material crosses the wire")
{
  Fabric net(prod_params(), 77);
  net.add_party("alice");
  net.add_party("bob", std::string("horse battery staple"));
  net.start("alice", "bob", std::string("horse battery staple"));
  net.run();
  const SessionRecord* r = net.party("alice").manager->session("bob");
  REQUIRE(r->established_key);
  std::vector<Bytes> needles;
  for (std::string s : {"horse battery staple", "HORSE BATTERY STAPLE"}) needles.emplace_back(s.begin(), s.end());
  const KeyBundle& k = *r->established_key;
  for (const SecureBytes* b : {&k.session_key, &k.k_mac_a, &k.k_mac_b}) {
    needles.emplace_back(b->view().begin(), b->view().end());
  }
  PasswordScalar pi = derive_password_scalar("horse battery staple", prod_params());
  needles.emplace_back(pi.pi.bytes().begin(), pi.pi.bytes().end());
  CHECK(scan_for_secrets(net.trace().wire_images(), needles).empty());
  Bytes text;
  std::string t = net.trace().serialize();
  text.assign(t.begin(), t.end());
  CHECK(scan_for_secrets({text}, needles).empty());
}

TEST_CASE("random network policies never accept mismatched runs")
{
  testing::Gen gen(0xd01e);
  int both_accepted = 0;
  for (int trial = 0; trial < 300; ++trial) {
    Fabric net(tiny_params(), gen.next(), 8);
    std::uint64_t sa = gen.below(11);
    std::uint64_t sb = gen.below(3) == 0 ? gen.below(11) : sa;
    net.add_party("alice", pw(sa));
    net.add_party("bob", pw(sb));
    for (std::uint64_t k = gen.below(3); k-- > 0;) {
      LinkRule rule;
      rule.from = gen.below(2) ? "alice" : "*";
      rule.flow = static_cast<FlowType>(1 + gen.below(4));
      rule.action = static_cast<LinkRule::Action>(gen.below(4));
      rule.delay = gen.below(20);
      rule.flip_offset = gen.below(80);
      rule.limit = static_cast<std::uint32_t>(1 + gen.below(2));
      net.add_rule(rule);
    }
    net.start("alice", "bob", pw(sa));
    if (gen.below(4) == 0) net.start("bob", "alice", pw(sb));
    net.run();
    const SessionRecord* a = net.party("alice").manager->session("bob");
    const SessionRecord* b = net.party("bob").manager->session("alice");
    bool aa = a && a->outcome == SessionOutcome::Accepted;
    bool ba = b && b->outcome == SessionOutcome::Accepted;
    if (sa != sb) {
      CHECK_FALSE(aa);
      CHECK_FALSE(ba);
    }
    if (aa && ba) {
      ++both_accepted;
      CHECK(a->established_key->session_key == b->established_key->session_key);
    }
    if (a) CHECK(a->terminal());
  }
  CHECK(both_accepted > 0);
}
