#include <doctest.h>

#include <fstream>
#include <sstream>

#include "authkit/scenario.hpp"

using namespace authkit;
using namespace authkit::sim;

namespace {

std::string read_bundled(const std::string& name)
{
  std::ifstream in(std::string(AUTHKIT_SCENARIO_DIR) + "/" + name);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const PartyRow& row(const ScenarioReport& r, const std::string& party)
{
  for (const auto& x : r.rows) {
    if (x.party == party) return x;
  }
  FAIL("no row for " << party);
  return r.rows.front();
}

}  // namespace

TEST_CASE("scenario grammar")
{
  Scenario s = parse_scenario(R"(# comment
group p256
seed 9
timeout 20
party alice secret="blue horse" mode=embedded
party bob scalar=3
link alice->bob delay=4 flow=Flow2 count=2
link *->* modify=5
adversary mitm alice bob guess-scalar=4
start alice -> bob mode=embedded
renew alice -> bob newkey
guess-abort victim=bob as=alice guess="x y"
inject alice->bob flow=TagA payload=00ff conversation=000102030405060708090a0b0c0d0e0f
)");
  CHECK(s.group == "p256");
  CHECK(s.seed == 9);
  CHECK(s.timeout == 20);
  REQUIRE(s.parties.size() == 2);
  CHECK(*s.parties[0].secret == "blue horse");
  CHECK(s.parties[0].mode == ConfirmMode::Embedded);
  CHECK(*s.parties[1].scalar == 3);
  REQUIRE(s.rules.size() == 2);
  CHECK(s.rules[0].action == LinkRule::Action::Delay);
  CHECK(s.rules[0].delay == 4);
  CHECK(*s.rules[0].flow == FlowType::Flow2);
  CHECK(*s.rules[0].limit == 2);
  CHECK(s.rules[1].from == "*");
  CHECK(s.rules[1].flip_offset == 5);
  REQUIRE(s.mitm);
  CHECK(*s.mitm->guess_scalar == 4);
  REQUIRE(s.steps.size() == 4);
  CHECK(s.steps[0].mode == ConfirmMode::Embedded);
  CHECK(s.steps[1].new_key);
  CHECK(*s.steps[2].guess == "x y");
  CHECK(s.steps[3].payload == Bytes{0x00, 0xff});
  CHECK((*s.steps[3].conversation)[15] == 0x0f);
}

TEST_CASE("scenario errors name the line")
{
  auto message = [](const std::string& text) {
    try {
      parse_scenario(text);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("group p256\nfrobnicate\n").find("line 2") != std::string::npos);
  CHECK(message("party alice secret=\"x\" scalar=3\n").find("line 1") != std::string::npos);
  CHECK(message("party alice\nparty bob scalar=1\nstart alice -> bob\n").find("line 3") != std::string::npos);
  CHECK(message("party alice\n").empty());
  CHECK(message("party a secret=\"x\"\nstart a -> nobody\n").find("line 2") != std::string::npos);
  CHECK(message("link a->b explode\n").find("line 1") != std::string::npos);
  CHECK(message("seed x\n").find("line 1") != std::string::npos);
  CHECK_FALSE(message("group p999\n").empty());
}

TEST_CASE("bundled honest and reorder scenarios")
{
  for (const char* name : {"honest.scn", "reorder.scn"}) {
    ScenarioReport r = run_scenario(parse_scenario(read_bundled(name)));
    CHECK(r.completed);
    CHECK(row(r, "alice").result() == "ACCEPTED");
    CHECK(row(r, "bob").result() == "ACCEPTED");
    CHECK(r.render().find("no adversary") != std::string::npos);
  }
}

TEST_CASE("bundled mismatch scenario")
{
  ScenarioReport r = run_scenario(parse_scenario(read_bundled("mismatch.scn")));
  CHECK(row(r, "alice").result() == "ABORTED/FAILED");
  CHECK(row(r, "bob").result() == "ABORTED/FAILED");
  CHECK(row(r, "alice").failed_attempts == 1);
}

TEST_CASE("bundled mitm scenario aborts both parties")
{
  ScenarioReport r = run_scenario(parse_scenario(read_bundled("mitm.scn")));
  CHECK(row(r, "alice").result().rfind("ABORTED", 0) == 0);
  CHECK(row(r, "bob").result().rfind("ABORTED", 0) == 0);
  CHECK(r.adversary);
  CHECK(r.one_test_per_run());
  CHECK(r.render().find("one test per run holds") != std::string::npos);
}

TEST_CASE("bundled guess-and-abort scenario shows a timeout, not a failure")
{
  ScenarioReport r = run_scenario(parse_scenario(read_bundled("guess_abort.scn")));
  const PartyRow& victim = row(r, "bob");
  CHECK(victim.result() == "ABORTED/TIMEOUT");
  CHECK(victim.failed_attempts == 0);
  CHECK_FALSE(r.learned);
  CHECK(r.adversary_tests == 1);
  CHECK(r.adversary_tag_checks == 1);
  CHECK(r.one_test_per_run());
}

TEST_CASE("bundled drop and renewal scenarios")
{
  ScenarioReport drop = run_scenario(parse_scenario(read_bundled("drop_all.scn")));
  CHECK(row(drop, "alice").result() == "ABORTED/TIMEOUT");
  CHECK(row(drop, "alice").failed_attempts == 0);

  ScenarioReport renew = run_scenario(parse_scenario(read_bundled("renewal.scn")));
  CHECK(row(renew, "alice").result() == "ACCEPTED");
  CHECK(row(renew, "alice").chain_counter == 2);
  CHECK(row(renew, "bob").chain_counter == 2);
  CHECK(row(renew, "alice").prompts == 1);
  CHECK(row(renew, "bob").prompts == 1);
}

TEST_CASE("scenario runs are deterministic")
{
  std::string text = read_bundled("mitm.scn");
  CHECK(run_scenario(parse_scenario(text)).trace.serialize() ==
        run_scenario(parse_scenario(text)).trace.serialize());
}
