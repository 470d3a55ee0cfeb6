#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "authkit/adversary.hpp"

namespace authkit::sim {

/// Declarative simulation script, one action per line:
///
///   group tiny23|p256
///   seed 42
///   timeout 16
///   party alice secret="blue horse" [mode=direct|embedded]
///   party bob scalar=3                     (raw password scalar)
///   link alice->bob drop|deliver|delay=N|modify[=OFFSET] [flow=TagB] [count=N]
///   adversary mitm alice bob guess="..."   (or guess-scalar=N)
///   start alice -> bob [mode=embedded]
///   renew alice -> bob [newkey]
///   guess-abort victim=bob as=alice guess="..."
///   inject alice -> bob flow=Flow1 payload=HEX [conversation=HEX]
///
/// Blank lines and '#' comments are ignored. Actions after the header run
/// in order, each until the network is quiet.
struct Scenario {
  struct PartySpec {
    std::string name;
    std::optional<std::string> secret;
    std::optional<std::uint64_t> scalar;
    ConfirmMode mode = ConfirmMode::Direct;
  };
  struct Step {
    enum class Kind : std::uint8_t { Start, Renew, GuessAbort, Inject } kind;
    std::string from;
    std::string to;
    ConfirmMode mode = ConfirmMode::Direct;
    bool new_key = false;
    std::optional<std::string> guess;
    std::optional<std::uint64_t> guess_scalar;
    FlowType flow = FlowType::Flow1;
    Bytes payload;
    std::optional<ConversationId> conversation;
    std::size_t line = 0;
  };
  struct MitmSpec {
    std::string alice;
    std::string bob;
    std::optional<std::string> guess;
    std::optional<std::uint64_t> guess_scalar;
  };

  std::string group = "tiny23";
  std::uint64_t seed = 1;
  std::uint64_t timeout = 16;
  std::vector<PartySpec> parties;
  std::vector<LinkRule> rules;
  std::optional<MitmSpec> mitm;
  std::vector<Step> steps;
};

/// Throws ValidationError naming the offending line.
Scenario parse_scenario(std::string_view text);

struct PartyRow {
  std::string party;
  std::string peer;
  PakeRole role = PakeRole::Initiator;
  SessionPhase phase = SessionPhase::AwaitSecret;
  std::optional<SessionOutcome> outcome;
  std::uint32_t failed_attempts = 0;
  std::uint64_t chain_counter = 0;
  std::uint64_t prompts = 0;

  /// ACCEPTED, ABORTED/FAILED, ABORTED/TIMEOUT, ABORTED/VIOLATION or the
  /// phase name of a session still open.
  std::string result() const;
};

struct ScenarioReport {
  Trace trace;
  std::vector<PartyRow> rows;
  bool completed = true;
  bool adversary = false;
  /// Candidates the adversary reports having tested.
  std::uint64_t adversary_tests = 0;
  /// Her sessions that reached key confirmation.
  std::uint64_t adversary_sessions = 0;
  /// Tag checks not made by honest parties, from the global counter.
  std::uint64_t adversary_tag_checks = 0;
  bool learned = false;

  /// At most one candidate per session, and her own count agrees with the
  /// instrumented one.
  bool one_test_per_run() const;
  /// Outcome table plus the audit line.
  std::string render() const;
};

ScenarioReport run_scenario(const Scenario& scenario);

}  // namespace authkit::sim
