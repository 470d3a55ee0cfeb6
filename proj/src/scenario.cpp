#include "authkit/scenario.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "authkit/errors.hpp"

namespace authkit::sim {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what)
{
  throw ValidationError("scenario line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> tokenize(std::string_view line, std::size_t lineno)
{
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size() || line[i] == '#') break;
    std::string tok;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') {
      if (line[i] == '"') {
        auto close = line.find('"', i + 1);
        if (close == std::string_view::npos) fail(lineno, "unterminated quote");
        tok.append(line.substr(i + 1, close - i - 1));
        i = close + 1;
      } else {
        tok.push_back(line[i++]);
      }
    }
    out.push_back(std::move(tok));
  }
  // "a -> b" and "a->b" are the same endpoint pair.
  std::vector<std::string> merged;
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (out[k] == "->" && !merged.empty() && k + 1 < out.size()) {
      merged.back() += "->" + out[++k];
    } else {
      merged.push_back(out[k]);
    }
  }
  return merged;
}

std::uint64_t number(std::string_view s, std::size_t line)
{
  std::uint64_t v = 0;
  if (s.empty()) fail(line, "expected a number");
  for (char c : s) {
    if (c < '0' || c > '9') fail(line, "expected a number, got '" + std::string(s) + "'");
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
  }
  return v;
}

std::pair<std::string, std::string> endpoints(const std::string& tok, std::size_t line)
{
  auto arrow = tok.find("->");
  if (arrow == std::string::npos || arrow == 0 || arrow + 2 == tok.size()) fail(line, "expected FROM->TO");
  return {tok.substr(0, arrow), tok.substr(arrow + 2)};
}

/// Splits key=value; a bare word has an empty value.
std::pair<std::string, std::string> kv(const std::string& tok)
{
  auto eq = tok.find('=');
  if (eq == std::string::npos) return {tok, ""};
  return {tok.substr(0, eq), tok.substr(eq + 1)};
}

ConfirmMode mode_of(const std::string& v, std::size_t line)
{
  if (v == "direct") return ConfirmMode::Direct;
  if (v == "embedded") return ConfirmMode::Embedded;
  fail(line, "mode must be direct or embedded");
}

FlowType flow_of(const std::string& v, std::size_t line)
{
  try {
    return flow_type_from_string(v);
  } catch (const ValidationError&) {
    fail(line, "unknown flow '" + v + "'");
  }
}

}  // namespace

Scenario parse_scenario(std::string_view text)
{
  Scenario sc;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto t = tokenize(line, lineno);
    if (t.empty()) continue;
    const std::string& verb = t[0];

    if (verb == "group") {
      if (t.size() != 2) fail(lineno, "usage: group NAME");
      try {
        group_by_name(t[1]);
      } catch (const ValidationError&) {
        fail(lineno, "unknown group '" + t[1] + "'");
      }
      sc.group = t[1];
    } else if (verb == "seed" || verb == "timeout") {
      if (t.size() != 2) fail(lineno, "usage: " + verb + " N");
      (verb == "seed" ? sc.seed : sc.timeout) = number(t[1], lineno);
      if (verb == "timeout" && sc.timeout == 0) fail(lineno, "timeout must be positive");
    } else if (verb == "party") {
      if (t.size() < 2) fail(lineno, "usage: party NAME [secret=...] [scalar=N] [mode=...]");
      Scenario::PartySpec p;
      p.name = t[1];
      for (std::size_t i = 2; i < t.size(); ++i) {
        auto [k, v] = kv(t[i]);
        if (k == "secret") p.secret = v;
        else if (k == "scalar") p.scalar = number(v, lineno);
        else if (k == "mode") p.mode = mode_of(v, lineno);
        else fail(lineno, "unknown party option '" + k + "'");
      }
      if (p.secret && p.scalar) fail(lineno, "give either secret= or scalar=, not both");
      for (const auto& other : sc.parties) {
        if (other.name == p.name) fail(lineno, "duplicate party " + p.name);
      }
      sc.parties.push_back(std::move(p));
    } else if (verb == "link") {
      if (t.size() < 3) fail(lineno, "usage: link FROM->TO ACTION [flow=F] [count=N]");
      LinkRule r;
      std::tie(r.from, r.to) = endpoints(t[1], lineno);
      auto [action, arg] = kv(t[2]);
      if (action == "drop") r.action = LinkRule::Action::Drop;
      else if (action == "deliver") r.action = LinkRule::Action::Deliver;
      else if (action == "delay") {
        r.action = LinkRule::Action::Delay;
        r.delay = number(arg, lineno);
      } else if (action == "modify") {
        r.action = LinkRule::Action::Modify;
        if (!arg.empty()) r.flip_offset = number(arg, lineno);
      } else {
        fail(lineno, "unknown link action '" + action + "'");
      }
      for (std::size_t i = 3; i < t.size(); ++i) {
        auto [k, v] = kv(t[i]);
        if (k == "flow") r.flow = flow_of(v, lineno);
        else if (k == "count") r.limit = static_cast<std::uint32_t>(number(v, lineno));
        else fail(lineno, "unknown link option '" + k + "'");
      }
      sc.rules.push_back(std::move(r));
    } else if (verb == "adversary") {
      if (t.size() < 4 || t[1] != "mitm") fail(lineno, "usage: adversary mitm ALICE BOB guess=...");
      if (sc.mitm) fail(lineno, "only one mitm adversary per scenario");
      Scenario::MitmSpec m;
      m.alice = t[2];
      m.bob = t[3];
      for (std::size_t i = 4; i < t.size(); ++i) {
        auto [k, v] = kv(t[i]);
        if (k == "guess") m.guess = v;
        else if (k == "guess-scalar") m.guess_scalar = number(v, lineno);
        else fail(lineno, "unknown adversary option '" + k + "'");
      }
      if (!m.guess && !m.guess_scalar) fail(lineno, "mitm needs guess= or guess-scalar=");
      sc.mitm = std::move(m);
    } else if (verb == "start" || verb == "renew" || verb == "inject") {
      if (t.size() < 2) fail(lineno, "usage: " + verb + " FROM->TO ...");
      Scenario::Step s;
      s.line = lineno;
      s.kind = verb == "start" ? Scenario::Step::Kind::Start
               : verb == "renew" ? Scenario::Step::Kind::Renew
                                 : Scenario::Step::Kind::Inject;
      std::tie(s.from, s.to) = endpoints(t[1], lineno);
      bool have_flow = false;
      for (std::size_t i = 2; i < t.size(); ++i) {
        auto [k, v] = kv(t[i]);
        if (k == "mode" && verb == "start") s.mode = mode_of(v, lineno);
        else if (k == "newkey" && verb == "renew") s.new_key = true;
        else if (k == "flow" && verb == "inject") {
          s.flow = flow_of(v, lineno);
          have_flow = true;
        } else if (k == "payload" && verb == "inject") {
          try {
            s.payload = from_hex(v);
          } catch (const ValidationError&) {
            fail(lineno, "payload must be hex");
          }
        } else if (k == "conversation" && verb == "inject") {
          Bytes c;
          try {
            c = from_hex(v);
          } catch (const ValidationError&) {
            fail(lineno, "conversation must be hex");
          }
          if (c.size() != 16) fail(lineno, "conversation must be 16 bytes");
          ConversationId id{};
          std::copy(c.begin(), c.end(), id.begin());
          s.conversation = id;
        } else {
          fail(lineno, "unknown " + verb + " option '" + k + "'");
        }
      }
      if (verb == "inject" && !have_flow) fail(lineno, "inject needs flow=");
      sc.steps.push_back(std::move(s));
    } else if (verb == "guess-abort") {
      Scenario::Step s;
      s.line = lineno;
      s.kind = Scenario::Step::Kind::GuessAbort;
      for (std::size_t i = 1; i < t.size(); ++i) {
        auto [k, v] = kv(t[i]);
        if (k == "victim") s.to = v;
        else if (k == "as") s.from = v;
        else if (k == "guess") s.guess = v;
        else if (k == "guess-scalar") s.guess_scalar = number(v, lineno);
        else fail(lineno, "unknown guess-abort option '" + k + "'");
      }
      if (s.to.empty() || s.from.empty() || (!s.guess && !s.guess_scalar)) {
        fail(lineno, "usage: guess-abort victim=V as=CLAIMED guess=...");
      }
      sc.steps.push_back(std::move(s));
    } else {
      fail(lineno, "unknown action '" + verb + "'");
    }
  }

  auto known = [&](const std::string& name) {
    return std::any_of(sc.parties.begin(), sc.parties.end(), [&](const auto& p) { return p.name == name; });
  };
  auto find_party = [&](const std::string& name) {
    return std::find_if(sc.parties.begin(), sc.parties.end(), [&](const auto& p) { return p.name == name; });
  };
  if (sc.mitm) {
    for (const auto& name : {sc.mitm->alice, sc.mitm->bob}) {
      if (!known(name)) throw ValidationError("scenario: mitm names unknown party " + name);
    }
  }
  for (const auto& st : sc.steps) {
    switch (st.kind) {
    case Scenario::Step::Kind::Start:
      if (!known(st.from) || !known(st.to)) fail(st.line, "start between unknown parties");
      if (!find_party(st.from)->secret && !find_party(st.from)->scalar) fail(st.line, st.from + " has no secret");
      break;
    case Scenario::Step::Kind::Renew:
      if (!known(st.from) || !known(st.to)) fail(st.line, "renew between unknown parties");
      break;
    case Scenario::Step::Kind::GuessAbort:
    case Scenario::Step::Kind::Inject:
      // The sender may be a name nobody owns; only the receiver must exist.
      if (!known(st.to)) fail(st.line, "unknown party " + st.to);
      break;
    }
  }
  return sc;
}

std::string PartyRow::result() const
{
  if (phase == SessionPhase::Accepted) return "ACCEPTED";
  if (phase == SessionPhase::Aborted) {
    if (outcome == SessionOutcome::AuthenticationFailed) return "ABORTED/FAILED";
    if (outcome == SessionOutcome::Timeout) return "ABORTED/TIMEOUT";
    return "ABORTED/VIOLATION";
  }
  return to_string(phase);
}

bool ScenarioReport::one_test_per_run() const
{
  return adversary_tests <= adversary_sessions && adversary_tag_checks == adversary_tests;
}

std::string ScenarioReport::render() const
{
  std::ostringstream out;
  out << std::left << std::setw(12) << "party" << std::setw(12) << "peer" << std::setw(11) << "role"
      << std::setw(19) << "result" << std::setw(8) << "failed" << std::setw(7) << "chain"
      << "prompts\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(12) << r.party << std::setw(12) << r.peer << std::setw(11) << to_string(r.role)
        << std::setw(19) << r.result() << std::setw(8) << r.failed_attempts << std::setw(7) << r.chain_counter
        << r.prompts << '\n';
  }
  if (!completed) out << "warning: scenario hit its deadline; trace is partial\n";
  if (!adversary) {
    out << "audit: no adversary\n";
  } else {
    if (learned) out << "adversary confirmed the password\n";
    out << "audit: adversary tested " << adversary_tests << " candidate(s) in " << adversary_sessions
        << " keyed session(s); instrumented checks " << adversary_tag_checks << "; one test per run "
        << (one_test_per_run() ? "holds" : "VIOLATED") << '\n';
  }
  return out.str();
}

ScenarioReport run_scenario(const Scenario& sc)
{
  const Group& g = group_by_name(sc.group);
  PublicParams params = PublicParams::derive(g);
  Fabric net(params, sc.seed, sc.timeout);

  auto find_party = [&](const std::optional<std::string>& text,
                       const std::optional<std::uint64_t>& scalar) -> std::optional<SecretInput> {
    if (text) return SecretInput{*text};
    if (scalar) return SecretInput{PasswordScalar{g.scalar(*scalar), SecretSource::Direct}};
    return std::nullopt;
  };

  std::map<std::string, std::optional<SecretInput>> secrets;
  for (const auto& p : sc.parties) {
    secrets[p.name] = find_party(p.secret, p.scalar);
    net.add_party(p.name, secrets[p.name], p.mode);
  }
  for (const auto& r : sc.rules) net.add_rule(r);

  std::unique_ptr<MitmAdversary> mitm;
  std::vector<std::unique_ptr<GuessAndAbortAdversary>> guessers;
  if (sc.mitm) {
    Bytes pk = net.rng().fork("mallory-pk").bytes(32);
    mitm = std::make_unique<MitmAdversary>(net, sc.mitm->alice, sc.mitm->bob,
                                           *find_party(sc.mitm->guess, sc.mitm->guess_scalar), pk);
    net.set_adversary(mitm.get());
  }

  const std::uint64_t checks_before = tag_verification_count();
  ScenarioReport report;
  for (const auto& step : sc.steps) {
    try {
      switch (step.kind) {
        case Scenario::Step::Kind::Start: {
          auto it = secrets.find(step.from);
          if (it == secrets.end() || !it->second) fail(step.line, step.from + " has no secret to start with");
          net.start(step.from, step.to, *it->second, step.mode);
          break;
        }
        case Scenario::Step::Kind::Renew: {
          std::optional<Bytes> pk;
          if (step.new_key) pk = net.rng().fork("newkey/" + step.from).bytes(32);
          net.renew(step.from, step.to, pk);
          break;
        }
        case Scenario::Step::Kind::GuessAbort: {
          if (mitm) fail(step.line, "guess-abort cannot share a scenario with a mitm adversary");
          if (!net.has_party(step.to)) fail(step.line, "unknown victim " + step.to);
          net.party(step.to).manager->drop_session(step.from);
          guessers.push_back(std::make_unique<GuessAndAbortAdversary>(net, step.from, step.to));
          net.set_adversary(guessers.back().get());
          guessers.back()->attempt(net, *find_party(step.guess, step.guess_scalar));
          break;
        }
        case Scenario::Step::Kind::Inject: {
          Envelope e;
          e.flow_type = step.flow;
          if (step.conversation) e.conversation_id = *step.conversation;
          else net.rng().fill(e.conversation_id);
          e.sender_identity = step.from;
          e.payload = step.payload;
          net.inject({step.from, step.to, std::move(e)});
          break;
        }
      }
    } catch (const ValidationError&) {
      throw;
    } catch (const Error& e) {
      net.note("line " + std::to_string(step.line) + ": " + e.what());
    }
    report.completed = net.run() && report.completed;
  }

  for (const auto& p : sc.parties) {
    Party& party = net.party(p.name);
    for (const auto& peer : party.manager->known_peers()) {
      const SessionRecord* rec = party.manager->session(peer);
      PartyRow row;
      row.party = p.name;
      row.peer = peer;
      row.role = rec->role;
      row.phase = rec->phase;
      row.outcome = rec->outcome;
      row.failed_attempts = rec->failed_attempts;
      row.chain_counter = rec->chain_counter;
      row.prompts = party.prompts;
      report.rows.push_back(std::move(row));
    }
  }

  const std::uint64_t all_checks = tag_verification_count() - checks_before;
  report.adversary_tag_checks = all_checks - net.honest_tag_checks();
  if (mitm) {
    report.adversary = true;
    report.adversary_tests = mitm->candidates_tested();
    report.adversary_sessions = mitm->sessions_completed();
  }
  for (const auto& gsr : guessers) {
    report.adversary = true;
    report.adversary_tests += gsr->candidates_tested();
    report.adversary_sessions += gsr->sessions_completed();
    report.learned = report.learned || gsr->learned();
  }
  report.trace = std::move(net.trace());
  return report;
}

}  // namespace authkit::sim
