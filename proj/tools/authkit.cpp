// Command-line front end: authentication runs, renewals, trustwords,
// attack estimates, the relay server and scripted simulations.
//
// Exit codes: 0 success, 1 authentication failed or refused, 2 transport or
// environment failure (including timeouts), 3 usage error.

#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <sys/stat.h>
#include <termios.h>
#include <unistd.h>

#include <openssl/evp.h>

#include <CLI11.hpp>

#include "authkit/attack_lab.hpp"
#include "authkit/envelope.hpp"
#include "authkit/errors.hpp"
#include "authkit/relay.hpp"
#include "authkit/relay_client.hpp"
#include "authkit/scenario.hpp"
#include "authkit/session.hpp"
#include "authkit/trust_store.hpp"
#include "authkit/trustwords.hpp"

namespace fs = std::filesystem;
using namespace authkit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAuthFailed = 1;
constexpr int kExitTransport = 2;
constexpr int kExitUsage = 3;

struct ExitCode {
  int code;
};

// --- configuration ---------------------------------------------------------

struct CliConfig {
  std::string identity;
  fs::path key_file;
  fs::path store;
  std::string relay;
  std::string dict;
  std::uint32_t max_attempts = 3;
};

std::map<std::string, std::string> read_config_file(const fs::path& path)
{
  std::map<std::string, std::string> out;
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path.string() + ":" + std::to_string(n) + ": expected key=value");
    auto trim = [](std::string s) {
      auto a = s.find_first_not_of(" \t");
      auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

/// Defaults < config file < environment < explicit flags.
CliConfig resolve_config(const std::string& config_flag, const std::map<std::string, std::string>& flags)
{
  std::map<std::string, std::string> v;
  if (const char* home = std::getenv("HOME")) {
    v["store"] = (fs::path(home) / ".authkit" / "trust.journal").string();
    v["key"] = (fs::path(home) / ".authkit" / "key").string();
  } else {
    v["store"] = "authkit-trust.journal";
    v["key"] = "authkit.key";
  }
  std::string config_path = config_flag;
  if (config_path.empty()) {
    if (const char* env = std::getenv("AUTHKIT_CONFIG")) config_path = env;
  }
  if (!config_path.empty()) {
    for (auto& [k, val] : read_config_file(config_path)) v[k] = val;
  }
  const std::pair<const char*, const char*> env_keys[] = {
      {"AUTHKIT_IDENTITY", "identity"}, {"AUTHKIT_KEY", "key"},   {"AUTHKIT_STORE", "store"},
      {"AUTHKIT_RELAY", "relay"},       {"AUTHKIT_DICT", "dict"}, {"AUTHKIT_MAX_ATTEMPTS", "max_attempts"},
  };
  for (auto [env, key] : env_keys) {
    if (const char* val = std::getenv(env)) v[key] = val;
  }
  for (auto& [k, val] : flags) {
    if (!val.empty()) v[k] = val;
  }

  CliConfig c;
  c.identity = v["identity"];
  c.key_file = v["key"];
  c.store = v["store"];
  c.relay = v["relay"];
  c.dict = v["dict"];
  if (!v["max_attempts"].empty()) {
    try {
      std::size_t used = 0;
      unsigned long n = std::stoul(v["max_attempts"], &used);
      if (used != v["max_attempts"].size() || n == 0 || n > 1000) throw std::invalid_argument("range");
      c.max_attempts = static_cast<std::uint32_t>(n);
    } catch (const std::exception&) {
      throw UsageError("max_attempts must be a number between 1 and 1000");
    }
  }
  return c;
}

void require_identity(const CliConfig& c)
{
  if (c.identity.empty()) throw UsageError("no identity configured (set identity= or AUTHKIT_IDENTITY or --identity)");
}

// --- keys --------------------------------------------------------------------

struct KeyPair {
  Bytes public_key;
  SecureBytes private_key;
};

KeyPair generate_ed25519()
{
  EVP_PKEY* pkey = EVP_PKEY_Q_keygen(nullptr, nullptr, "ED25519");
  if (pkey == nullptr) throw EnvironmentError("key generation failed");
  KeyPair kp;
  std::size_t len = 32;
  kp.public_key.resize(len);
  SecureBytes priv(32);
  bool ok = EVP_PKEY_get_raw_public_key(pkey, kp.public_key.data(), &len) == 1 && len == 32;
  len = 32;
  ok = ok && EVP_PKEY_get_raw_private_key(pkey, priv.data(), &len) == 1 && len == 32;
  EVP_PKEY_free(pkey);
  if (!ok) throw EnvironmentError("cannot export generated key");
  kp.private_key = std::move(priv);
  return kp;
}

void write_key_file(const fs::path& path, const KeyPair& kp, bool force)
{
  if (fs::exists(path) && !force) throw UsageError(path.string() + " exists; pass --force to overwrite");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
  if (fd < 0) throw EnvironmentError("cannot write " + path.string());
  std::string body = "# authkit Ed25519 key pair\npublic=" + to_hex(kp.public_key) +
                     "\nprivate=" + to_hex(kp.private_key.view()) + "\n";
  bool ok = ::write(fd, body.data(), body.size()) == static_cast<ssize_t>(body.size());
  ::fchmod(fd, 0600);
  ::close(fd);
  std::fill(body.begin(), body.end(), '\0');
  if (!ok) throw EnvironmentError("cannot write " + path.string());
}

Bytes load_public_key(const fs::path& path)
{
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read key file " + path.string() + " (run keygen first)");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("public=", 0) == 0) {
      std::string hex = line.substr(7);
      while (!hex.empty() && (hex.back() == '\r' || hex.back() == ' ')) hex.pop_back();
      return from_hex(hex);
    }
  }
  throw UsageError(path.string() + " has no public= line");
}

Bytes parse_peer_key(const std::string& arg)
{
  if (fs::exists(arg)) return load_public_key(arg);
  return from_hex(arg);
}

// --- secrets -----------------------------------------------------------------

struct SecretOptions {
  int fd = -1;
  std::string file;
};

std::string trim_newline(std::string s)
{
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

std::string read_secret(const SecretOptions& opt, const std::string& peer)
{
  if (opt.fd >= 0) {
    std::string s;
    char buf[256];
    for (;;) {
      ssize_t n = ::read(opt.fd, buf, sizeof buf);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      s.append(buf, static_cast<std::size_t>(n));
    }
    return trim_newline(std::move(s));
  }
  if (!opt.file.empty()) {
    std::ifstream in(opt.file, std::ios::binary);
    if (!in) throw UsageError("cannot read secret file " + opt.file);
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return trim_newline(std::move(s));
  }
  int tty = ::open("/dev/tty", O_RDWR | O_CLOEXEC);
  if (tty < 0) throw UsageError("no terminal for the secret prompt; use --secret-fd or --secret-file");
  std::string prompt = "Shared secret for " + peer +
                       ".\nAgree on it in person or by phone; never put it in the email itself.\nSecret: ";
  (void)!::write(tty, prompt.data(), prompt.size());
  termios old{};
  bool restore = ::tcgetattr(tty, &old) == 0;
  if (restore) {
    termios quiet = old;
    quiet.c_lflag &= ~static_cast<tcflag_t>(ECHO);
    ::tcsetattr(tty, TCSAFLUSH, &quiet);
  }
  std::string s;
  char c = 0;
  while (::read(tty, &c, 1) == 1 && c != '\n') s.push_back(c);
  if (restore) ::tcsetattr(tty, TCSAFLUSH, &old);
  (void)!::write(tty, "\n", 1);
  ::close(tty);
  return trim_newline(std::move(s));
}

// --- carriers ----------------------------------------------------------------

class Carrier {
public:
  virtual ~Carrier() = default;
  virtual void send(const Envelope& e) = 0;
  /// Envelopes that arrived since the previous call.
  virtual std::vector<Envelope> receive() = 0;
  /// Called once the conversation id is known.
  virtual void bind(const ConversationId&) {}
};

class RelayCarrier final : public Carrier {
public:
  explicit RelayCarrier(RelayEndpoint ep) : client_(std::move(ep)) {}

  void bind(const ConversationId& conv) override { addr_ = MailboxAddress::for_conversation(client_.endpoint(), conv); }

  void send(const Envelope& e) override
  {
    if (!addr_) throw UsageError("relay carrier used before the conversation is known");
    client_.post(*addr_, e);
  }

  std::vector<Envelope> receive() override
  {
    if (!addr_) return {};
    FetchResult r = client_.fetch(*addr_, cursor_);
    cursor_ = r.cursor;
    if (r.malformed > 0) std::cerr << "ignored " << r.malformed << " malformed relay entries\n";
    return std::move(r.envelopes);
  }

private:
  RelayClient client_;
  std::optional<MailboxAddress> addr_;
  std::uint64_t cursor_ = 0;
};

/// Armored blocks appended to an outbox file and read from an inbox file.
class FileCarrier final : public Carrier {
public:
  FileCarrier(fs::path out, fs::path in) : out_(std::move(out)), in_(std::move(in)) {}

  void send(const Envelope& e) override
  {
    std::ofstream f(out_, std::ios::app | std::ios::binary);
    if (!f) throw CarrierError("cannot write " + out_.string());
    f << to_attachment(e) << '\n';
    if (!f.flush()) throw CarrierError("cannot write " + out_.string());
  }

  std::vector<Envelope> receive() override
  {
    std::ifstream f(in_, std::ios::binary);
    if (!f) return {};
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    std::vector<Envelope> all = extract_attachments(text);
    std::vector<Envelope> fresh;
    for (std::size_t i = seen_; i < all.size(); ++i) fresh.push_back(std::move(all[i]));
    seen_ = std::max(seen_, all.size());
    return fresh;
  }

private:
  fs::path out_;
  fs::path in_;
  std::size_t seen_ = 0;
};

struct CarrierOptions {
  std::string kind = "relay";
  std::string conversation;
  std::string in;
  std::string out;
  double timeout_s = 600;
  int poll_ms = 500;
  bool verbose = false;
};

std::unique_ptr<Carrier> make_carrier(const CarrierOptions& o, const CliConfig& cfg)
{
  if (o.kind == "relay") {
    if (cfg.relay.empty()) throw UsageError("no relay configured (relay= or AUTHKIT_RELAY or --relay)");
    return std::make_unique<RelayCarrier>(RelayEndpoint::parse(cfg.relay));
  }
  if (o.in.empty() || o.out.empty()) throw UsageError("the file carrier needs --in and --out");
  return std::make_unique<FileCarrier>(o.out, o.in);
}

ConversationId parse_conversation(const std::string& hex)
{
  Bytes b = from_hex(hex);
  if (b.size() != 16) throw UsageError("conversation code must be 32 hex digits");
  ConversationId id{};
  std::copy(b.begin(), b.end(), id.begin());
  return id;
}

// --- protocol driver ---------------------------------------------------------

std::uint64_t wall_seconds()
{
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count());
}

struct Context {
  CliConfig cfg;
  PublicParams params = PublicParams::derive(p256());
  SystemRandom rng;
  std::optional<PeerTrustStore> store;
  std::unique_ptr<SessionManager> manager;

  void open(Bytes own_pk, std::uint64_t timeout_s)
  {
    require_identity(cfg);
    store.emplace(PeerTrustStore::open(cfg.store, cfg.max_attempts));
    manager = std::make_unique<SessionManager>(params, cfg.identity, std::move(own_pk), *store, rng, wall_seconds,
                                               timeout_s);
  }
};

struct DriveResult {
  std::optional<SessionOutcome> outcome;
  double protocol_ms = 0;
};

/// Exchanges envelopes until the session with `peer` ends. `need_secret`
/// is consulted once if the peer opens a run that needs the user's secret.
DriveResult drive(Context& ctx, Carrier& carrier, const std::string& peer, const CarrierOptions& o,
                  const std::function<std::tuple<SecretInput, ConfirmMode, std::optional<Bytes>>()>& need_secret,
                  double protocol_ms)
{
  using clock = std::chrono::steady_clock;
  SessionManager& m = *ctx.manager;
  EnvelopeDeduplicator dedup;
  const auto deadline = clock::now() + std::chrono::milliseconds(static_cast<long long>(o.timeout_s * 1000));
  DriveResult res;
  res.protocol_ms = protocol_ms;
  auto timed = [&](auto&& fn) {
    auto t0 = clock::now();
    auto r = fn();
    res.protocol_ms += std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    return r;
  };

  for (;;) {
    const SessionRecord* rec = m.session(peer);
    if (rec != nullptr && rec->terminal()) {
      res.outcome = rec->outcome;
      return res;
    }
    std::vector<Envelope> inbox;
    try {
      inbox = carrier.receive();
    } catch (const TransportError& e) {
      std::cerr << "relay unreachable, retrying: " << e.what() << '\n';
    }
    for (const auto& env : inbox) {
      if (env.sender_identity != peer || !dedup.first_time(env)) continue;
      HandleResult r = timed([&] { return m.handle_envelope(env); });
      if (r.violation) std::cerr << "ignored a message from " << peer << ": " << *r.violation << '\n';
      std::vector<Envelope> out = std::move(r.outbound);
      rec = m.session(peer);
      if (!r.ignored && !r.violation && out.empty() && rec != nullptr && rec->phase == SessionPhase::AwaitSecret &&
          rec->has_conversation) {
        auto [secret, mode, expected] = need_secret();
        out = timed([&] { return m.provide_secret(peer, std::move(secret), mode, std::move(expected)); });
      }
      for (const auto& e : out) carrier.send(e);
    }
    rec = m.session(peer);
    if (rec != nullptr && rec->terminal()) continue;
    if (clock::now() >= deadline) {
      if (rec == nullptr) return res;
      // Abort whatever is still open, inactive or not.
      m.drop_session(peer);
      res.outcome = SessionOutcome::Timeout;
      return res;
    }
    m.expire();
    std::this_thread::sleep_for(std::chrono::milliseconds(o.poll_ms));
  }
}

int report(Context& ctx, const std::string& peer, const DriveResult& r, const CarrierOptions& o)
{
  if (o.verbose) std::cerr << "protocol work: " << r.protocol_ms << " ms\n";
  if (!r.outcome || *r.outcome == SessionOutcome::Timeout) {
    std::cout << "TIMEOUT: no complete answer from " << peer
              << " in time. This looks like a network failure and is not counted as a failed attempt;"
                 " repeated silent aborts may also be someone testing guesses.\n";
    return kExitTransport;
  }
  if (*r.outcome == SessionOutcome::Accepted) {
    auto entry = ctx.store->lookup(peer);
    std::cout << "peer fingerprint: " << (entry && entry->fingerprint ? entry->fingerprint->hex() : "?") << '\n';
    std::cout << "AUTHENTICATED\n";
    return kExitOk;
  }
  if (*r.outcome == SessionOutcome::AuthenticationFailed) {
    auto entry = ctx.store->lookup(peer);
    std::cout << "FAILED: key confirmation did not match. Either the secrets differ or someone is in the middle.";
    if (entry) {
      std::cout << " Failed attempts with " << peer << ": " << entry->failed_attempts << "/" << ctx.cfg.max_attempts
                << (entry->locked ? " (now locked)" : "");
    }
    std::cout << '\n';
    return kExitAuthFailed;
  }
  std::cout << "ABORTED: protocol violation\n";
  return kExitAuthFailed;
}

ConfirmMode parse_mode(const std::string& s)
{
  if (s == "direct") return ConfirmMode::Direct;
  if (s == "embedded") return ConfirmMode::Embedded;
  throw UsageError("--mode must be direct or embedded");
}

// --- commands ----------------------------------------------------------------

int cmd_keygen(const CliConfig& cfg, const std::string& out, bool force)
{
  fs::path path = out.empty() ? cfg.key_file : fs::path(out);
  KeyPair kp = generate_ed25519();
  write_key_file(path, kp, force);
  std::cout << "wrote " << path.string() << "\nfingerprint: " << fingerprint_of(kp.public_key).hex() << '\n';
  return kExitOk;
}

int cmd_auth_init(Context& ctx, const std::string& peer, const std::string& mode_s, const std::string& peer_key,
                  const SecretOptions& so, const CarrierOptions& o)
{
  ConfirmMode mode = parse_mode(mode_s);
  std::optional<Bytes> expected;
  if (!peer_key.empty()) expected = parse_peer_key(peer_key);
  if (mode == ConfirmMode::Embedded && !expected) throw UsageError("embedded mode needs --peer-key");
  ctx.open(load_public_key(ctx.cfg.key_file), static_cast<std::uint64_t>(o.timeout_s));
  auto carrier = make_carrier(o, ctx.cfg);
  std::string secret = read_secret(so, peer);
  auto t0 = std::chrono::steady_clock::now();
  Envelope first = ctx.manager->start_session(peer, std::move(secret), mode, expected);
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  carrier->bind(first.conversation_id);
  carrier->send(first);
  if (o.kind == "relay") {
    std::cout << "conversation: " << to_hex(first.conversation_id) << std::endl;
  }
  auto no_secret = []() -> std::tuple<SecretInput, ConfirmMode, std::optional<Bytes>> {
    throw ProtocolError("peer asked for a secret in a run we initiated");
  };
  return report(ctx, peer, drive(ctx, *carrier, peer, o, no_secret, ms), o);
}

int cmd_auth_respond(Context& ctx, const std::string& peer, const std::string& mode_s, const std::string& peer_key,
                     const SecretOptions& so, const CarrierOptions& o)
{
  ConfirmMode mode = parse_mode(mode_s);
  std::optional<Bytes> expected;
  if (!peer_key.empty()) expected = parse_peer_key(peer_key);
  ctx.open(load_public_key(ctx.cfg.key_file), static_cast<std::uint64_t>(o.timeout_s));
  auto carrier = make_carrier(o, ctx.cfg);
  if (o.kind == "relay") {
    if (o.conversation.empty()) throw UsageError("responding over the relay needs --conversation CODE");
    carrier->bind(parse_conversation(o.conversation));
  }
  auto ask = [&]() -> std::tuple<SecretInput, ConfirmMode, std::optional<Bytes>> {
    return {read_secret(so, peer), mode, expected};
  };
  return report(ctx, peer, drive(ctx, *carrier, peer, o, ask, 0), o);
}

int cmd_renew(Context& ctx, const std::string& peer, const std::string& new_key, const CarrierOptions& o)
{
  std::optional<Bytes> new_pk;
  if (!new_key.empty()) new_pk = load_public_key(new_key);
  ctx.open(load_public_key(ctx.cfg.key_file), static_cast<std::uint64_t>(o.timeout_s));
  auto carrier = make_carrier(o, ctx.cfg);
  auto t0 = std::chrono::steady_clock::now();
  Envelope first = ctx.manager->renew_chain(peer, new_pk);
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  carrier->bind(first.conversation_id);
  carrier->send(first);
  if (o.kind == "relay") std::cout << "conversation: " << to_hex(first.conversation_id) << std::endl;
  auto no_secret = []() -> std::tuple<SecretInput, ConfirmMode, std::optional<Bytes>> {
    throw ProtocolError("peer asked for a secret during renewal");
  };
  int rc = report(ctx, peer, drive(ctx, *carrier, peer, o, no_secret, ms), o);
  if (rc == kExitOk && new_pk) {
    std::cout << "peer now trusts " << new_key << "; switch your key= setting to it\n";
  }
  return rc;
}

int cmd_status(Context& ctx, const std::string& peer)
{
  require_identity(ctx.cfg);
  ctx.store.emplace(PeerTrustStore::open(ctx.cfg.store, ctx.cfg.max_attempts));
  std::vector<std::string> peers = peer.empty() ? ctx.store->peers() : std::vector<std::string>{peer};
  if (peers.empty()) std::cout << "no peers yet\n";
  for (const auto& p : peers) {
    auto e = ctx.store->lookup(p);
    if (!e) {
      std::cout << p << ": never authenticated\n";
      continue;
    }
    std::cout << p << ": fingerprint " << (e->fingerprint ? e->fingerprint->hex() : "none") << ", chain "
              << e->chain_counter << ", runs " << e->history.size() << ", failed attempts " << e->failed_attempts
              << (e->locked ? ", LOCKED" : "") << '\n';
    for (const auto& inc : e->incidents) std::cout << "  incident: " << inc << '\n';
  }
  return kExitOk;
}

int cmd_reset_lock(Context& ctx, const std::string& peer)
{
  require_identity(ctx.cfg);
  ctx.store.emplace(PeerTrustStore::open(ctx.cfg.store, ctx.cfg.max_attempts));
  ctx.store->reset_lock(peer, wall_seconds());
  std::cout << "lock cleared for " << peer << '\n';
  return kExitOk;
}

int cmd_estimate(unsigned bits, unsigned boundary, unsigned checked, double target)
{
  attack::AttackParams p = attack::AttackParams::from_bits(bits, boundary, checked);
  if (!(target > 0 && target < 1)) throw UsageError("--target-p must be strictly between 0 and 1");
  attack::AttackEstimate est = attack::attack_effort(p, target);
  std::cout << "bits " << p.b << ", boundary " << p.r << " at each end, middle " << p.l << ", checked " << p.u
            << ", unchecked " << p.t() << '\n';
  std::cout << "matching keys per target: " << est.valid_count << '\n';
  if (!est.feasible) {
    std::cout << "q = 1\ninfeasible: every middle bit is checked, no partial preimage exists\n";
    return kExitOk;
  }
  std::printf("q = 1 - 2^%.4f\n", est.log2_one_minus_q);
  std::printf("e = %.4e attempts for success probability %.3g\n", std::exp2(est.log2_e), target);
  std::printf("log2_e = %.3f\n", est.log2_e);
  return kExitOk;
}

int cmd_trustwords(const CliConfig& cfg, const std::string& a, const std::string& b, int count,
                   const std::string& dict_flag)
{
  Fingerprint fa = Fingerprint::from_hex(a);
  Fingerprint fb = Fingerprint::from_hex(b);
  std::string dict_path = dict_flag.empty() ? cfg.dict : dict_flag;
  Dictionary dict = dict_path.empty() || dict_path == "hex" ? Dictionary::hex_test() : Dictionary::load(dict_path);
  TrustwordList list = trustwords(fa, fb, dict, count);
  for (std::size_t i = 0; i < list.words.size(); ++i) std::cout << (i ? " " : "") << list.words[i];
  std::cout << '\n';
  if (count == 5) std::cerr << "warning: five words compare only the first 80 of the 160 fingerprint bits\n";
  return kExitOk;
}

std::atomic<bool> g_stop{false};

int cmd_relay_serve(const std::string& bind, const std::string& dir, const std::string& quota,
                    const std::string& retention)
{
  RelayConfig cfg = RelayConfig::from_env();
  try {
    if (!bind.empty()) {
      RelayEndpoint ep = RelayEndpoint::parse(bind);
      cfg.bind_host = ep.host;
      cfg.port = ep.port;
    }
    if (!dir.empty()) cfg.dir = dir;
    if (!quota.empty()) cfg.quota_bytes = std::stoull(quota);
    if (!retention.empty()) cfg.retention = std::chrono::seconds(std::stoull(retention));
  } catch (const std::logic_error&) {
    throw UsageError("invalid relay option");
  }
  RelayServer server(cfg);
  server.start();
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  std::cout << "relay listening on " << cfg.bind_host << ":" << server.port() << std::endl;
  auto last_gc = std::chrono::steady_clock::now();
  while (!g_stop && server.running()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    if (std::chrono::steady_clock::now() - last_gc > std::chrono::minutes(10)) {
      server.store().collect_garbage();
      last_gc = std::chrono::steady_clock::now();
    }
  }
  server.stop();
  return kExitOk;
}

int cmd_simulate(const std::string& file, bool show_trace)
{
  std::ifstream in(file, std::ios::binary);
  if (!in) throw UsageError("cannot read scenario " + file);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  sim::ScenarioReport r = sim::run_scenario(sim::parse_scenario(text));
  if (show_trace) std::cout << r.trace.serialize() << '\n';
  std::cout << r.render();
  return kExitOk;
}

/// Secrets never come from argv, where shell history and ps would see them.
bool argv_carries_secret(int argc, char** argv)
{
  for (int i = 1; i < argc; ++i) {
    std::string_view a = argv[i];
    if (a == "--") break;
    std::string_view name = a.substr(0, a.find('='));
    if (name == "--secret" || name == "--password" || name == "--passphrase") return true;
  }
  return false;
}

}  // namespace

int main(int argc, char** argv)
{
  if (argv_carries_secret(argc, argv)) {
    std::cerr << "refusing to take a secret on the command line; use the prompt, --secret-fd or --secret-file\n";
    return kExitUsage;
  }

  CLI::App app{"Password-authenticated key verification for end-to-end email"};
  app.require_subcommand(1);
  std::string config_path;
  std::map<std::string, std::string> flags;
  app.add_option("--config", config_path, "key=value config file (also AUTHKIT_CONFIG)");
  app.add_option("--identity", flags["identity"], "own identity, e.g. an email address");
  app.add_option("--key", flags["key"], "own key file");
  app.add_option("--store", flags["store"], "trust store journal");
  app.add_option("--relay", flags["relay"], "relay host:port");
  app.add_option("--max-attempts", flags["max_attempts"], "failed runs before a peer is locked");

  std::string out_path;
  bool force = false;
  auto* keygen = app.add_subcommand("keygen", "generate an Ed25519 key pair");
  keygen->add_option("--out", out_path, "key file (default: key= setting)");
  keygen->add_flag("--force", force, "overwrite an existing file");

  std::string peer, mode = "direct", peer_key, new_key;
  SecretOptions so;
  CarrierOptions co;
  auto add_carrier = [&](CLI::App* sub) {
    sub->add_option("--carrier", co.kind, "relay or file")->check(CLI::IsMember({"relay", "file"}));
    sub->add_option("--in", co.in, "file carrier: inbox file to watch");
    sub->add_option("--out", co.out, "file carrier: outbox file to append to");
    sub->add_option("--timeout", co.timeout_s, "seconds to wait for the peer");
    sub->add_option("--poll-ms", co.poll_ms, "polling interval")->check(CLI::Range(1, 600000));
    sub->add_flag("--verbose", co.verbose, "report protocol timing");
  };
  auto add_secret = [&](CLI::App* sub) {
    sub->add_option("--secret-fd", so.fd, "read the secret from this file descriptor");
    sub->add_option("--secret-file", so.file, "read the secret from this file");
  };

  auto* auth = app.add_subcommand("auth", "authenticate a peer");
  auth->require_subcommand(1);
  auto* init = auth->add_subcommand("init", "start a run");
  init->add_option("peer", peer)->required();
  init->add_option("--mode", mode, "direct or embedded")->check(CLI::IsMember({"direct", "embedded"}));
  init->add_option("--peer-key", peer_key, "peer's public key (hex or key file)");
  add_carrier(init);
  add_secret(init);
  auto* respond = auth->add_subcommand("respond", "answer a peer's run");
  respond->add_option("peer", peer)->required();
  respond->add_option("--mode", mode, "direct or embedded")->check(CLI::IsMember({"direct", "embedded"}));
  respond->add_option("--peer-key", peer_key, "peer's public key (hex or key file)");
  respond->add_option("--conversation", co.conversation, "conversation code printed by the initiator");
  add_carrier(respond);
  add_secret(respond);
  auto* status = auth->add_subcommand("status", "show trust store entries");
  status->add_option("peer", peer);

  auto* renew = app.add_subcommand("renew", "automated re-authentication from the last run's key");
  renew->add_option("peer", peer)->required();
  renew->add_option("--new-key", new_key, "key file to enrol in the same run");
  add_carrier(renew);

  auto* reset = app.add_subcommand("reset-lock", "clear a peer's failed-attempt lock");
  reset->add_option("peer", peer)->required();

  unsigned bits = 0, boundary = 0, checked = 0;
  double target = 0.5;
  auto* estimate = app.add_subcommand("estimate", "cost of a partial-preimage attack on lazy comparison");
  estimate->add_option("--bits", bits, "fingerprint bits")->required();
  estimate->add_option("--boundary", boundary, "bits checked at each end")->required();
  estimate->add_option("--checked-middle", checked, "middle bits the user checks")->required();
  estimate->add_option("--target-p", target, "attacker's target success probability");

  std::string fpr_a, fpr_b, dict;
  int count = 10;
  auto* words = app.add_subcommand("trustwords", "words to compare out of band");
  words->add_option("fpr_a", fpr_a)->required();
  words->add_option("fpr_b", fpr_b)->required();
  words->add_option("--count", count)->check(CLI::IsMember({5, 10}));
  words->add_option("--dict", dict, "word list, one per line, 65536 lines (default: hex)");

  std::string bind, dir, quota, retention;
  auto* relay = app.add_subcommand("relay", "store-and-forward relay");
  relay->require_subcommand(1);
  auto* serve = relay->add_subcommand("serve", "run the relay");
  serve->add_option("--bind", bind, "host:port (also RELAY_BIND)");
  serve->add_option("--dir", dir, "storage directory (also RELAY_DIR)");
  serve->add_option("--quota", quota, "bytes per mailbox (also RELAY_QUOTA)");
  serve->add_option("--retention", retention, "seconds to keep entries (also RELAY_RETENTION)");

  std::string scenario;
  bool show_trace = false;
  auto* simulate = app.add_subcommand("simulate", "run an adversary scenario script");
  simulate->add_option("scenario", scenario)->required();
  simulate->add_flag("--trace", show_trace, "print the full event trace");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    Context ctx;
    ctx.cfg = resolve_config(config_path, flags);
    if (*keygen) return cmd_keygen(ctx.cfg, out_path, force);
    if (*init) return cmd_auth_init(ctx, peer, mode, peer_key, so, co);
    if (*respond) return cmd_auth_respond(ctx, peer, mode, peer_key, so, co);
    if (*status) return cmd_status(ctx, peer);
    if (*renew) return cmd_renew(ctx, peer, new_key, co);
    if (*reset) return cmd_reset_lock(ctx, peer);
    if (*estimate) return cmd_estimate(bits, boundary, checked, target);
    if (*words) return cmd_trustwords(ctx.cfg, fpr_a, fpr_b, count, dict);
    if (*serve) return cmd_relay_serve(bind, dir, quota, retention);
    if (*simulate) return cmd_simulate(scenario, show_trace);
  } catch (const PeerLocked& e) {
    std::cerr << "refused: " << e.what() << '\n';
    return kExitAuthFailed;
  } catch (const NoChainRoot& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitTransport;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitTransport;
  }
  return kExitUsage;
}
