#include "authkit/trust_store.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>

#include <fcntl.h>
#include <unistd.h>

#include "authkit/errors.hpp"

namespace authkit {

namespace fs = std::filesystem;

namespace {
constexpr std::size_t kMaxRecord = 64 * 1024;

void append_synced(const fs::path& path, ByteView data)
{
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0600);
  if (fd < 0) throw EnvironmentError("cannot open trust store " + path.string() + ": " + std::strerror(errno));
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      throw EnvironmentError("trust store write failed");
    }
    off += static_cast<std::size_t>(n);
  }
  ::fdatasync(fd);
  ::close(fd);
}
}  // namespace

PeerTrustStore::PeerTrustStore(std::uint32_t max_attempts) : max_attempts_(max_attempts)
{
  if (max_attempts_ == 0) throw ValidationError("max_attempts must be at least 1");
}

PeerTrustStore::PeerTrustStore(PeerTrustStore&& other) noexcept
    : max_attempts_(other.max_attempts_), peers_(std::move(other.peers_)), journal_(std::move(other.journal_))
{
}

PeerTrustStore PeerTrustStore::open(const fs::path& journal, std::uint32_t max_attempts)
{
  PeerTrustStore store(max_attempts);
  if (fs::exists(journal)) {
    std::ifstream in(journal, std::ios::binary);
    Bytes raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ByteReader r(raw);
    std::size_t good = 0;
    while (!r.done()) {
      try {
        ByteView rec = r.framed(kMaxRecord);
        ByteReader rr(rec);
        std::uint8_t version = rr.u8();
        if (version != kJournalVersion) throw ValidationError("unknown trust store record version");
        auto ev = static_cast<Event>(rr.u8());
        std::uint64_t ts = rr.u64();
        ByteView peer = rr.framed(1024);
        store.apply(ev, std::string(peer.begin(), peer.end()), rec.subspan(rr.offset()), ts);
        good = r.offset();
      } catch (const ValidationError&) {
        break;
      }
    }
    if (good != raw.size() && ::truncate(journal.c_str(), static_cast<off_t>(good)) != 0) {
      throw EnvironmentError("cannot truncate torn trust store " + journal.string());
    }
  } else if (journal.has_parent_path()) {
    fs::create_directories(journal.parent_path());
  }
  store.journal_ = journal;
  return store;
}

void PeerTrustStore::set_max_attempts(std::uint32_t n)
{
  if (n == 0) throw ValidationError("max_attempts must be at least 1");
  std::lock_guard lock(mutex_);
  max_attempts_ = n;
  for (auto& [_, e] : peers_) e.locked = e.failed_attempts >= max_attempts_;
}

void PeerTrustStore::apply(Event ev, const std::string& peer, ByteView rest, std::uint64_t timestamp)
{
  PeerEntry& e = peers_[peer];
  ByteReader r(rest);
  switch (ev) {
    case Event::Authenticated:
    case Event::Renewed: {
      Fingerprint fpr = Fingerprint::from_bytes(r.raw(Fingerprint::kSize));
      ByteView key = r.framed(256);
      std::uint64_t counter = r.u64();
      e.fingerprint = fpr;
      e.chain_key = SecureBytes(key);
      e.chain_counter = counter;
      e.history.push_back(RenewalRecord{counter, fpr, timestamp});
      e.failed_attempts = 0;
      e.locked = false;
      break;
    }
    case Event::FailedAttempt:
      ++e.failed_attempts;
      e.locked = e.failed_attempts >= max_attempts_;
      break;
    case Event::LockReset:
      e.failed_attempts = 0;
      e.locked = false;
      break;
    case Event::Incident: {
      ByteView what = r.framed(4096);
      e.incidents.emplace_back(what.begin(), what.end());
      break;
    }
    default:
      throw ValidationError("unknown trust store event");
  }
}

void PeerTrustStore::persist(Event ev, std::uint64_t timestamp, ByteView payload)
{
  if (!journal_) return;
  ByteWriter rec;
  rec.u8(kJournalVersion);
  rec.u8(static_cast<std::uint8_t>(ev));
  rec.u64(timestamp);
  rec.raw(payload);
  ByteWriter framed;
  framed.framed(rec.bytes());
  append_synced(*journal_, framed.bytes());
}

GuessBudget PeerTrustStore::enforce_guess_budget(const std::string& peer) const
{
  std::lock_guard lock(mutex_);
  auto it = peers_.find(peer);
  if (it != peers_.end() && it->second.locked) return GuessBudget::Locked;
  return GuessBudget::Allowed;
}

namespace {
Bytes chain_payload(const std::string& peer, const Fingerprint& fpr, ByteView key, std::uint64_t counter)
{
  ByteWriter w;
  w.framed(peer);
  w.raw(fpr.view());
  w.framed(key);
  w.u64(counter);
  return std::move(w).take();
}

Bytes peer_payload(const std::string& peer)
{
  ByteWriter w;
  w.framed(peer);
  return std::move(w).take();
}
}  // namespace

void PeerTrustStore::record_authenticated(const std::string& peer, const Fingerprint& fpr, ByteView chain_key,
                                          std::uint64_t now)
{
  std::lock_guard lock(mutex_);
  Bytes payload = chain_payload(peer, fpr, chain_key, 0);
  persist(Event::Authenticated, now, payload);
  ByteReader r(payload);
  r.framed(1024);
  apply(Event::Authenticated, peer, ByteView(payload).subspan(r.offset()), now);
  std::fill(payload.begin(), payload.end(), 0);
}

void PeerTrustStore::record_renewal(const std::string& peer, const Fingerprint& fpr, ByteView chain_key,
                                    std::uint64_t now)
{
  std::lock_guard lock(mutex_);
  std::uint64_t next = peers_[peer].chain_counter + 1;
  Bytes payload = chain_payload(peer, fpr, chain_key, next);
  persist(Event::Renewed, now, payload);
  ByteReader r(payload);
  r.framed(1024);
  apply(Event::Renewed, peer, ByteView(payload).subspan(r.offset()), now);
  std::fill(payload.begin(), payload.end(), 0);
}

void PeerTrustStore::record_failure(const std::string& peer, std::uint64_t now)
{
  std::lock_guard lock(mutex_);
  persist(Event::FailedAttempt, now, peer_payload(peer));
  apply(Event::FailedAttempt, peer, {}, now);
}

void PeerTrustStore::reset_lock(const std::string& peer, std::uint64_t now)
{
  std::lock_guard lock(mutex_);
  persist(Event::LockReset, now, peer_payload(peer));
  apply(Event::LockReset, peer, {}, now);
}

void PeerTrustStore::record_incident(const std::string& peer, const std::string& what, std::uint64_t now)
{
  std::lock_guard lock(mutex_);
  ByteWriter rest;
  rest.framed(what);
  ByteWriter w;
  w.framed(peer);
  w.raw(rest.bytes());
  persist(Event::Incident, now, w.bytes());
  apply(Event::Incident, peer, rest.bytes(), now);
}

std::optional<PeerEntry> PeerTrustStore::lookup(const std::string& peer) const
{
  std::lock_guard lock(mutex_);
  auto it = peers_.find(peer);
  if (it == peers_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> PeerTrustStore::peers() const
{
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [name, _] : peers_) out.push_back(name);
  return out;
}

}  // namespace authkit
