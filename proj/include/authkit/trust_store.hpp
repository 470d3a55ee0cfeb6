#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "authkit/bytes.hpp"
#include "authkit/fingerprint.hpp"

namespace authkit {

struct RenewalRecord {
  std::uint64_t chain_counter = 0;
  Fingerprint fingerprint;
  std::uint64_t timestamp = 0;
};

struct PeerEntry {
  std::optional<Fingerprint> fingerprint;
  /// Key of the last accepted run; seeds the next automated renewal.
  SecureBytes chain_key;
  std::uint64_t chain_counter = 0;
  /// Initial authentication followed by every renewal. Append-only.
  std::vector<RenewalRecord> history;
  std::uint32_t failed_attempts = 0;
  bool locked = false;
  std::vector<std::string> incidents;

  bool has_chain() const { return !chain_key.empty(); }
};

enum class GuessBudget { Allowed, Locked };

/// Per-peer authentication state, optionally persisted to a journal.
///
/// Journal layout, one record per event:
///
///   len:4 BE | version:1 | event_type:1 | timestamp:8 BE | payload
///
/// All mutations go through one mutex; lookups return copies.
class PeerTrustStore {
public:
  enum class Event : std::uint8_t {
    Authenticated = 1,
    Renewed = 2,
    FailedAttempt = 3,
    LockReset = 4,
    Incident = 5,
  };
  static constexpr std::uint8_t kJournalVersion = 1;

  /// In-memory only.
  explicit PeerTrustStore(std::uint32_t max_attempts = 3);
  /// Replays `journal` if it exists and appends every later event to it. A
  /// torn final record is ignored and truncated.
  static PeerTrustStore open(const std::filesystem::path& journal, std::uint32_t max_attempts = 3);

  PeerTrustStore(PeerTrustStore&& other) noexcept;
  PeerTrustStore& operator=(PeerTrustStore&&) = delete;

  std::uint32_t max_attempts() const { return max_attempts_; }
  void set_max_attempts(std::uint32_t n);

  /// Locked once max_attempts consecutive verified mismatches accumulate.
  GuessBudget enforce_guess_budget(const std::string& peer) const;

  /// Initial authentication from a user secret: restarts the chain at 0.
  void record_authenticated(const std::string& peer, const Fingerprint& fpr, ByteView chain_key, std::uint64_t now);
  /// Automated renewal: counter + 1, new chain key, possibly new key.
  void record_renewal(const std::string& peer, const Fingerprint& fpr, ByteView chain_key, std::uint64_t now);
  void record_failure(const std::string& peer, std::uint64_t now);
  void reset_lock(const std::string& peer, std::uint64_t now);
  void record_incident(const std::string& peer, const std::string& what, std::uint64_t now);

  std::optional<PeerEntry> lookup(const std::string& peer) const;
  std::vector<std::string> peers() const;

private:
  void apply(Event ev, const std::string& peer, ByteView rest, std::uint64_t timestamp);
  void persist(Event ev, std::uint64_t timestamp, ByteView payload);

  std::uint32_t max_attempts_;
  mutable std::mutex mutex_;
  std::map<std::string, PeerEntry> peers_;
  std::optional<std::filesystem::path> journal_;
};

}  // namespace authkit
