#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "authkit/relay_client.hpp"

namespace authkit {

struct RelayConfig {
  std::string bind_host = "127.0.0.1";
  std::uint16_t port = 7447;
  std::filesystem::path dir = "relay-data";
  std::uint64_t quota_bytes = 1u << 20;
  std::chrono::seconds retention = std::chrono::hours(24 * 30);

  /// Applies RELAY_BIND (host:port), RELAY_DIR, RELAY_QUOTA (bytes) and
  /// RELAY_RETENTION (seconds) on top of `base`.
  static RelayConfig from_env(RelayConfig base);
  static RelayConfig from_env() { return from_env(RelayConfig{}); }
};

/// Seconds since the epoch; injectable for retention tests.
using WallClock = std::function<std::uint64_t()>;
WallClock system_wall_clock();

/// Durable store-and-forward mailboxes. Entries are opaque bytes; nothing is
/// parsed beyond its size.
///
/// Each mailbox is an append-only journal under
/// `dir/<first two hex digits>/<mailbox hex>.journal`. Every record is
/// fsync'd before the call returns, and on load a torn or corrupt tail is
/// truncated back to the last complete record.
class MailboxStore {
public:
  MailboxStore(std::filesystem::path dir, std::uint64_t quota_bytes, std::chrono::seconds retention,
               WallClock clock = system_wall_clock());

  /// Throws RelayFull past the quota, ValidationError above 64 KiB.
  std::uint64_t post(const MailboxId& mailbox, ByteView data);
  /// Entries with seq > after_seq, in order. Unknown mailboxes are empty.
  std::vector<StoredEntry> fetch(const MailboxId& mailbox, std::uint64_t after_seq);
  /// Drops entries with seq <= upto_seq.
  void ack(const MailboxId& mailbox, std::uint64_t upto_seq);

  /// Drops entries older than the retention window; returns how many.
  std::size_t collect_garbage();

  std::filesystem::path journal_path(const MailboxId& mailbox) const;

private:
  struct Mailbox;
  std::shared_ptr<Mailbox> open(const MailboxId& mailbox, bool create);
  std::size_t expire(Mailbox& box);

  std::filesystem::path dir_;
  std::uint64_t quota_;
  std::chrono::seconds retention_;
  WallClock clock_;
  std::mutex registry_mutex_;
  std::map<MailboxId, std::shared_ptr<Mailbox>> boxes_;
};

/// TCP front end for a MailboxStore speaking the relay_wire protocol. No
/// client authentication: the relay is untrusted and only enforces quotas.
class RelayServer {
public:
  explicit RelayServer(RelayConfig config);
  ~RelayServer();
  RelayServer(const RelayServer&) = delete;
  RelayServer& operator=(const RelayServer&) = delete;

  /// Binds and starts accepting in a background thread. Throws
  /// EnvironmentError on bind or storage failure.
  void start();
  /// Actual port, useful when configured with port 0.
  std::uint16_t port() const { return port_; }
  void stop();
  bool running() const { return running_; }

  MailboxStore& store() { return store_; }

private:
  void accept_loop();
  void serve_connection(int fd, std::atomic<bool>& done);
  void reap_finished();

  RelayConfig config_;
  MailboxStore store_;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  int listen_fd_ = -1;
  std::thread acceptor_;
  std::mutex conn_mutex_;
  struct Worker {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };
  std::vector<Worker> workers_;
  std::vector<int> open_fds_;
};

}  // namespace authkit
