#include "authkit/relay.hpp"

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <fstream>

#include <fcntl.h>
#include <sys/socket.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include "authkit/errors.hpp"
#include "net.hpp"

namespace authkit {

namespace fs = std::filesystem;

namespace {

constexpr std::uint8_t kRecordMagic = 0xA7;
constexpr std::uint8_t kRecordEntry = 1;
constexpr std::uint8_t kRecordAck = 2;
constexpr std::uint8_t kRecordBase = 3;
constexpr std::uintmax_t kCompactThreshold = 64 * 1024;
constexpr auto kIdleTimeout = std::chrono::seconds(30);

Bytes encode_record(std::uint8_t kind, std::uint64_t seq, std::uint64_t time, ByteView data)
{
  ByteWriter w;
  w.u8(kRecordMagic);
  w.u8(kind);
  w.u64(seq);
  w.u64(time);
  w.framed(data);
  Bytes out = std::move(w).take();
  uLong crc = crc32(0L, out.data(), static_cast<uInt>(out.size()));
  ByteWriter tail;
  tail.u32(static_cast<std::uint32_t>(crc));
  out.insert(out.end(), tail.bytes().begin(), tail.bytes().end());
  return out;
}

void write_fully(int fd, ByteView data)
{
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw EnvironmentError(std::string("journal write failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

void sync_fd(int fd)
{
  if (::fdatasync(fd) != 0) throw EnvironmentError(std::string("journal sync failed: ") + std::strerror(errno));
}

void sync_dir(const fs::path& dir)
{
  int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

std::uint64_t parse_u64_env(const char* name, std::uint64_t fallback)
{
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return fallback;
  char* end = nullptr;
  errno = 0;
  unsigned long long parsed = std::strtoull(v, &end, 10);
  if (errno != 0 || end == v || *end != '\0') {
    throw ValidationError(std::string("invalid ") + name + ": " + v);
  }
  return parsed;
}

void respond(const net::Socket& s, relay_wire::Status status, ByteView body)
{
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(status));
  w.framed(body);
  net::write_all(s, w.bytes(), kIdleTimeout);
}

void respond_error(const net::Socket& s, relay_wire::Status status, const std::string& message)
{
  respond(s, status, as_bytes(message));
}

}  // namespace

RelayConfig RelayConfig::from_env(RelayConfig base)
{
  if (const char* bind = std::getenv("RELAY_BIND"); bind != nullptr && *bind != '\0') {
    RelayEndpoint ep = RelayEndpoint::parse(bind);
    base.bind_host = ep.host;
    base.port = ep.port;
  }
  if (const char* dir = std::getenv("RELAY_DIR"); dir != nullptr && *dir != '\0') base.dir = dir;
  base.quota_bytes = parse_u64_env("RELAY_QUOTA", base.quota_bytes);
  base.retention =
      std::chrono::seconds(parse_u64_env("RELAY_RETENTION", static_cast<std::uint64_t>(base.retention.count())));
  return base;
}

WallClock system_wall_clock()
{
  return [] {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
            .count());
  };
}

struct MailboxStore::Mailbox {
  std::shared_mutex mutex;
  fs::path path;
  int fd = -1;
  std::deque<StoredEntry> entries;
  std::uint64_t last_seq = 0;
  std::uint64_t bytes = 0;

  ~Mailbox()
  {
    if (fd >= 0) ::close(fd);
  }

  void open_for_append()
  {
    if (fd >= 0) return;
    fs::create_directories(path.parent_path());
    fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0600);
    if (fd < 0) throw EnvironmentError("cannot open journal " + path.string() + ": " + std::strerror(errno));
  }

  void append(ByteView record)
  {
    open_for_append();
    write_fully(fd, record);
    sync_fd(fd);
  }

  /// Replays the journal; truncates a torn tail.
  void load(std::uint64_t now, std::chrono::seconds retention)
  {
    std::ifstream in(path, std::ios::binary);
    Bytes raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t good = 0;
    ByteReader r(raw);
    while (!r.done()) {
      try {
        std::size_t start = r.offset();
        if (r.u8() != kRecordMagic) break;
        std::uint8_t kind = r.u8();
        std::uint64_t seq = r.u64();
        std::uint64_t time = r.u64();
        ByteView data = r.framed(relay_wire::kMaxRequestBody);
        std::uint32_t stored_crc = r.u32();
        uLong crc = crc32(0L, raw.data() + start, static_cast<uInt>(r.offset() - start - 4));
        if (static_cast<std::uint32_t>(crc) != stored_crc) break;
        if (kind == kRecordEntry && seq > last_seq) {
          entries.push_back(StoredEntry{seq, time, Bytes(data.begin(), data.end())});
          bytes += data.size();
          last_seq = seq;
        } else if (kind == kRecordAck) {
          while (!entries.empty() && entries.front().seq <= seq) {
            bytes -= entries.front().data.size();
            entries.pop_front();
          }
        } else if (kind == kRecordBase) {
          last_seq = std::max(last_seq, seq);
        } else {
          break;
        }
        good = r.offset();
      } catch (const ValidationError&) {
        break;
      }
    }
    if (good != raw.size()) {
      if (::truncate(path.c_str(), static_cast<off_t>(good)) != 0) {
        throw EnvironmentError("cannot truncate torn journal " + path.string());
      }
    }
    std::erase_if(entries, [&](const StoredEntry& e) {
      bool expired = e.received_at + static_cast<std::uint64_t>(retention.count()) < now;
      if (expired) bytes -= e.data.size();
      return expired;
    });
  }

  /// Rewrites the journal as a single base record once nothing is pending.
  void compact_if_idle()
  {
    if (!entries.empty()) return;
    std::error_code ec;
    if (fs::file_size(path, ec) < kCompactThreshold || ec) return;
    fs::path tmp = path;
    tmp += ".tmp";
    int tfd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
    if (tfd < 0) return;
    Bytes rec = encode_record(kRecordBase, last_seq, 0, {});
    write_fully(tfd, rec);
    sync_fd(tfd);
    ::close(tfd);
    fs::rename(tmp, path);
    sync_dir(path.parent_path());
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
};

MailboxStore::MailboxStore(fs::path dir, std::uint64_t quota_bytes, std::chrono::seconds retention, WallClock clock)
    : dir_(std::move(dir)), quota_(quota_bytes), retention_(retention), clock_(std::move(clock))
{
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw EnvironmentError("cannot create relay directory " + dir_.string() + ": " + ec.message());
}

fs::path MailboxStore::journal_path(const MailboxId& mailbox) const
{
  std::string hex = to_hex(mailbox);
  return dir_ / hex.substr(0, 2) / (hex + ".journal");
}

std::shared_ptr<MailboxStore::Mailbox> MailboxStore::open(const MailboxId& mailbox, bool create)
{
  std::lock_guard lock(registry_mutex_);
  if (auto it = boxes_.find(mailbox); it != boxes_.end()) return it->second;
  fs::path path = journal_path(mailbox);
  if (!create && !fs::exists(path)) return nullptr;
  auto box = std::make_shared<Mailbox>();
  box->path = path;
  box->load(clock_(), retention_);
  boxes_.emplace(mailbox, box);
  return box;
}

std::size_t MailboxStore::expire(Mailbox& box)
{
  const std::uint64_t now = clock_();
  std::size_t dropped = 0;
  while (!box.entries.empty() &&
         box.entries.front().received_at + static_cast<std::uint64_t>(retention_.count()) < now) {
    box.bytes -= box.entries.front().data.size();
    box.entries.pop_front();
    ++dropped;
  }
  return dropped;
}

std::uint64_t MailboxStore::post(const MailboxId& mailbox, ByteView data)
{
  if (data.size() > relay_wire::kMaxRequestBody) throw ValidationError("entry exceeds 64 KiB");
  auto box = open(mailbox, true);
  std::unique_lock lock(box->mutex);
  expire(*box);
  if (box->bytes + data.size() > quota_) {
    throw RelayFull("mailbox holds " + std::to_string(box->bytes) + " of " + std::to_string(quota_) + " bytes");
  }
  const std::uint64_t seq = box->last_seq + 1;
  const std::uint64_t now = clock_();
  box->append(encode_record(kRecordEntry, seq, now, data));
  box->last_seq = seq;
  box->bytes += data.size();
  box->entries.push_back(StoredEntry{seq, now, Bytes(data.begin(), data.end())});
  return seq;
}

std::vector<StoredEntry> MailboxStore::fetch(const MailboxId& mailbox, std::uint64_t after_seq)
{
  auto box = open(mailbox, false);
  if (!box) return {};
  {
    std::unique_lock lock(box->mutex);
    expire(*box);
  }
  std::shared_lock lock(box->mutex);
  std::vector<StoredEntry> out;
  for (const auto& e : box->entries) {
    if (e.seq > after_seq) out.push_back(e);
  }
  return out;
}

void MailboxStore::ack(const MailboxId& mailbox, std::uint64_t upto_seq)
{
  auto box = open(mailbox, false);
  if (!box) return;
  std::unique_lock lock(box->mutex);
  box->append(encode_record(kRecordAck, upto_seq, clock_(), {}));
  while (!box->entries.empty() && box->entries.front().seq <= upto_seq) {
    box->bytes -= box->entries.front().data.size();
    box->entries.pop_front();
  }
  box->compact_if_idle();
}

std::size_t MailboxStore::collect_garbage()
{
  std::vector<std::shared_ptr<Mailbox>> boxes;
  {
    std::lock_guard lock(registry_mutex_);
    for (auto& [id, box] : boxes_) boxes.push_back(box);
  }
  std::size_t dropped = 0;
  for (auto& box : boxes) {
    std::unique_lock lock(box->mutex);
    dropped += expire(*box);
  }
  return dropped;
}

RelayServer::RelayServer(RelayConfig config)
    : config_(std::move(config)), store_(config_.dir, config_.quota_bytes, config_.retention)
{
}

RelayServer::~RelayServer()
{
  stop();
}

void RelayServer::start()
{
  net::Socket listener = net::listen_tcp(config_.bind_host, config_.port);
  port_ = net::local_port(listener);
  listen_fd_ = listener.fd();
  // Ownership moves to the acceptor thread; stop() shuts the fd down.
  running_ = true;
  acceptor_ = std::thread([this, l = std::move(listener)]() mutable {
    accept_loop();
    l.close();
  });
}

void RelayServer::accept_loop()
{
  while (running_) {
    int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      break;
    }
    std::lock_guard lock(conn_mutex_);
    if (!running_) {
      ::close(fd);
      break;
    }
    reap_finished();
    open_fds_.push_back(fd);
    auto done = std::make_shared<std::atomic<bool>>(false);
    workers_.push_back(Worker{std::thread([this, fd, done] { serve_connection(fd, *done); }), done});
  }
}

void RelayServer::reap_finished()
{
  std::erase_if(workers_, [](Worker& w) {
    if (!*w.done) return false;
    w.thread.join();
    return true;
  });
}

void RelayServer::serve_connection(int fd, std::atomic<bool>& done)
{
  using relay_wire::Op;
  using relay_wire::Status;
  net::Socket s(fd);
  try {
    for (;;) {
      std::uint8_t op = 0;
      if (!net::read_exact_or_eof(s, &op, 1, kIdleTimeout)) break;
      MailboxId mailbox{};
      net::read_exact(s, mailbox.data(), mailbox.size(), kIdleTimeout);
      if (op == static_cast<std::uint8_t>(Op::Post)) {
        std::uint8_t len_bytes[4];
        net::read_exact(s, len_bytes, 4, kIdleTimeout);
        std::uint32_t len = std::uint32_t{len_bytes[0]} << 24 | std::uint32_t{len_bytes[1]} << 16 |
                            std::uint32_t{len_bytes[2]} << 8 | len_bytes[3];
        if (len > relay_wire::kMaxRequestBody) {
          respond_error(s, Status::TooLarge, "entry exceeds 64 KiB");
          break;
        }
        Bytes data(len);
        net::read_exact(s, data.data(), data.size(), kIdleTimeout);
        try {
          ByteWriter w;
          w.u64(store_.post(mailbox, data));
          respond(s, Status::Ok, w.bytes());
        } catch (const RelayFull& e) {
          respond_error(s, Status::RelayFull, e.what());
        }
      } else if (op == static_cast<std::uint8_t>(Op::Fetch)) {
        std::uint8_t seq_bytes[8];
        net::read_exact(s, seq_bytes, 8, kIdleTimeout);
        ByteReader r(seq_bytes);
        auto entries = store_.fetch(mailbox, r.u64());
        ByteWriter w;
        std::size_t budget = relay_wire::kMaxResponseBody - 4;
        std::vector<const StoredEntry*> sent;
        for (const auto& e : entries) {
          std::size_t need = 8 + 8 + 4 + e.data.size();
          if (need > budget) break;
          budget -= need;
          sent.push_back(&e);
        }
        w.u32(static_cast<std::uint32_t>(sent.size()));
        for (const auto* e : sent) {
          w.u64(e->seq);
          w.u64(e->received_at);
          w.framed(e->data);
        }
        respond(s, Status::Ok, w.bytes());
      } else if (op == static_cast<std::uint8_t>(Op::Ack)) {
        std::uint8_t seq_bytes[8];
        net::read_exact(s, seq_bytes, 8, kIdleTimeout);
        ByteReader r(seq_bytes);
        store_.ack(mailbox, r.u64());
        respond(s, Status::Ok, {});
      } else {
        respond_error(s, Status::BadRequest, "unknown op " + std::to_string(op));
        break;
      }
    }
  } catch (const TransportError&) {
    // Client went away or stalled.
  } catch (const std::exception& e) {
    try {
      respond_error(s, Status::ServerError, e.what());
    } catch (...) {
    }
  }
  std::lock_guard lock(conn_mutex_);
  std::erase(open_fds_, fd);
  done = true;
}

void RelayServer::stop()
{
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<Worker> workers;
  {
    std::lock_guard lock(conn_mutex_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& w : workers) {
    if (w.thread.joinable()) w.thread.join();
  }
}

}  // namespace authkit
