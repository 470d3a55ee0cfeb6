#include "authkit/relay_client.hpp"

#include <cerrno>
#include <cstring>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "authkit/crypto.hpp"
#include "authkit/errors.hpp"
#include "net.hpp"

namespace authkit {

namespace net {

Socket& Socket::operator=(Socket&& o) noexcept
{
  if (this != &o) {
    close();
    fd_ = o.fd_;
    o.fd_ = -1;
  }
  return *this;
}

void Socket::close()
{
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Socket::shutdown()
{
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

namespace {

bool wait_for(int fd, short events, std::chrono::milliseconds timeout)
{
  pollfd p{fd, events, 0};
  for (;;) {
    int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc < 0 && errno == EINTR) continue;
    return rc > 0;
  }
}

addrinfo* resolve(const std::string& host, std::uint16_t port, bool passive)
{
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  std::string service = std::to_string(port);
  int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res);
  if (rc != 0) return nullptr;
  return res;
}

}  // namespace

Socket connect_tcp(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout)
{
  addrinfo* res = resolve(host, port, false);
  if (res == nullptr) throw TransportError("cannot resolve relay host " + host);
  std::string last_error = "no addresses";
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
    if (!s.valid()) continue;
    int flags = ::fcntl(s.fd(), F_GETFL, 0);
    ::fcntl(s.fd(), F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(s.fd(), ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno != EINPROGRESS) {
      last_error = std::strerror(errno);
      continue;
    }
    if (rc != 0) {
      if (!wait_for(s.fd(), POLLOUT, timeout)) {
        last_error = "connect timed out";
        continue;
      }
      int err = 0;
      socklen_t len = sizeof err;
      ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
      if (err != 0) {
        last_error = std::strerror(err);
        continue;
      }
    }
    int one = 1;
    ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    ::freeaddrinfo(res);
    return s;
  }
  ::freeaddrinfo(res);
  throw TransportError("cannot connect to relay " + host + ":" + std::to_string(port) + ": " + last_error);
}

Socket listen_tcp(const std::string& host, std::uint16_t port)
{
  addrinfo* res = resolve(host, port, true);
  if (res == nullptr) throw EnvironmentError("cannot resolve bind address " + host);
  std::string last_error = "no addresses";
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
    if (!s.valid()) continue;
    int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(s.fd(), ai->ai_addr, ai->ai_addrlen) != 0 || ::listen(s.fd(), 64) != 0) {
      last_error = std::strerror(errno);
      continue;
    }
    ::freeaddrinfo(res);
    return s;
  }
  ::freeaddrinfo(res);
  throw EnvironmentError("cannot bind " + host + ":" + std::to_string(port) + ": " + last_error);
}

std::uint16_t local_port(const Socket& s)
{
  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  if (::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) return 0;
  if (addr.ss_family == AF_INET) return ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  if (addr.ss_family == AF_INET6) return ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
  return 0;
}

void write_all(const Socket& s, ByteView data, std::chrono::milliseconds timeout)
{
  std::size_t off = 0;
  while (off < data.size()) {
    if (!wait_for(s.fd(), POLLOUT, timeout)) throw TransportError("write timed out");
    ssize_t n = ::send(s.fd(), data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw TransportError(std::string("write failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

bool read_exact_or_eof(const Socket& s, std::uint8_t* out, std::size_t n, std::chrono::milliseconds timeout)
{
  std::size_t off = 0;
  while (off < n) {
    if (!wait_for(s.fd(), POLLIN, timeout)) throw TransportError("read timed out");
    ssize_t got = ::recv(s.fd(), out + off, n - off, 0);
    if (got < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw TransportError(std::string("read failed: ") + std::strerror(errno));
    }
    if (got == 0) {
      if (off == 0) return false;
      throw TransportError("connection closed mid-message");
    }
    off += static_cast<std::size_t>(got);
  }
  return true;
}

void read_exact(const Socket& s, std::uint8_t* out, std::size_t n, std::chrono::milliseconds timeout)
{
  if (n == 0) return;
  if (!read_exact_or_eof(s, out, n, timeout)) throw TransportError("connection closed");
}

}  // namespace net

MailboxId mailbox_for(const ConversationId& conversation)
{
  ByteWriter w;
  w.raw("mailbox");
  w.raw(conversation);
  return sha256(w.bytes());
}

RelayEndpoint RelayEndpoint::parse(std::string_view text)
{
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    throw ValidationError("relay address must be host:port");
  }
  std::string port_text(text.substr(colon + 1));
  unsigned long port = 0;
  try {
    std::size_t used = 0;
    port = std::stoul(port_text, &used);
    if (used != port_text.size()) throw std::invalid_argument("port");
  } catch (const std::exception&) {
    throw ValidationError("invalid relay port: " + port_text);
  }
  if (port > 65535) throw ValidationError("invalid relay port: " + port_text);
  std::string host(text.substr(0, colon));
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  return RelayEndpoint{host, static_cast<std::uint16_t>(port)};
}

RelayClient::RelayClient(RelayEndpoint endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout)
{
}

Bytes RelayClient::round_trip(ByteView request) const
{
  using relay_wire::Status;
  net::Socket s = net::connect_tcp(endpoint_.host, endpoint_.port, timeout_);
  net::write_all(s, request, timeout_);
  std::uint8_t head[5];
  net::read_exact(s, head, sizeof head, timeout_);
  std::uint32_t len = std::uint32_t{head[1]} << 24 | std::uint32_t{head[2]} << 16 | std::uint32_t{head[3]} << 8 |
                      head[4];
  if (len > relay_wire::kMaxResponseBody) throw TransportError("relay response too large");
  Bytes body(len);
  net::read_exact(s, body.data(), body.size(), timeout_);
  auto status = static_cast<Status>(head[0]);
  if (status == Status::Ok) return body;
  std::string message(body.begin(), body.end());
  switch (status) {
    case Status::RelayFull: throw RelayFull("relay mailbox full: " + message);
    case Status::TooLarge: throw ValidationError("relay rejected oversize entry: " + message);
    case Status::BadRequest: throw ProtocolError("relay rejected request: " + message);
    default: throw TransportError("relay error: " + message);
  }
}

std::uint64_t RelayClient::post_raw(const MailboxId& mailbox, ByteView data) const
{
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(relay_wire::Op::Post));
  w.raw(mailbox);
  w.framed(data);
  Bytes body = round_trip(w.bytes());
  try {
    ByteReader r(body);
    return r.u64();
  } catch (const ValidationError&) {
    throw TransportError("short post receipt from relay");
  }
}

std::vector<StoredEntry> RelayClient::fetch_raw(const MailboxId& mailbox, std::uint64_t after_seq) const
{
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(relay_wire::Op::Fetch));
  w.raw(mailbox);
  w.u64(after_seq);
  Bytes body = round_trip(w.bytes());
  try {
    ByteReader r(body);
    std::uint32_t count = r.u32();
    std::vector<StoredEntry> out;
    for (std::uint32_t i = 0; i < count; ++i) {
      StoredEntry e;
      e.seq = r.u64();
      e.received_at = r.u64();
      ByteView data = r.framed(relay_wire::kMaxRequestBody);
      e.data.assign(data.begin(), data.end());
      out.push_back(std::move(e));
    }
    return out;
  } catch (const ValidationError& e) {
    throw TransportError(std::string("malformed fetch response: ") + e.what());
  }
}

void RelayClient::ack(const MailboxId& mailbox, std::uint64_t upto_seq) const
{
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(relay_wire::Op::Ack));
  w.raw(mailbox);
  w.u64(upto_seq);
  round_trip(w.bytes());
}

std::uint64_t RelayClient::post(const MailboxAddress& addr, const Envelope& e) const
{
  return post_raw(addr.mailbox_id, encode_envelope(e));
}

FetchResult RelayClient::fetch(const MailboxAddress& addr, std::uint64_t since_cursor) const
{
  FetchResult out;
  out.cursor = since_cursor;
  for (auto& entry : fetch_raw(addr.mailbox_id, since_cursor)) {
    out.cursor = std::max(out.cursor, entry.seq);
    try {
      out.envelopes.push_back(decode_envelope(entry.data));
    } catch (const MalformedEnvelope&) {
      ++out.malformed;
    }
  }
  return out;
}

}  // namespace authkit
