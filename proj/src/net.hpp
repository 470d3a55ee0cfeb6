#pragma once

// Thin POSIX socket helpers shared by the relay client and server.

#include <chrono>
#include <cstdint>
#include <string>

#include "authkit/bytes.hpp"

namespace authkit::net {

/// Owning file descriptor.
class Socket {
public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void close();
  /// Wakes up a thread blocked on this socket without closing the fd.
  void shutdown();

private:
  int fd_ = -1;
};

/// Throws TransportError.
Socket connect_tcp(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout);

/// Throws EnvironmentError. Port 0 picks an ephemeral port.
Socket listen_tcp(const std::string& host, std::uint16_t port);

std::uint16_t local_port(const Socket& s);

/// Both throw TransportError on EOF, timeout or error.
void write_all(const Socket& s, ByteView data, std::chrono::milliseconds timeout);
void read_exact(const Socket& s, std::uint8_t* out, std::size_t n, std::chrono::milliseconds timeout);

/// Like read_exact but returns false on clean EOF before the first byte.
bool read_exact_or_eof(const Socket& s, std::uint8_t* out, std::size_t n, std::chrono::milliseconds timeout);

}  // namespace authkit::net
