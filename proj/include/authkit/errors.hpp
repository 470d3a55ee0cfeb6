#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace authkit {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied a value that violates a documented precondition.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// API misuse, e.g. mixing elements of different groups.
class UsageError : public Error {
public:
  using Error::Error;
};

/// Randomness or OS resources failed.
class EnvironmentError : public Error {
public:
  using Error::Error;
};

/// Peer sent something the protocol does not allow.
class ProtocolError : public Error {
public:
  using Error::Error;
};

/// Retryable network failure talking to a relay.
class TransportError : public Error {
public:
  using Error::Error;
};

class RelayFull : public TransportError {
public:
  using TransportError::TransportError;
};

class CarrierError : public Error {
public:
  using Error::Error;
};

class MalformedEnvelope : public Error {
public:
  enum class Reason {
    UnknownVersion,
    UnknownFlowType,
    Truncated,
    Oversize,
    TrailingBytes,
    InvalidIdentity,
  };

  MalformedEnvelope(Reason reason, std::size_t position, const std::string& detail);

  Reason reason() const { return reason_; }
  std::size_t position() const { return position_; }

private:
  Reason reason_;
  std::size_t position_;
};

const char* to_string(MalformedEnvelope::Reason r);

}  // namespace authkit
