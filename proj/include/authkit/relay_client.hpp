#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "authkit/bytes.hpp"
#include "authkit/envelope.hpp"

namespace authkit {

using MailboxId = std::array<std::uint8_t, 32>;

/// SHA-256("mailbox" || conversation_id): unlinkable to identities or secrets.
MailboxId mailbox_for(const ConversationId& conversation);

struct RelayEndpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 7447;

  /// "host:port"; throws ValidationError.
  static RelayEndpoint parse(std::string_view text);
  std::string to_string() const { return host + ":" + std::to_string(port); }
};

struct MailboxAddress {
  RelayEndpoint relay;
  MailboxId mailbox_id{};

  static MailboxAddress for_conversation(const RelayEndpoint& relay, const ConversationId& conversation)
  {
    return {relay, mailbox_for(conversation)};
  }
};

/// Relay request/response framing over one stream connection.
///
///   request:  op:1 | mailbox_id:32 | post:  len:4 BE, bytes
///                                  | fetch: after_seq:8 BE
///                                  | ack:   upto_seq:8 BE
///   response: status:1 | body_len:4 BE | body
///             post OK body:  seq:8
///             fetch OK body: count:4, then count x {seq:8, received_at:8, len:4, bytes}
///             ack OK body:   empty
///             error body:    UTF-8 message
namespace relay_wire {
enum class Op : std::uint8_t { Post = 1, Fetch = 2, Ack = 3 };
enum class Status : std::uint8_t { Ok = 0, RelayFull = 1, TooLarge = 2, BadRequest = 3, ServerError = 4 };
inline constexpr std::size_t kMaxRequestBody = 64 * 1024;
inline constexpr std::size_t kMaxResponseBody = 32 * 1024 * 1024;
}  // namespace relay_wire

struct StoredEntry {
  std::uint64_t seq = 0;
  std::uint64_t received_at = 0;
  Bytes data;
};

struct FetchResult {
  std::vector<Envelope> envelopes;
  /// Highest sequence number seen; pass back as the next cursor.
  std::uint64_t cursor = 0;
  /// Entries that were not decodable envelopes.
  std::size_t malformed = 0;
};

/// Blocking client, one connection per call. Safe to share across threads.
/// Network failures throw TransportError; a full mailbox throws RelayFull.
class RelayClient {
public:
  explicit RelayClient(RelayEndpoint endpoint, std::chrono::milliseconds timeout = std::chrono::seconds(5));

  std::uint64_t post_raw(const MailboxId& mailbox, ByteView data) const;
  std::vector<StoredEntry> fetch_raw(const MailboxId& mailbox, std::uint64_t after_seq) const;
  void ack(const MailboxId& mailbox, std::uint64_t upto_seq) const;

  /// Returns the relay's receipt (sequence number).
  std::uint64_t post(const MailboxAddress& addr, const Envelope& e) const;
  FetchResult fetch(const MailboxAddress& addr, std::uint64_t since_cursor) const;

  const RelayEndpoint& endpoint() const { return endpoint_; }

private:
  Bytes round_trip(ByteView request) const;

  RelayEndpoint endpoint_;
  std::chrono::milliseconds timeout_;
};

}  // namespace authkit
