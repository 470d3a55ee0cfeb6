#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "authkit/bytes.hpp"

namespace authkit {

enum class FlowType : std::uint8_t {
  Flow1 = 1,
  Flow2 = 2,
  TagA = 3,
  TagB = 4,
  Renewal = 5,  // first flow of an automated chained run
};

const char* to_string(FlowType f);
/// Accepts the names produced by to_string; throws ValidationError.
FlowType flow_type_from_string(std::string_view s);

using ConversationId = std::array<std::uint8_t, 16>;

/// Wire frame for every protocol message:
///
///   version:1 | flow_type:1 | conversation_id:16 |
///   sender_len:4 BE | sender (UTF-8) | payload_len:4 BE | payload
struct Envelope {
  static constexpr std::uint8_t kVersion = 1;
  static constexpr std::size_t kMaxSize = 64 * 1024;
  static constexpr std::size_t kMaxIdentity = 1024;
  static constexpr std::size_t kHeaderSize = 1 + 1 + 16;

  std::uint8_t version = kVersion;
  FlowType flow_type = FlowType::Flow1;
  ConversationId conversation_id{};
  std::string sender_identity;
  Bytes payload;

  friend bool operator==(const Envelope&, const Envelope&) = default;
};

/// Throws ValidationError if the result would exceed kMaxSize or the
/// identity is empty or too long.
Bytes encode_envelope(const Envelope& e);

/// Total over arbitrary input: returns an Envelope or throws
/// MalformedEnvelope with the failing offset.
Envelope decode_envelope(ByteView data);

inline constexpr std::string_view kArmorBegin = "-----BEGIN PAKE-AUTH MESSAGE-----";
inline constexpr std::string_view kArmorEnd = "-----END PAKE-AUTH MESSAGE-----";
inline constexpr std::size_t kArmorLineLength = 64;

/// Armored text block (header line, blank line, 64-column base64, footer),
/// LF line endings, trailing newline.
std::string to_attachment(const Envelope& e);

/// Parses exactly one armored block. Tolerates CRLF, trailing whitespace,
/// re-wrapped base64 and text around the block. Throws CarrierError.
Envelope from_attachment(std::string_view text);

/// Every armored block in `text`, in order. Blocks that fail to parse are
/// skipped and counted in `skipped` when given.
std::vector<Envelope> extract_attachments(std::string_view text, std::size_t* skipped = nullptr);

/// At-least-once delivery filter: remembers (conversation_id, flow_type).
class EnvelopeDeduplicator {
public:
  /// True the first time a given (conversation, flow) pair is seen.
  bool first_time(const Envelope& e);

private:
  std::set<std::pair<ConversationId, FlowType>> seen_;
};

}  // namespace authkit
