#include "authkit/envelope.hpp"

#include <openssl/evp.h>
#include <unicode/ustring.h>

#include "authkit/errors.hpp"

namespace authkit {

namespace {

bool valid_utf8(ByteView s)
{
  UErrorCode status = U_ZERO_ERROR;
  int32_t needed = 0;
  u_strFromUTF8(nullptr, 0, &needed, reinterpret_cast<const char*>(s.data()), static_cast<int32_t>(s.size()),
                &status);
  return status != U_INVALID_CHAR_FOUND && status != U_ILLEGAL_CHAR_FOUND;
}

std::uint32_t read_u32(ByteView d, std::size_t at)
{
  return std::uint32_t{d[at]} << 24 | std::uint32_t{d[at + 1]} << 16 | std::uint32_t{d[at + 2]} << 8 | d[at + 3];
}

std::string base64_encode(ByteView data)
{
  std::string out(4 * ((data.size() + 2) / 3) + 1, '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(), static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

bool is_b64_char(char c)
{
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '+' || c == '/';
}

Bytes base64_decode(std::string_view text)
{
  if (text.size() % 4 != 0) throw CarrierError("base64 body length is not a multiple of 4");
  std::size_t pad = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '=') {
      if (i + 2 < text.size()) throw CarrierError("misplaced base64 padding");
      ++pad;
    } else if (!is_b64_char(c) || pad > 0) {
      throw CarrierError("invalid base64 character at body offset " + std::to_string(i));
    }
  }
  Bytes out(text.size() / 4 * 3);
  int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                          static_cast<int>(text.size()));
  if (n < 0) throw CarrierError("invalid base64 body");
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string_view rstrip(std::string_view s)
{
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string_view strip(std::string_view s)
{
  s = rstrip(s);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text)
{
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

/// Parses the block starting at lines[i] (the BEGIN line); advances i past
/// the END line.
Envelope parse_block(const std::vector<std::string_view>& lines, std::size_t& i)
{
  ++i;
  bool saw_version = false;
  std::string body;
  bool in_body = false;
  for (; i < lines.size(); ++i) {
    std::string_view line = strip(lines[i]);
    if (line == kArmorEnd) {
      ++i;
      if (!saw_version) throw CarrierError("missing Version header");
      Bytes raw = base64_decode(body);
      try {
        return decode_envelope(raw);
      } catch (const MalformedEnvelope& e) {
        throw CarrierError(std::string("attachment payload: ") + e.what());
      }
    }
    if (line == kArmorBegin) throw CarrierError("nested BEGIN marker");
    if (line.empty()) continue;
    if (!in_body && line.find(':') != std::string_view::npos) {
      auto colon = line.find(':');
      std::string_view key = strip(line.substr(0, colon));
      std::string_view value = strip(line.substr(colon + 1));
      if (key == "Version") {
        if (value != "1") throw CarrierError("unsupported armor version " + std::string(value));
        saw_version = true;
      }
      continue;
    }
    in_body = true;
    for (char c : line) {
      if (c != ' ' && c != '\t') body.push_back(c);
    }
  }
  throw CarrierError("missing END marker");
}

}  // namespace

MalformedEnvelope::MalformedEnvelope(Reason reason, std::size_t position, const std::string& detail)
    : Error(std::string("malformed envelope (") + to_string(reason) + ") at offset " + std::to_string(position) +
            ": " + detail),
      reason_(reason), position_(position)
{
}

const char* to_string(MalformedEnvelope::Reason r)
{
  switch (r) {
    case MalformedEnvelope::Reason::UnknownVersion: return "UnknownVersion";
    case MalformedEnvelope::Reason::UnknownFlowType: return "UnknownFlowType";
    case MalformedEnvelope::Reason::Truncated: return "Truncated";
    case MalformedEnvelope::Reason::Oversize: return "Oversize";
    case MalformedEnvelope::Reason::TrailingBytes: return "TrailingBytes";
    case MalformedEnvelope::Reason::InvalidIdentity: return "InvalidIdentity";
  }
  return "?";
}

const char* to_string(FlowType f)
{
  switch (f) {
    case FlowType::Flow1: return "Flow1";
    case FlowType::Flow2: return "Flow2";
    case FlowType::TagA: return "TagA";
    case FlowType::TagB: return "TagB";
    case FlowType::Renewal: return "Renewal";
  }
  return "?";
}

FlowType flow_type_from_string(std::string_view s)
{
  for (auto f : {FlowType::Flow1, FlowType::Flow2, FlowType::TagA, FlowType::TagB, FlowType::Renewal}) {
    if (s == to_string(f)) return f;
  }
  throw ValidationError("unknown flow type: " + std::string(s));
}

Bytes encode_envelope(const Envelope& e)
{
  if (e.sender_identity.empty() || e.sender_identity.size() > Envelope::kMaxIdentity) {
    throw ValidationError("sender identity must be 1.." + std::to_string(Envelope::kMaxIdentity) + " bytes");
  }
  std::size_t total = Envelope::kHeaderSize + 4 + e.sender_identity.size() + 4 + e.payload.size();
  if (total > Envelope::kMaxSize) throw ValidationError("envelope exceeds 64 KiB");
  ByteWriter w;
  w.u8(e.version);
  w.u8(static_cast<std::uint8_t>(e.flow_type));
  w.raw(e.conversation_id);
  w.framed(e.sender_identity);
  w.framed(e.payload);
  return std::move(w).take();
}

Envelope decode_envelope(ByteView d)
{
  using R = MalformedEnvelope::Reason;
  if (d.size() > Envelope::kMaxSize) throw MalformedEnvelope(R::Oversize, 0, "input exceeds 64 KiB");
  if (d.empty()) throw MalformedEnvelope(R::Truncated, 0, "empty input");
  Envelope e;
  e.version = d[0];
  if (e.version != Envelope::kVersion) {
    throw MalformedEnvelope(R::UnknownVersion, 0, "version " + std::to_string(e.version));
  }
  if (d.size() < 2) throw MalformedEnvelope(R::Truncated, 1, "missing flow type");
  if (d[1] < 1 || d[1] > 5) throw MalformedEnvelope(R::UnknownFlowType, 1, "flow type " + std::to_string(d[1]));
  e.flow_type = static_cast<FlowType>(d[1]);
  if (d.size() < Envelope::kHeaderSize) throw MalformedEnvelope(R::Truncated, 2, "conversation id cut short");
  std::copy_n(d.begin() + 2, 16, e.conversation_id.begin());

  std::size_t pos = Envelope::kHeaderSize;
  if (d.size() - pos < 4) throw MalformedEnvelope(R::Truncated, pos, "missing sender length");
  std::uint32_t id_len = read_u32(d, pos);
  if (id_len > Envelope::kMaxIdentity) {
    throw MalformedEnvelope(R::Oversize, pos, "sender length " + std::to_string(id_len));
  }
  pos += 4;
  if (d.size() - pos < id_len) throw MalformedEnvelope(R::Truncated, pos, "sender cut short");
  ByteView id = d.subspan(pos, id_len);
  if (id.empty() || !valid_utf8(id)) throw MalformedEnvelope(R::InvalidIdentity, pos, "sender is not UTF-8");
  e.sender_identity.assign(id.begin(), id.end());
  pos += id_len;

  if (d.size() - pos < 4) throw MalformedEnvelope(R::Truncated, pos, "missing payload length");
  std::uint32_t payload_len = read_u32(d, pos);
  if (payload_len > Envelope::kMaxSize) {
    throw MalformedEnvelope(R::Oversize, pos, "payload length " + std::to_string(payload_len));
  }
  pos += 4;
  if (d.size() - pos < payload_len) throw MalformedEnvelope(R::Truncated, pos, "payload cut short");
  e.payload.assign(d.begin() + static_cast<std::ptrdiff_t>(pos), d.begin() + static_cast<std::ptrdiff_t>(pos + payload_len));
  pos += payload_len;
  if (pos != d.size()) {
    throw MalformedEnvelope(R::TrailingBytes, pos, std::to_string(d.size() - pos) + " trailing bytes");
  }
  return e;
}

std::string to_attachment(const Envelope& e)
{
  std::string body = base64_encode(encode_envelope(e));
  std::string out;
  out.reserve(body.size() + body.size() / kArmorLineLength + 128);
  out += kArmorBegin;
  out += "\nVersion: 1\n\n";
  for (std::size_t i = 0; i < body.size(); i += kArmorLineLength) {
    out += body.substr(i, kArmorLineLength);
    out += '\n';
  }
  out += kArmorEnd;
  out += '\n';
  return out;
}

Envelope from_attachment(std::string_view text)
{
  auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (strip(lines[i]) == kArmorBegin) return parse_block(lines, i);
    if (strip(lines[i]) == kArmorEnd) throw CarrierError("END marker before BEGIN marker");
  }
  throw CarrierError("missing BEGIN marker");
}

std::vector<Envelope> extract_attachments(std::string_view text, std::size_t* skipped)
{
  std::vector<Envelope> out;
  auto lines = split_lines(text);
  std::size_t i = 0;
  while (i < lines.size()) {
    if (strip(lines[i]) != kArmorBegin) {
      ++i;
      continue;
    }
    std::size_t start = i;
    try {
      out.push_back(parse_block(lines, i));
    } catch (const CarrierError&) {
      if (skipped) ++*skipped;
      i = std::max(i, start + 1);
    }
  }
  return out;
}

bool EnvelopeDeduplicator::first_time(const Envelope& e)
{
  return seen_.emplace(e.conversation_id, e.flow_type).second;
}

}  // namespace authkit
