#include "authkit/confirm.hpp"

#include <atomic>

#include "authkit/errors.hpp"

namespace authkit {

namespace {
std::atomic<std::uint64_t> g_verifications{0};

void require_fingerprint(ByteView f)
{
  if (f.size() != Fingerprint::kSize) {
    throw ValidationError("fingerprint must be 20 bytes, got " + std::to_string(f.size()));
  }
}
}  // namespace

KeyBundle derive_key_bundle(const RawSharedSecret& sk)
{
  return KeyBundle{hkdf_sha256(sk.sk.view(), "session-key", kKeySize),
                   hkdf_sha256(sk.sk.view(), "mac-key-A", kKeySize),
                   hkdf_sha256(sk.sk.view(), "mac-key-B", kKeySize)};
}

SessionId compute_sid(const FlowMessage& initiator_flow, const FlowMessage& responder_flow)
{
  ByteWriter w;
  w.raw("sid");
  w.framed(initiator_flow.serialize());
  w.framed(responder_flow.serialize());
  return SessionId{sha256(w.bytes())};
}

SessionId compute_sid(std::span<const FlowMessage> transcript)
{
  if (transcript.size() != 2) {
    throw ProtocolError("sid needs both first-round flows, got " + std::to_string(transcript.size()));
  }
  return compute_sid(transcript[0], transcript[1]);
}

Bytes ConfirmationTag::serialize() const
{
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(direction));
  w.framed(tag);
  return std::move(w).take();
}

ConfirmationTag ConfirmationTag::parse(ByteView data)
{
  try {
    ByteReader r(data);
    std::uint8_t dir = r.u8();
    if (dir != 1 && dir != 2) throw ValidationError("unknown tag direction " + std::to_string(dir));
    ByteView tag = r.framed(256);
    if (!r.done()) throw ValidationError("trailing bytes after tag");
    return ConfirmationTag{Bytes(tag.begin(), tag.end()), static_cast<TagDirection>(dir)};
  } catch (const ValidationError& e) {
    throw ProtocolError(std::string("malformed tag: ") + e.what());
  }
}

ConfirmationTag compute_tag(ByteView k_mac, ByteView fpr_a, ByteView fpr_b, const SessionId& sid,
                            TagDirection direction)
{
  require_fingerprint(fpr_a);
  require_fingerprint(fpr_b);
  ByteWriter w;
  w.raw(fpr_a);
  w.raw(fpr_b);
  w.raw(sid.sid);
  Digest mac = hmac_sha256(k_mac, w.bytes());
  return ConfirmationTag{Bytes(mac.begin(), mac.end()), direction};
}

ConfirmationTag compute_tag(ByteView k_mac, const Fingerprint& fpr_a, const Fingerprint& fpr_b,
                            const SessionId& sid, TagDirection direction)
{
  return compute_tag(k_mac, fpr_a.view(), fpr_b.view(), sid, direction);
}

ConfirmationTag compute_embedded_tag(ByteView k_mac, const SessionId& sid, TagDirection direction)
{
  Digest mac = hmac_sha256(k_mac, sid.sid);
  return ConfirmationTag{Bytes(mac.begin(), mac.end()), direction};
}

bool verify_peer_tag(const ConfirmationTag& expected, const ConfirmationTag& received)
{
  bool same_direction = expected.direction == received.direction;
  bool same_tag = ct_equal(expected.tag, received.tag);
  return same_direction && same_tag;
}

std::string compose_embedded_secret(std::string_view user_secret, ByteView fpr_a, ByteView fpr_b)
{
  require_fingerprint(fpr_a);
  require_fingerprint(fpr_b);
  if (user_secret.empty()) throw ValidationError("secret must not be empty");
  std::string out(user_secret);
  out += to_hex(fpr_a);
  out += to_hex(fpr_b);
  return out;
}

std::string compose_embedded_secret(std::string_view user_secret, const Fingerprint& fpr_a,
                                    const Fingerprint& fpr_b)
{
  return compose_embedded_secret(user_secret, fpr_a.view(), fpr_b.view());
}

const char* to_string(ConfirmMode m)
{
  return m == ConfirmMode::Direct ? "direct" : "embedded";
}

KeyConfirmation::KeyConfirmation(const RawSharedSecret& sk, PakeRole self, ConfirmMode mode,
                                 const Fingerprint& fpr_a, const Fingerprint& fpr_b, const SessionId& sid)
    : keys_(derive_key_bundle(sk)), sid_(sid)
{
  auto tag_under = [&](const SecureBytes& key, TagDirection dir) {
    return mode == ConfirmMode::Direct ? compute_tag(key.view(), fpr_a, fpr_b, sid, dir)
                                       : compute_embedded_tag(key.view(), sid, dir);
  };
  ConfirmationTag tag_a = tag_under(keys_->k_mac_a, TagDirection::FromA);
  ConfirmationTag tag_b = tag_under(keys_->k_mac_b, TagDirection::FromB);
  if (self == PakeRole::Initiator) {
    own_tag_ = std::move(tag_a);
    expected_peer_tag_ = std::move(tag_b);
  } else {
    own_tag_ = std::move(tag_b);
    expected_peer_tag_ = std::move(tag_a);
  }
}

ConfirmResult KeyConfirmation::verify_peer(const ConfirmationTag& received)
{
  if (spent_) throw UsageError("key confirmation already performed for this run");
  spent_ = true;
  g_verifications.fetch_add(1, std::memory_order_relaxed);
  if (verify_peer_tag(expected_peer_tag_, received)) {
    ConfirmResult out{ConfirmOutcome::Accepted, std::move(keys_)};
    keys_.reset();
    return out;
  }
  keys_.reset();
  return ConfirmResult{ConfirmOutcome::AuthenticationFailed, std::nullopt};
}

std::uint64_t tag_verification_count()
{
  return g_verifications.load(std::memory_order_relaxed);
}

}  // namespace authkit
