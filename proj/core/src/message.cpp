#include "fedclaims/message.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "fedclaims/error.hpp"

namespace fedclaims {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  if (!std::isfinite(v)) {
    fail(ErrorKind::Decode, "encode: non-finite value in payload");
  }
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }

  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_]) |
                      static_cast<std::uint16_t>(bytes_[pos_ + 1]) << 8;
    pos_ += 2;
    return v;
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64() {
    const double v = std::bit_cast<double>(u64());
    if (!std::isfinite(v)) {
      fail(ErrorKind::Decode, "decode: non-finite value in payload");
    }
    return v;
  }

  std::string bytes(std::size_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return s;
  }

 private:
  void need(std::size_t count) {
    if (remaining() < count) fail(ErrorKind::Decode, "decode: truncated frame");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void encode_payload(std::vector<std::uint8_t>& out, const Payload& payload) {
  if (std::holds_alternative<EmptyPayload>(payload)) return;
  if (const auto* params = std::get_if<ParamsPayload>(&payload)) {
    if (params->values.size() > kMaxPayloadBytes / 8) {
      fail(ErrorKind::Decode, "encode: parameter payload too large");
    }
    put_u32(out, static_cast<std::uint32_t>(params->values.size()));
    for (double v : params->values) put_f64(out, v);
    return;
  }
  if (const auto* act = std::get_if<ActivationPayload>(&payload)) {
    if (act->values.size() !=
        static_cast<std::size_t>(act->rows) * static_cast<std::size_t>(act->cols)) {
      fail(ErrorKind::Decode, "encode: activation rows*cols != value count");
    }
    put_u32(out, act->batch_id);
    put_u32(out, act->rows);
    put_u32(out, act->cols);
    put_u64(out, act->entity_checksum);
    for (double v : act->values) put_f64(out, v);
    return;
  }
  if (const auto* grad = std::get_if<GradientPayload>(&payload)) {
    if (grad->values.size() !=
        static_cast<std::size_t>(grad->rows) * static_cast<std::size_t>(grad->cols)) {
      fail(ErrorKind::Decode, "encode: gradient rows*cols != value count");
    }
    put_u32(out, grad->batch_id);
    put_u32(out, grad->rows);
    put_u32(out, grad->cols);
    for (double v : grad->values) put_f64(out, v);
    return;
  }
  const auto& metrics = std::get<MetricsPayload>(payload);
  put_u32(out, static_cast<std::uint32_t>(metrics.entries.size()));
  for (const auto& [key, value] : metrics.entries) {
    if (key.size() > 0xFFFF) fail(ErrorKind::Decode, "encode: metric key too long");
    put_u16(out, static_cast<std::uint16_t>(key.size()));
    out.insert(out.end(), key.begin(), key.end());
    put_f64(out, value);
  }
}

Payload decode_payload(MsgType type, Reader& reader) {
  switch (type) {
    case MsgType::JoinAck:
    case MsgType::RoundComplete:
    case MsgType::Shutdown:
      return EmptyPayload{};
    case MsgType::GlobalModel:
    case MsgType::LocalUpdate: {
      ParamsPayload params;
      const std::uint32_t count = reader.u32();
      if (static_cast<std::size_t>(count) * 8 != reader.remaining()) {
        fail(ErrorKind::Decode, "decode: parameter count does not match payload length");
      }
      params.values.reserve(count);
      for (std::uint32_t i = 0; i < count; ++i) params.values.push_back(reader.f64());
      return params;
    }
    case MsgType::ActivationBatch: {
      ActivationPayload act;
      act.batch_id = reader.u32();
      act.rows = reader.u32();
      act.cols = reader.u32();
      act.entity_checksum = reader.u64();
      const auto cells = static_cast<std::uint64_t>(act.rows) * act.cols;
      if (cells > kMaxPayloadBytes / 8 || cells * 8 != reader.remaining()) {
        fail(ErrorKind::Decode, "decode: activation rows*cols does not match payload length");
      }
      act.values.reserve(cells);
      for (std::uint64_t i = 0; i < cells; ++i) act.values.push_back(reader.f64());
      return act;
    }
    case MsgType::GradientBatch: {
      GradientPayload grad;
      grad.batch_id = reader.u32();
      grad.rows = reader.u32();
      grad.cols = reader.u32();
      const auto cells = static_cast<std::uint64_t>(grad.rows) * grad.cols;
      if (cells > kMaxPayloadBytes / 8 || cells * 8 != reader.remaining()) {
        fail(ErrorKind::Decode, "decode: gradient rows*cols does not match payload length");
      }
      grad.values.reserve(cells);
      for (std::uint64_t i = 0; i < cells; ++i) grad.values.push_back(reader.f64());
      return grad;
    }
    case MsgType::JoinRequest:
    case MsgType::MetricsReport: {
      MetricsPayload metrics;
      const std::uint32_t count = reader.u32();
      for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t key_len = reader.u16();
        std::string key = reader.bytes(key_len);
        const double value = reader.f64();
        metrics.entries.emplace_back(std::move(key), value);
      }
      return metrics;
    }
  }
  fail(ErrorKind::Decode, "decode: unreachable message type");
}

}  // namespace

bool payload_matches(MsgType type, const Payload& payload) {
  switch (type) {
    case MsgType::JoinAck:
    case MsgType::RoundComplete:
    case MsgType::Shutdown:
      return std::holds_alternative<EmptyPayload>(payload);
    case MsgType::GlobalModel:
    case MsgType::LocalUpdate:
      return std::holds_alternative<ParamsPayload>(payload);
    case MsgType::ActivationBatch:
      return std::holds_alternative<ActivationPayload>(payload);
    case MsgType::GradientBatch:
      return std::holds_alternative<GradientPayload>(payload);
    case MsgType::JoinRequest:
    case MsgType::MetricsReport:
      return std::holds_alternative<MetricsPayload>(payload);
  }
  return false;
}

std::vector<std::uint8_t> encode(const MessageEnvelope& msg) {
  if (msg.version != kProtocolVersion) {
    fail(ErrorKind::Decode, "encode: unsupported protocol version");
  }
  if (!payload_matches(msg.type, msg.payload)) {
    fail(ErrorKind::Decode, "encode: payload type does not match message type");
  }

  std::vector<std::uint8_t> body;
  encode_payload(body, msg.payload);
  if (body.size() > kMaxPayloadBytes) {
    fail(ErrorKind::Decode, "encode: payload exceeds maximum length");
  }

  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + body.size());
  for (std::uint8_t b : kMagic) out.push_back(b);
  out.push_back(msg.version);
  out.push_back(static_cast<std::uint8_t>(msg.type));
  put_u16(out, msg.sender_id);
  put_u32(out, msg.round);
  put_u32(out, static_cast<std::uint32_t>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

MessageEnvelope decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) fail(ErrorKind::Decode, "decode: frame shorter than header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorKind::Decode, "decode: bad magic");
  }

  MessageEnvelope msg;
  msg.version = bytes[4];
  if (msg.version != kProtocolVersion) {
    fail(ErrorKind::Decode, "decode: unknown protocol version " +
                                std::to_string(static_cast<int>(msg.version)));
  }
  const std::uint8_t raw_type = bytes[5];
  if (raw_type < 1 || raw_type > 9) {
    fail(ErrorKind::Decode, "decode: unknown message type " +
                                std::to_string(static_cast<int>(raw_type)));
  }
  msg.type = static_cast<MsgType>(raw_type);
  msg.sender_id = static_cast<std::uint16_t>(bytes[6]) |
                  static_cast<std::uint16_t>(bytes[7]) << 8;
  msg.round = 0;
  for (int i = 0; i < 4; ++i) {
    msg.round |= static_cast<std::uint32_t>(bytes[8 + i]) << (8 * i);
  }
  std::uint32_t payload_length = 0;
  for (int i = 0; i < 4; ++i) {
    payload_length |= static_cast<std::uint32_t>(bytes[12 + i]) << (8 * i);
  }
  if (payload_length > kMaxPayloadBytes) {
    fail(ErrorKind::Decode, "decode: payload length exceeds maximum");
  }
  const std::size_t actual = bytes.size() - kHeaderBytes;
  if (actual < payload_length) fail(ErrorKind::Decode, "decode: truncated payload");
  if (actual > payload_length) fail(ErrorKind::Decode, "decode: trailing bytes after payload");

  Reader reader(bytes.subspan(kHeaderBytes));
  msg.payload = decode_payload(msg.type, reader);
  if (reader.remaining() != 0) {
    fail(ErrorKind::Decode, "decode: payload not fully consumed");
  }
  return msg;
}

}  // namespace fedclaims
