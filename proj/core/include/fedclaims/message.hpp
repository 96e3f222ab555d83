#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fedclaims {

// Wire format (byte-for-byte layout in docs/protocol.md):
//   magic 'F' 'L' 'C' 'L', version u8, msg_type u8, sender_id u16 LE,
//   round u32 LE, payload_length u32 LE, payload bytes.
// All integers little-endian, doubles as IEEE-754 little-endian. Payloads
// carry only model parameters, intermediate activations, gradients, and
// metrics -- never rows of raw features or labels. In split training the
// activation/gradient payloads are the residual leakage surface of the
// protocol; no mitigation is layered on top here.

inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxPayloadBytes = 0x7FFFFFFF;
inline constexpr std::size_t kHeaderBytes = 16;
inline constexpr std::uint8_t kMagic[4] = {0x46, 0x4C, 0x43, 0x4C};  // "FLCL"

enum class MsgType : std::uint8_t {
  JoinRequest = 1,
  JoinAck = 2,
  GlobalModel = 3,
  LocalUpdate = 4,
  ActivationBatch = 5,
  GradientBatch = 6,
  MetricsReport = 7,
  RoundComplete = 8,
  Shutdown = 9,
};

struct EmptyPayload {
  bool operator==(const EmptyPayload&) const = default;
};

/// Flattened network parameters (nncore flatten order).
struct ParamsPayload {
  std::vector<double> values;
  bool operator==(const ParamsPayload&) const = default;
};

/// Head-segment outputs for one synchronized batch. entity_checksum is the
/// order-sensitive 64-bit hash of the batch's entity ids, letting the label
/// holder verify alignment without the ids themselves crossing the channel.
struct ActivationPayload {
  std::uint32_t batch_id = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::uint64_t entity_checksum = 0;
  std::vector<double> values;  // row-major rows*cols
  bool operator==(const ActivationPayload&) const = default;
};

/// dLoss/dActivation block returned to a feature worker.
struct GradientPayload {
  std::uint32_t batch_id = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<double> values;  // row-major rows*cols
  bool operator==(const GradientPayload&) const = default;
};

struct MetricsPayload {
  std::vector<std::pair<std::string, double>> entries;
  bool operator==(const MetricsPayload&) const = default;
};

using Payload = std::variant<EmptyPayload, ParamsPayload, ActivationPayload,
                             GradientPayload, MetricsPayload>;

struct MessageEnvelope {
  std::uint8_t version = kProtocolVersion;
  MsgType type = MsgType::JoinRequest;
  std::uint16_t sender_id = 0;
  std::uint32_t round = 0;
  Payload payload;

  bool operator==(const MessageEnvelope&) const = default;
};

/// True when the payload alternative is the one the message type requires:
/// GlobalModel/LocalUpdate -> params, ActivationBatch -> activations,
/// GradientBatch -> gradients, JoinRequest/MetricsReport -> metrics,
/// JoinAck/RoundComplete/Shutdown -> empty.
bool payload_matches(MsgType type, const Payload& payload);

/// Canonical binary encoding; equal envelopes produce identical bytes.
/// Throws Decode errors on non-finite values or oversized payloads.
std::vector<std::uint8_t> encode(const MessageEnvelope& msg);

/// Total on arbitrary bytes: either the unique envelope that re-encodes to
/// the same bytes, or a Decode error (bad magic, unknown version/type,
/// truncation, length mismatch, trailing bytes, malformed payload).
MessageEnvelope decode(std::span<const std::uint8_t> bytes);

}  // namespace fedclaims
