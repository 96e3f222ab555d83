#include <doctest.h>

#include <chrono>
#include <fstream>
#include <thread>

#include "fedclaims/channel.hpp"
#include "fedclaims/error.hpp"
#include "fedclaims/message.hpp"
#include "fedclaims/rng.hpp"

using namespace fedclaims;

namespace {

MessageEnvelope random_envelope(Xoshiro256& rng) {
  MessageEnvelope msg;
  msg.type = static_cast<MsgType>(1 + rng.bounded(9));
  msg.sender_id = static_cast<std::uint16_t>(rng.bounded(1 << 16));
  msg.round = static_cast<std::uint32_t>(rng.bounded(1000));
  switch (msg.type) {
    case MsgType::JoinAck:
    case MsgType::RoundComplete:
    case MsgType::Shutdown:
      msg.payload = EmptyPayload{};
      break;
    case MsgType::GlobalModel:
    case MsgType::LocalUpdate: {
      ParamsPayload params;
      const std::size_t count = rng.bounded(64);
      for (std::size_t i = 0; i < count; ++i) params.values.push_back(rng.normal());
      msg.payload = std::move(params);
      break;
    }
    case MsgType::ActivationBatch: {
      ActivationPayload act;
      act.batch_id = static_cast<std::uint32_t>(rng.bounded(1 << 20));
      act.rows = static_cast<std::uint32_t>(rng.bounded(8));
      act.cols = static_cast<std::uint32_t>(rng.bounded(8));
      act.entity_checksum = rng.next();
      act.values.resize(static_cast<std::size_t>(act.rows) * act.cols);
      for (double& v : act.values) v = rng.normal();
      msg.payload = std::move(act);
      break;
    }
    case MsgType::GradientBatch: {
      GradientPayload grad;
      grad.batch_id = static_cast<std::uint32_t>(rng.bounded(1 << 20));
      grad.rows = static_cast<std::uint32_t>(rng.bounded(8));
      grad.cols = static_cast<std::uint32_t>(rng.bounded(8));
      grad.values.resize(static_cast<std::size_t>(grad.rows) * grad.cols);
      for (double& v : grad.values) v = rng.normal();
      msg.payload = std::move(grad);
      break;
    }
    case MsgType::JoinRequest:
    case MsgType::MetricsReport: {
      MetricsPayload metrics;
      const std::size_t count = rng.bounded(5);
      for (std::size_t i = 0; i < count; ++i) {
        metrics.entries.emplace_back("k" + std::to_string(rng.bounded(100)),
                                     rng.normal());
      }
      msg.payload = std::move(metrics);
      break;
    }
  }
  return msg;
}

}  // namespace

TEST_CASE("encode: header layout is byte-exact") {
  MessageEnvelope msg;
  msg.type = MsgType::GlobalModel;
  msg.sender_id = 0;
  msg.round = 5;
  msg.payload = ParamsPayload{{1.0}};

  const auto bytes = encode(msg);
  REQUIRE(bytes.size() >= 16);
  // magic "FLCL"
  CHECK(bytes[0] == 0x46);
  CHECK(bytes[1] == 0x4C);
  CHECK(bytes[2] == 0x43);
  CHECK(bytes[3] == 0x4C);
  // bytes 4..12: version, msg_type, sender_id LE, round LE
  const std::vector<std::uint8_t> header(bytes.begin() + 4, bytes.begin() + 12);
  CHECK(header == std::vector<std::uint8_t>{0x01, 0x03, 0x00, 0x00, 0x05, 0x00, 0x00,
                                            0x00});
  // payload: count=1 LE then IEEE-754 LE of 1.0
  const std::vector<std::uint8_t> payload(bytes.begin() + 16, bytes.end());
  CHECK(payload == std::vector<std::uint8_t>{0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
                                             0x00, 0x00, 0x00, 0xF0, 0x3F});
}

TEST_CASE("encode: rejects contract violations") {
  MessageEnvelope msg;
  msg.type = MsgType::GlobalModel;
  msg.payload = EmptyPayload{};  // wrong payload for type
  CHECK_THROWS_AS(encode(msg), Error);

  msg.payload = ParamsPayload{{std::numeric_limits<double>::quiet_NaN()}};
  CHECK_THROWS_AS(encode(msg), Error);

  ActivationPayload act;
  act.rows = 2;
  act.cols = 2;
  act.values = {1.0};  // rows*cols mismatch
  msg.type = MsgType::ActivationBatch;
  msg.payload = act;
  CHECK_THROWS_AS(encode(msg), Error);
}

TEST_CASE("decode: inverse of encode, distinct failure modes") {
  MessageEnvelope msg;
  msg.type = MsgType::MetricsReport;
  msg.sender_id = 3;
  msg.round = 9;
  msg.payload = MetricsPayload{{{"train_mse", 1.25}, {"train_pe", -0.5}}};
  auto bytes = encode(msg);
  CHECK(decode(bytes) == msg);

  // Truncation mid-payload.
  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  CHECK_THROWS_AS(decode(truncated), Error);

  // Trailing bytes.
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode(trailing), Error);

  // Bad magic.
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode(magic), Error);

  // Unknown version.
  auto version = bytes;
  version[4] = 9;
  CHECK_THROWS_AS(decode(version), Error);

  // Unknown type.
  auto type = bytes;
  type[5] = 42;
  CHECK_THROWS_AS(decode(type), Error);

  // Short frame.
  CHECK_THROWS_AS(decode(std::vector<std::uint8_t>{0x46, 0x4C}), Error);
}

TEST_CASE("codec: round-trip property and canonical bytes") {
  Xoshiro256 rng(404);
  for (int trial = 0; trial < 20000; ++trial) {
    const MessageEnvelope msg = random_envelope(rng);
    const auto bytes = encode(msg);
    const MessageEnvelope back = decode(bytes);
    CHECK(back == msg);
    CHECK(encode(back) == bytes);  // canonical: equal envelopes, equal bytes
  }
}

TEST_CASE("codec: random-byte fuzz never crashes") {
  Xoshiro256 rng(808);
  int decoded = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    const std::size_t len = rng.bounded(64);
    std::vector<std::uint8_t> bytes(len);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.bounded(256));
    // Make some frames nearly valid so deeper paths get exercised.
    if (trial % 3 == 0 && len >= 6) {
      bytes[0] = 0x46; bytes[1] = 0x4C; bytes[2] = 0x43; bytes[3] = 0x4C;
      bytes[4] = 1;
      bytes[5] = static_cast<std::uint8_t>(1 + rng.bounded(9));
    }
    try {
      const MessageEnvelope msg = decode(bytes);
      CHECK(encode(msg) == bytes);
      ++decoded;
    } catch (const Error&) {
      // expected for malformed frames
    }
  }
  CHECK(decoded >= 0);
}

TEST_CASE("golden frames: byte-exact against checked-in fixtures") {
  std::ifstream in("golden/golden_frames.bin", std::ios::binary);
  REQUIRE(in);
  std::vector<std::uint8_t> expected((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());

  std::vector<std::uint8_t> actual;
  {
    MessageEnvelope join;
    join.type = MsgType::JoinRequest;
    join.sender_id = 1;
    join.round = 0;
    join.payload = MetricsPayload{{{"train_rows", 128.0}}};
    const auto f = encode(join);
    actual.insert(actual.end(), f.begin(), f.end());
  }
  {
    MessageEnvelope model;
    model.type = MsgType::GlobalModel;
    model.sender_id = 0;
    model.round = 5;
    model.payload = ParamsPayload{{1.0, -2.5, 0.0}};
    const auto f = encode(model);
    actual.insert(actual.end(), f.begin(), f.end());
  }
  {
    MessageEnvelope act;
    act.type = MsgType::ActivationBatch;
    act.sender_id = 2;
    act.round = 1;
    ActivationPayload payload;
    payload.batch_id = 7;
    payload.rows = 2;
    payload.cols = 2;
    payload.entity_checksum = 0x0123456789ABCDEFULL;
    payload.values = {0.5, 1.5, -3.25, 64.0};
    act.payload = payload;
    const auto f = encode(act);
    actual.insert(actual.end(), f.begin(), f.end());
  }
  {
    MessageEnvelope shutdown;
    shutdown.type = MsgType::Shutdown;
    shutdown.sender_id = 0;
    shutdown.round = 30;
    shutdown.payload = EmptyPayload{};
    const auto f = encode(shutdown);
    actual.insert(actual.end(), f.begin(), f.end());
  }
  CHECK(actual == expected);
}

TEST_CASE("inproc channel: FIFO, exactly once, timeout") {
  auto [a, b] = open_inproc_pair();
  const int k = 50;
  for (int i = 0; i < k; ++i) {
    MessageEnvelope msg;
    msg.type = MsgType::RoundComplete;
    msg.round = static_cast<std::uint32_t>(i);
    msg.payload = EmptyPayload{};
    a->send(msg);
  }
  for (int i = 0; i < k; ++i) {
    const auto msg = b->receive(std::chrono::milliseconds(1000));
    CHECK(msg.round == static_cast<std::uint32_t>(i));
  }
  // Queue now empty: a short receive times out.
  const auto start = std::chrono::steady_clock::now();
  CHECK_THROWS_AS(b->receive(std::chrono::milliseconds(50)), Error);
  const auto waited = std::chrono::steady_clock::now() - start;
  CHECK(waited >= std::chrono::milliseconds(45));

  // Close surfaces as a channel error on the peer.
  a->close();
  CHECK_THROWS_AS(b->receive(std::chrono::milliseconds(1000)), Error);
}

TEST_CASE("inproc channel: duplex and threaded handoff") {
  auto [a, b] = open_inproc_pair();
  std::thread peer([&b = b] {
    for (int i = 0; i < 10; ++i) {
      auto msg = b->receive(std::chrono::milliseconds(2000));
      msg.round += 100;
      b->send(msg);
    }
  });
  for (int i = 0; i < 10; ++i) {
    MessageEnvelope msg;
    msg.type = MsgType::RoundComplete;
    msg.round = static_cast<std::uint32_t>(i);
    msg.payload = EmptyPayload{};
    a->send(msg);
    const auto echoed = a->receive(std::chrono::milliseconds(2000));
    CHECK(echoed.round == static_cast<std::uint32_t>(i + 100));
  }
  peer.join();
}

TEST_CASE("socket channel: loopback round trip of a large payload") {
  auto listener = listen("127.0.0.1:0");
  REQUIRE(listener->port() != 0);
  const std::string address = "127.0.0.1:" + std::to_string(listener->port());

  MessageEnvelope big;
  big.type = MsgType::LocalUpdate;
  big.sender_id = 4;
  big.round = 2;
  ParamsPayload params;
  params.values.resize(100000);
  Xoshiro256 rng(12);
  for (double& v : params.values) v = rng.normal();
  big.payload = params;

  MessageEnvelope received;
  std::thread server([&] {
    auto endpoint = listener->accept(std::chrono::milliseconds(5000));
    received = endpoint->receive(std::chrono::milliseconds(10000));
    endpoint->send(MessageEnvelope{kProtocolVersion, MsgType::JoinAck, 0, 0,
                                   EmptyPayload{}});
  });

  auto client = dial(address);
  client->send(big);
  const auto ack = client->receive(std::chrono::milliseconds(10000));
  server.join();

  CHECK(received == big);
  CHECK(ack.type == MsgType::JoinAck);
}

TEST_CASE("socket channel: connection refused surfaces as channel error") {
  try {
    dial("127.0.0.1:1", std::chrono::milliseconds(150));
    FAIL("expected channel error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Channel);
  }
  CHECK_THROWS_AS(listen("not-an-address"), Error);
}
