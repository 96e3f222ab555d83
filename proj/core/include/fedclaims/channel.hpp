#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <utility>

#include "fedclaims/message.hpp"

namespace fedclaims {

/// One end of a point-to-point, FIFO, exactly-once message channel. Safe for
/// one sending thread and one receiving thread; a single endpoint must not be
/// shared by concurrent senders.
class ChannelEndpoint {
 public:
  virtual ~ChannelEndpoint() = default;

  virtual void send(const MessageEnvelope& msg) = 0;

  /// Blocks until a message arrives. Throws a Channel error on timeout or
  /// when the peer has closed and no queued messages remain.
  virtual MessageEnvelope receive(
      std::chrono::milliseconds timeout = std::chrono::milliseconds(30000)) = 0;

  virtual void close() = 0;
};

/// Connected pair of in-process endpoints backed by two FIFO queues.
std::pair<std::unique_ptr<ChannelEndpoint>, std::unique_ptr<ChannelEndpoint>>
open_inproc_pair();

/// Listening TCP socket. Addresses are "host:port"; port 0 binds ephemeral.
class Listener {
 public:
  virtual ~Listener() = default;
  virtual std::unique_ptr<ChannelEndpoint> accept(
      std::chrono::milliseconds timeout = std::chrono::milliseconds(30000)) = 0;
  virtual std::uint16_t port() const = 0;
};

std::unique_ptr<Listener> listen(const std::string& address);

/// Connects to a listening peer, retrying until the timeout elapses so a
/// dialer may start before its listener.
std::unique_ptr<ChannelEndpoint> dial(
    const std::string& address,
    std::chrono::milliseconds timeout = std::chrono::milliseconds(10000));

}  // namespace fedclaims
