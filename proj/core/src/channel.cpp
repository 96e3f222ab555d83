#include "fedclaims/channel.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include "fedclaims/error.hpp"

namespace fedclaims {

namespace {

// ---------------------------------------------------------------------------
// In-process channel: two mutex-guarded FIFO queues shared by the pair.

struct InprocQueue {
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<MessageEnvelope> messages;
  bool closed = false;
};

class InprocEndpoint final : public ChannelEndpoint {
 public:
  InprocEndpoint(std::shared_ptr<InprocQueue> incoming,
                 std::shared_ptr<InprocQueue> outgoing)
      : incoming_(std::move(incoming)), outgoing_(std::move(outgoing)) {}

  ~InprocEndpoint() override { close(); }

  void send(const MessageEnvelope& msg) override {
    if (!payload_matches(msg.type, msg.payload)) {
      fail(ErrorKind::Decode, "send: payload type does not match message type");
    }
    std::lock_guard lock(outgoing_->mutex);
    if (outgoing_->closed) fail(ErrorKind::Channel, "send: peer closed");
    outgoing_->messages.push_back(msg);
    outgoing_->cv.notify_one();
  }

  MessageEnvelope receive(std::chrono::milliseconds timeout) override {
    std::unique_lock lock(incoming_->mutex);
    if (!incoming_->cv.wait_for(lock, timeout, [this] {
          return !incoming_->messages.empty() || incoming_->closed;
        })) {
      fail(ErrorKind::Channel, "receive: timeout after " +
                                   std::to_string(timeout.count()) + "ms");
    }
    if (incoming_->messages.empty()) {
      fail(ErrorKind::Channel, "receive: channel closed by peer");
    }
    MessageEnvelope msg = std::move(incoming_->messages.front());
    incoming_->messages.pop_front();
    return msg;
  }

  void close() override {
    for (const auto& queue : {incoming_, outgoing_}) {
      std::lock_guard lock(queue->mutex);
      queue->closed = true;
      queue->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<InprocQueue> incoming_;
  std::shared_ptr<InprocQueue> outgoing_;
};

// ---------------------------------------------------------------------------
// Socket channel: encode() frames over a reliable byte stream.

struct SocketAddress {
  std::string host;
  std::uint16_t port = 0;
};

SocketAddress parse_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == address.size()) {
    fail(ErrorKind::Config, "address '" + address + "' is not host:port");
  }
  SocketAddress parsed;
  parsed.host = address.substr(0, colon);
  const std::string port_text = address.substr(colon + 1);
  char* end = nullptr;
  const long port = std::strtol(port_text.c_str(), &end, 10);
  if (end == nullptr || *end != '\0' || port < 0 || port > 0xFFFF) {
    fail(ErrorKind::Config, "address '" + address + "' has an invalid port");
  }
  parsed.port = static_cast<std::uint16_t>(port);
  return parsed;
}

sockaddr_in make_sockaddr(const SocketAddress& address) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(address.port);
  if (::inet_pton(AF_INET, address.host.c_str(), &sa.sin_addr) != 1) {
    fail(ErrorKind::Config, "address host '" + address.host +
                                "' is not an IPv4 literal");
  }
  return sa;
}

class SocketEndpoint final : public ChannelEndpoint {
 public:
  explicit SocketEndpoint(int fd) : fd_(fd) {
    int flag = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &flag, sizeof(flag));
  }

  ~SocketEndpoint() override { close(); }

  void send(const MessageEnvelope& msg) override {
    const auto frame = encode(msg);
    std::size_t sent = 0;
    while (sent < frame.size()) {
      const ssize_t n = ::send(fd_, frame.data() + sent, frame.size() - sent,
                               MSG_NOSIGNAL);
      if (n <= 0) fail(ErrorKind::Channel, "send: socket write failed");
      sent += static_cast<std::size_t>(n);
    }
  }

  MessageEnvelope receive(std::chrono::milliseconds timeout) override {
    std::vector<std::uint8_t> frame(kHeaderBytes);
    read_exact(frame.data(), kHeaderBytes, timeout);
    std::uint32_t payload_length = 0;
    for (int i = 0; i < 4; ++i) {
      payload_length |= static_cast<std::uint32_t>(frame[12 + i]) << (8 * i);
    }
    if (payload_length > kMaxPayloadBytes) {
      fail(ErrorKind::Decode, "receive: payload length exceeds maximum");
    }
    frame.resize(kHeaderBytes + payload_length);
    read_exact(frame.data() + kHeaderBytes, payload_length, timeout);
    return decode(frame);
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  void read_exact(std::uint8_t* out, std::size_t count,
                  std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::size_t got = 0;
    while (got < count) {
      const auto now = std::chrono::steady_clock::now();
      if (now >= deadline) fail(ErrorKind::Channel, "receive: timeout");
      pollfd pfd{fd_, POLLIN, 0};
      const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - now);
      const int ready = ::poll(&pfd, 1, static_cast<int>(wait.count()));
      if (ready == 0) fail(ErrorKind::Channel, "receive: timeout");
      if (ready < 0) fail(ErrorKind::Channel, "receive: poll failed");
      const ssize_t n = ::recv(fd_, out + got, count - got, 0);
      if (n == 0) fail(ErrorKind::Channel, "receive: peer closed connection");
      if (n < 0) fail(ErrorKind::Channel, "receive: socket read failed");
      got += static_cast<std::size_t>(n);
    }
  }

  int fd_ = -1;
};

class SocketListener final : public Listener {
 public:
  explicit SocketListener(const SocketAddress& address) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) fail(ErrorKind::Channel, "listen: cannot create socket");
    int flag = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &flag, sizeof(flag));
    sockaddr_in sa = make_sockaddr(address);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
      const std::string why = std::strerror(errno);
      ::close(fd_);
      fd_ = -1;
      fail(ErrorKind::Channel, "listen: bind failed on " + address.host + ":" +
                                   std::to_string(address.port) + " (" + why + ")");
    }
    if (::listen(fd_, 16) != 0) {
      ::close(fd_);
      fd_ = -1;
      fail(ErrorKind::Channel, "listen: listen() failed");
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
  }

  ~SocketListener() override {
    if (fd_ >= 0) ::close(fd_);
  }

  std::unique_ptr<ChannelEndpoint> accept(std::chrono::milliseconds timeout) override {
    pollfd pfd{fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (ready == 0) fail(ErrorKind::Channel, "accept: timeout");
    if (ready < 0) fail(ErrorKind::Channel, "accept: poll failed");
    const int client = ::accept(fd_, nullptr, nullptr);
    if (client < 0) fail(ErrorKind::Channel, "accept: accept() failed");
    return std::make_unique<SocketEndpoint>(client);
  }

  std::uint16_t port() const override { return port_; }

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace

std::pair<std::unique_ptr<ChannelEndpoint>, std::unique_ptr<ChannelEndpoint>>
open_inproc_pair() {
  auto a_to_b = std::make_shared<InprocQueue>();
  auto b_to_a = std::make_shared<InprocQueue>();
  return {std::make_unique<InprocEndpoint>(b_to_a, a_to_b),
          std::make_unique<InprocEndpoint>(a_to_b, b_to_a)};
}

std::unique_ptr<Listener> listen(const std::string& address) {
  return std::make_unique<SocketListener>(parse_address(address));
}

std::unique_ptr<ChannelEndpoint> dial(const std::string& address,
                                      std::chrono::milliseconds timeout) {
  const SocketAddress parsed = parse_address(address);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) fail(ErrorKind::Channel, "dial: cannot create socket");
    sockaddr_in sa = make_sockaddr(parsed);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) == 0) {
      return std::make_unique<SocketEndpoint>(fd);
    }
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline) {
      fail(ErrorKind::Channel, "dial: connection to " + address +
                                   " refused until timeout");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

}  // namespace fedclaims
