#include "ffl/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

namespace ffl {

namespace {

/// One direction of an in-process channel.
struct MessageQueue {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<RoundMessage> items;
  bool closed = false;

  void push(RoundMessage m) {
    {
      std::lock_guard lock(mu);
      if (closed) throw std::runtime_error("channel closed");
      items.push_back(std::move(m));
    }
    cv.notify_one();
  }

  RoundMessage pop() {
    std::unique_lock lock(mu);
    cv.wait(lock, [this] { return closed || !items.empty(); });
    if (items.empty()) throw std::runtime_error("channel closed");
    RoundMessage m = std::move(items.front());
    items.pop_front();
    return m;
  }

  void close() {
    {
      std::lock_guard lock(mu);
      closed = true;
    }
    cv.notify_all();
  }
};

class InprocChannel : public Channel {
public:
  InprocChannel(std::shared_ptr<MessageQueue> out, std::shared_ptr<MessageQueue> in)
      : out_(std::move(out)), in_(std::move(in)) {}

  void send(const RoundMessage& m) override { out_->push(m); }
  RoundMessage recv() override { return in_->pop(); }
  void close() override {
    out_->close();
    in_->close();
  }

private:
  std::shared_ptr<MessageQueue> out_;
  std::shared_ptr<MessageQueue> in_;
};

void throwErrno(const std::string& what) {
  throw std::runtime_error(what + ": " + std::strerror(errno));
}

void writeAll(int fd, const std::uint8_t* data, std::size_t len) {
  std::size_t sent = 0;
  while (sent < len) {
    ssize_t n = ::send(fd, data + sent, len - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throwErrno("tcp send failed");
    }
    sent += std::size_t(n);
  }
}

void readAll(int fd, std::uint8_t* data, std::size_t len) {
  std::size_t got = 0;
  while (got < len) {
    ssize_t n = ::recv(fd, data + got, len - got, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throwErrno("tcp recv failed");
    }
    if (n == 0) throw std::runtime_error("tcp connection closed by peer");
    got += std::size_t(n);
  }
}

sockaddr_in makeAddr(const std::string& host, int port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(std::uint16_t(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw std::runtime_error("invalid host address: " + host);
  return addr;
}

}  // namespace

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> makeInprocChannelPair() {
  auto a2b = std::make_shared<MessageQueue>();
  auto b2a = std::make_shared<MessageQueue>();
  return {std::make_unique<InprocChannel>(a2b, b2a), std::make_unique<InprocChannel>(b2a, a2b)};
}

TcpChannel::TcpChannel(int fd) : fd_(fd) {
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

TcpChannel::~TcpChannel() {
  if (fd_ >= 0) ::close(fd_);
}

void TcpChannel::send(const RoundMessage& m) {
  auto bytes = encodeMessage(m);
  writeAll(fd_, bytes.data(), bytes.size());
}

RoundMessage TcpChannel::recv() {
  std::vector<std::uint8_t> frame(kFrameHeaderSize);
  readAll(fd_, frame.data(), kFrameHeaderSize);
  const std::size_t total = frameLength(frame.data(), frame.size());
  frame.resize(total);
  readAll(fd_, frame.data() + kFrameHeaderSize, total - kFrameHeaderSize);
  return decodeMessage(frame);
}

void TcpChannel::close() { ::shutdown(fd_, SHUT_RDWR); }

TcpListener::TcpListener(const std::string& host, int port) : fd_(-1), port_(0) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throwErrno("socket failed");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = makeAddr(host, port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0)
    throwErrno("bind failed");
  if (::listen(fd_, 64) < 0) throwErrno("listen failed");
  socklen_t len = sizeof(addr);
  if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) < 0)
    throwErrno("getsockname failed");
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Channel> TcpListener::accept() {
  int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) throwErrno("accept failed");
  return std::make_unique<TcpChannel>(fd);
}

std::unique_ptr<Channel> connectTcp(const std::string& host, int port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throwErrno("socket failed");
  sockaddr_in addr = makeAddr(host, port);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    int saved = errno;
    ::close(fd);
    errno = saved;
    throwErrno("connect failed");
  }
  return std::make_unique<TcpChannel>(fd);
}

}  // namespace ffl
