#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include "ffl/federation.hpp"

namespace ffl {

/// Pair of in-process channels joined by two blocking queues.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> makeInprocChannelPair();

/// Length-framed messages over a connected TCP socket.
class TcpChannel : public Channel {
public:
  explicit TcpChannel(int fd);
  ~TcpChannel() override;
  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;

  void send(const RoundMessage& m) override;
  RoundMessage recv() override;
  void close() override;

private:
  int fd_;
};

class TcpListener {
public:
  /// Binds host:port; port 0 picks an ephemeral port.
  TcpListener(const std::string& host, int port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  int port() const { return port_; }
  std::unique_ptr<Channel> accept();

private:
  int fd_;
  int port_;
};

std::unique_ptr<Channel> connectTcp(const std::string& host, int port);

}  // namespace ffl
