/*
 * Copyright 2026 The fogfl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Blocking POSIX TCP plumbing: RAII sockets, a polling accept loop with one
// thread per connection, and the framed message server built on top of it.

#pragma once

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>

#include "fogfl/error.hpp"
#include "fogfl/log.hpp"
#include "fogfl/wire/codec.hpp"
#include "fogfl/wire/dispatch.hpp"

namespace fogfl::wire {

using namespace std::chrono_literals;

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { close(); }

  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }

  void shutdown_write() const {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
  }

  void close() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
};

namespace detail {

inline sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (ep.host.empty() || ep.host == "0.0.0.0") {
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    return addr;
  }
  if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw Error(Errc::Unreachable, "cannot resolve " + ep.host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

/// Waits for `events` on fd. Returns false on timeout.
inline bool wait_for(int fd, short events, std::chrono::milliseconds timeout) {
  pollfd p{fd, events, 0};
  for (;;) {
    const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc > 0) return true;
    if (rc == 0) return false;
    if (errno != EINTR) throw Error(Errc::IoError, std::string("poll: ") + std::strerror(errno));
  }
}

}  // namespace detail

inline Socket connect_to(const Endpoint& ep, std::chrono::milliseconds timeout = 2000ms) {
  const sockaddr_in addr = detail::resolve(ep);
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw Error(Errc::IoError, std::string("socket: ") + std::strerror(errno));

  const int flags = ::fcntl(s.fd(), F_GETFL, 0);
  ::fcntl(s.fd(), F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
  if (rc != 0 && errno != EINPROGRESS) {
    throw Error(Errc::Unreachable, ep.to_string() + ": " + std::strerror(errno));
  }
  if (rc != 0) {
    if (!detail::wait_for(s.fd(), POLLOUT, timeout)) {
      throw Error(Errc::Unreachable, ep.to_string() + ": connect timed out");
    }
    int err = 0;
    socklen_t len = sizeof err;
    ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) throw Error(Errc::Unreachable, ep.to_string() + ": " + std::strerror(err));
  }
  ::fcntl(s.fd(), F_SETFL, flags);
  int one = 1;
  ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return s;
}

inline void write_all(const Socket& s, std::span<const std::uint8_t> bytes) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(s.fd(), bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::IoError, std::string("send: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

/// Reads up to `out.size()` bytes. Returns 0 on orderly EOF and nullopt when
/// nothing arrived within `timeout`.
inline std::optional<std::size_t> read_some(const Socket& s, std::span<std::uint8_t> out,
                                            std::chrono::milliseconds timeout) {
  if (!detail::wait_for(s.fd(), POLLIN, timeout)) return std::nullopt;
  for (;;) {
    const ssize_t n = ::recv(s.fd(), out.data(), out.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    if (errno == ECONNRESET) return 0;
    throw Error(Errc::IoError, std::string("recv: ") + std::strerror(errno));
  }
}

/// Fills `out` completely or throws (Truncated on EOF, Timeout on silence).
inline void read_exact(const Socket& s, std::span<std::uint8_t> out,
                       std::chrono::milliseconds timeout) {
  std::size_t off = 0;
  while (off < out.size()) {
    auto n = read_some(s, out.subspan(off), timeout);
    if (!n) throw Error(Errc::Timeout, "peer went silent");
    if (*n == 0) throw Error(Errc::Truncated, "peer closed mid-frame");
    off += *n;
  }
}

/// Reads one length-prefixed frame body from a blocking stream.
inline Bytes read_frame(const Socket& s, std::size_t cap, std::chrono::milliseconds timeout) {
  std::uint8_t header[kFrameHeaderBytes];
  read_exact(s, header, timeout);
  const std::uint32_t len = get_u32_be(header);
  if (len > cap) throw Error(Errc::OversizeMessage, "frame length exceeds cap");
  Bytes body(len);
  read_exact(s, body, timeout);
  return body;
}

/// "host:port" -> Endpoint. The port must be 0..65535.
inline Endpoint parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    throw Error(Errc::InvalidArgument, "expected host:port, got " + std::string(text));
  }
  unsigned long port = 0;
  for (char c : text.substr(colon + 1)) {
    if (c < '0' || c > '9' || (port = port * 10 + static_cast<unsigned long>(c - '0')) > 65535) {
      throw Error(Errc::InvalidArgument, "bad port in " + std::string(text));
    }
  }
  return Endpoint{std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

/// Fire-and-forget delivery of one message on a fresh connection.
inline void send_message(const Endpoint& to, const Message& m,
                         std::chrono::milliseconds timeout = 2000ms) {
  const Bytes frame = encode(m);
  Socket s = connect_to(to, timeout);
  write_all(s, frame);
  s.shutdown_write();
}

/// Accept loop with one thread per connection. `stop()` closes the listening
/// socket, then waits for every connection handler to return.
class TcpListener {
 public:
  using ConnectionHandler = std::function<void(Socket&, const std::atomic<bool>& stopping)>;

  TcpListener(const Endpoint& bind_to, ConnectionHandler handler)
      : handler_(std::move(handler)) {
    const sockaddr_in addr = detail::resolve(bind_to);
    listen_ = Socket(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!listen_.valid()) throw Error(Errc::BindFailure, std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(listen_.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
      throw Error(Errc::BindFailure, bind_to.to_string() + ": " + std::strerror(errno));
    }
    if (::listen(listen_.fd(), 128) != 0) {
      throw Error(Errc::BindFailure, bind_to.to_string() + ": " + std::strerror(errno));
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(listen_.fd(), reinterpret_cast<sockaddr*>(&bound), &len);
    endpoint_ = Endpoint{bind_to.host.empty() ? "127.0.0.1" : bind_to.host, ntohs(bound.sin_port)};
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  ~TcpListener() { stop(); }

  const Endpoint& endpoint() const noexcept { return endpoint_; }

  void stop() {
    if (stopping_.exchange(true)) return;
    if (accept_thread_.joinable()) accept_thread_.join();
    listen_.close();
    std::list<Conn> conns;
    {
      std::lock_guard lock(mu_);
      conns.swap(conns_);
    }
    for (auto& c : conns) {
      if (c.thread.joinable()) c.thread.join();
    }
  }

 private:
  struct Conn {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };

  void accept_loop() {
    while (!stopping_.load()) {
      reap();
      bool ready = false;
      try {
        ready = detail::wait_for(listen_.fd(), POLLIN, 50ms);
      } catch (const Error& e) {
        log::error("listener poll failed: ", e.what());
        return;
      }
      if (!ready) continue;
      const int fd = ::accept4(listen_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
      if (fd < 0) continue;
      auto done = std::make_shared<std::atomic<bool>>(false);
      std::lock_guard lock(mu_);
      conns_.push_back(Conn{std::thread([this, fd, done] {
                              Socket s(fd);
                              try {
                                handler_(s, stopping_);
                              } catch (const std::exception& e) {
                                log::warn("connection handler: ", e.what());
                              }
                              done->store(true);
                            }),
                            done});
    }
  }

  void reap() {
    std::lock_guard lock(mu_);
    for (auto it = conns_.begin(); it != conns_.end();) {
      if (it->done->load()) {
        it->thread.join();
        it = conns_.erase(it);
      } else {
        ++it;
      }
    }
  }

  ConnectionHandler handler_;
  Socket listen_;
  Endpoint endpoint_;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex mu_;
  std::list<Conn> conns_;
};

/// Socket server for control messages: reassembles frames across partial
/// reads and dispatches each connection's messages in arrival order. Malformed
/// frames and dispatch errors are logged; the connection stays open.
class MessageServer {
 public:
  MessageServer(const Endpoint& bind_to, HandlerTable table)
      : table_(std::move(table)),
        listener_(bind_to, [this](Socket& s, const std::atomic<bool>& stopping) {
          serve_connection(s, stopping);
        }) {}

  const Endpoint& endpoint() const noexcept { return listener_.endpoint(); }
  void stop() { listener_.stop(); }

  std::uint64_t dispatched() const noexcept { return dispatched_.load(); }
  std::uint64_t dropped() const noexcept { return dropped_.load(); }

 private:
  void serve_connection(Socket& s, const std::atomic<bool>& stopping) {
    FrameAssembler assembler;
    std::uint8_t buf[64 * 1024];
    for (;;) {
      auto n = read_some(s, buf, 50ms);
      if (!n) {
        if (stopping.load()) return;
        continue;
      }
      if (*n == 0) return;
      assembler.feed(std::span(buf, *n));
      for (;;) {
        std::optional<Bytes> body;
        try {
          body = assembler.next();
        } catch (const Error& e) {
          log::warn("closing connection: ", e.what());
          return;
        }
        if (!body) break;
        handle_body(*body);
      }
    }
  }

  void handle_body(const Bytes& body) {
    Message m;
    try {
      m = decode_body(body);
    } catch (const Error& e) {
      ++dropped_;
      log::warn("dropping frame: ", e.what());
      return;
    }
    try {
      dispatch(m, table_);
      ++dispatched_;
    } catch (const Error& e) {
      ++dropped_;
      log::warn("dispatch failed: ", e.what());
    } catch (const std::exception& e) {
      ++dropped_;
      log::warn("handler threw: ", e.what());
    }
  }

  HandlerTable table_;
  std::atomic<std::uint64_t> dispatched_{0};
  std::atomic<std::uint64_t> dropped_{0};
  TcpListener listener_;
};

/// Starts a message server on `endpoint` (port 0 picks a free port).
inline std::unique_ptr<MessageServer> serve(const Endpoint& endpoint, HandlerTable table) {
  return std::make_unique<MessageServer>(endpoint, std::move(table));
}

}  // namespace fogfl::wire
