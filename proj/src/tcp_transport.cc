/**
 * Copyright 2026 The embcache Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "embcache/tcp_transport.h"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "embcache/codec.h"
#include "embcache/errors.h"

namespace embcache {

namespace {

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

// Frames larger than this are treated as corruption.
constexpr std::size_t kMaxFrameBytes = std::size_t{1} << 30;

}  // namespace

Socket::~Socket() {
  if (fd_ >= 0) ::close(fd_);
}

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = other.release();
  }
  return *this;
}

void Socket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::write_all(std::span<const std::uint8_t> data) {
  std::size_t done = 0;
  while (done < data.size()) {
    const auto n = ::send(fd_, data.data() + done, data.size() - done, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("send"));
    }
    done += static_cast<std::size_t>(n);
  }
}

void Socket::read_exact(std::uint8_t* out, std::size_t n) {
  std::size_t done = 0;
  while (done < n) {
    const auto got = ::recv(fd_, out + done, n - done, 0);
    if (got == 0) throw TransportError("connection closed");
    if (got < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("recv"));
    }
    done += static_cast<std::size_t>(got);
  }
}

Bytes Socket::read_frame() {
  Bytes frame(kLengthPrefixBytes);
  read_exact(frame.data(), kLengthPrefixBytes);
  const auto total = *frame_size(frame);
  if (total > kMaxFrameBytes) {
    throw FramingError("frame of " + std::to_string(total) + " bytes exceeds limit");
  }
  frame.resize(total);
  read_exact(frame.data() + kLengthPrefixBytes, total - kLengthPrefixBytes);
  return frame;
}

TcpEndpoint::TcpEndpoint(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const auto service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0) {
    throw TransportError("resolve " + host + ": " + ::gai_strerror(rc));
  }
  std::string last_error = "no addresses";
  for (auto* ai = found; ai != nullptr; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!s.valid()) {
      last_error = errno_text("socket");
      continue;
    }
    if (::connect(s.fd(), ai->ai_addr, ai->ai_addrlen) == 0) {
      set_nodelay(s.fd());
      socket_ = std::move(s);
      break;
    }
    last_error = errno_text("connect");
  }
  ::freeaddrinfo(found);
  if (!socket_.valid()) {
    throw TransportError("connect " + host + ":" + service + ": " + last_error);
  }
}

void TcpEndpoint::send_frame(Bytes frame) { socket_.write_all(frame); }

Bytes TcpEndpoint::receive_frame() { return socket_.read_frame(); }

TcpServer::TcpServer(Service& service, const std::string& host, std::uint16_t port,
                     std::chrono::milliseconds barrier_timeout)
    : service_(service), barrier_timeout_(barrier_timeout) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw TransportError("listen address must be an IPv4 literal, got '" + host + "'");
  }
  listener_ = Socket(::socket(AF_INET, SOCK_STREAM, 0));
  if (!listener_.valid()) throw TransportError(errno_text("socket"));
  int one = 1;
  ::setsockopt(listener_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(listener_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw TransportError(errno_text("bind"));
  }
  if (::listen(listener_.fd(), 64) != 0) throw TransportError(errno_text("listen"));
  socklen_t len = sizeof(addr);
  ::getsockname(listener_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] { accept_loop(); });
}

TcpServer::~TcpServer() { stop(); }

void TcpServer::stop() {
  if (stopping_.exchange(true)) return;
  listener_.shutdown();
  if (acceptor_.joinable()) acceptor_.join();
  std::list<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

void TcpServer::accept_loop() {
  while (!stopping_) {
    const int fd = ::accept(listener_.fd(), nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    std::lock_guard lock(mu_);
    if (stopping_) {
      ::close(fd);
      return;
    }
    set_nodelay(fd);
    open_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { serve(fd); });
  }
}

void TcpServer::serve(int fd) {
  Socket conn(fd);
  try {
    while (!stopping_) {
      const Bytes frame = conn.read_frame();
      Message request = decode(frame);
      Message response;
      if (auto* dense = std::get_if<DenseReduceReq>(&request)) {
        const auto worker = dense->worker_id;
        const auto round = service_.submit_dense(worker, std::move(dense->values));
        response = DenseReduceResp{service_.await_dense(round, worker, barrier_timeout_)};
      } else {
        response = service_.handle(request);
      }
      conn.write_all(encode(response));
    }
  } catch (const Error&) {
    // Peer went away or sent garbage; dropping the connection is the only
    // error signal the wire format has.
  }
  std::lock_guard lock(mu_);
  open_fds_.remove(fd);
  conn = Socket();
}

}  // namespace embcache
