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

#ifndef EMBCACHE_TCP_TRANSPORT_H_
#define EMBCACHE_TCP_TRANSPORT_H_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <list>
#include <mutex>
#include <string>
#include <span>
#include <thread>
#include <utility>

#include "embcache/transport.h"

namespace embcache {

// Owning file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release() { return std::exchange(fd_, -1); }
  void shutdown();

  void write_all(std::span<const std::uint8_t> data);
  // Reads one whole frame. Throws TransportError on EOF or error.
  Bytes read_frame();

 private:
  void read_exact(std::uint8_t* out, std::size_t n);

  int fd_ = -1;
};

// Client side of the framed protocol over one TCP connection.
class TcpEndpoint final : public Endpoint {
 public:
  TcpEndpoint(const std::string& host, std::uint16_t port);

 protected:
  void send_frame(Bytes frame) override;
  Bytes receive_frame() override;

 private:
  Socket socket_;
};

// Accepts connections and serves each on its own thread. Requests on one
// connection are handled in order; a DenseReduceReq blocks its connection
// until the round completes or the barrier times out (the connection is then
// closed). Protocol errors also close the offending connection.
class TcpServer {
 public:
  // Port 0 picks an ephemeral port; see port().
  TcpServer(Service& service, const std::string& host, std::uint16_t port,
            std::chrono::milliseconds barrier_timeout = std::chrono::seconds(30));
  ~TcpServer();

  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const { return port_; }
  void stop();

 private:
  void accept_loop();
  void serve(int fd);

  Service& service_;
  std::chrono::milliseconds barrier_timeout_;
  Socket listener_;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::list<std::thread> workers_;
  std::list<int> open_fds_;
};

}  // namespace embcache

#endif  // EMBCACHE_TCP_TRANSPORT_H_
