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

#ifndef EMBCACHE_TRANSPORT_H_
#define EMBCACHE_TRANSPORT_H_

#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <vector>

#include "embcache/codec.h"
#include "embcache/message.h"

namespace embcache {

// Server-side request processing, shared by every backend.
class Service {
 public:
  virtual ~Service() = default;

  // Handles every request type except DenseReduceReq.
  virtual Message handle(const Message& request) = 0;

  // Dense rendezvous. A worker submits its contribution for the next round
  // and gets the round id back; the round completes once every worker has
  // contributed. poll_dense never blocks; await_dense throws BarrierError on
  // timeout.
  virtual std::uint64_t submit_dense(std::uint32_t worker_id, std::vector<float> values) = 0;
  virtual std::optional<std::vector<float>> poll_dense(std::uint64_t round, std::uint32_t worker_id) = 0;
  virtual std::vector<float> await_dense(std::uint64_t round, std::uint32_t worker_id,
                                         std::chrono::milliseconds timeout) = 0;
};

struct DirectionBytes {
  ByteBreakdown sent;
  ByteBreakdown received;

  friend bool operator==(const DirectionBytes&, const DirectionBytes&) = default;
};

// A worker's connection to the server. Responses are delivered in request
// order. Byte accounting is done here so every backend counts identically.
class Endpoint {
 public:
  virtual ~Endpoint() = default;

  // send and receive are not synchronized; pipelining callers must own the
  // endpoint. request() may be called from several threads.
  void send(const Message& request);
  Message receive();
  Message request(const Message& msg);

  const DirectionBytes& bytes() const { return bytes_; }
  // Completed request/response pairs.
  std::uint64_t round_trips() const { return round_trips_; }

 protected:
  virtual void send_frame(Bytes frame) = 0;
  virtual Bytes receive_frame() = 0;

 private:
  std::mutex request_mu_;
  DirectionBytes bytes_;
  std::uint64_t round_trips_ = 0;
  std::uint64_t outstanding_ = 0;
};

}  // namespace embcache

#endif  // EMBCACHE_TRANSPORT_H_
