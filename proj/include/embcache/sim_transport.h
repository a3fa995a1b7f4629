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

#ifndef EMBCACHE_SIM_TRANSPORT_H_
#define EMBCACHE_SIM_TRANSPORT_H_

#include <cstdint>
#include <deque>
#include <variant>

#include "embcache/transport.h"

namespace embcache {

// In-process endpoint. Each request is encoded, decoded and handled by the
// service synchronously at send time, so the caller's order is the global
// order. Dense reductions are answered at receive time; a round that is still
// missing contributions then raises BarrierError instead of blocking.
class SimEndpoint final : public Endpoint {
 public:
  explicit SimEndpoint(Service& service) : service_(service) {}

 protected:
  void send_frame(Bytes frame) override;
  Bytes receive_frame() override;

 private:
  struct PendingDense {
    std::uint64_t round;
    std::uint32_t worker_id;
  };

  Service& service_;
  std::deque<std::variant<Bytes, PendingDense>> pending_;
};

}  // namespace embcache

#endif  // EMBCACHE_SIM_TRANSPORT_H_
