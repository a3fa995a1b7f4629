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

#include "embcache/sim_transport.h"

#include <string>

#include "embcache/errors.h"

namespace embcache {

void SimEndpoint::send_frame(Bytes frame) {
  Message request = decode(frame);
  if (auto* dense = std::get_if<DenseReduceReq>(&request)) {
    const auto round = service_.submit_dense(dense->worker_id, std::move(dense->values));
    pending_.emplace_back(PendingDense{round, dense->worker_id});
    return;
  }
  pending_.emplace_back(encode(service_.handle(request)));
}

Bytes SimEndpoint::receive_frame() {
  if (pending_.empty()) {
    throw ProtocolError("no pending response");
  }
  auto next = std::move(pending_.front());
  pending_.pop_front();
  if (auto* ready = std::get_if<Bytes>(&next)) {
    return std::move(*ready);
  }
  const auto& dense = std::get<PendingDense>(next);
  auto result = service_.poll_dense(dense.round, dense.worker_id);
  if (!result) {
    throw BarrierError("dense round " + std::to_string(dense.round) + " is missing contributions");
  }
  return encode(DenseReduceResp{std::move(*result)});
}

}  // namespace embcache
