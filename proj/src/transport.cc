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

#include "embcache/transport.h"

#include "embcache/errors.h"

namespace embcache {

void Endpoint::send(const Message& request) {
  if (!is_request(type_of(request))) {
    throw ProtocolError("cannot send response type " + std::string(type_name(type_of(request))));
  }
  Bytes frame = encode(request);
  const auto breakdown = classify(request, frame.size());
  send_frame(std::move(frame));
  bytes_.sent += breakdown;
  ++outstanding_;
}

Message Endpoint::receive() {
  if (outstanding_ == 0) {
    throw ProtocolError("receive without an outstanding request");
  }
  Bytes frame = receive_frame();
  Message response = decode(frame);
  bytes_.received += classify(response, frame.size());
  --outstanding_;
  ++round_trips_;
  return response;
}

Message Endpoint::request(const Message& msg) {
  std::lock_guard lock(request_mu_);
  send(msg);
  return receive();
}

}  // namespace embcache
