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

#include "embcache/message.h"

#include <string>

#include "embcache/errors.h"

namespace embcache {

MessageType type_of(const Message& msg) {
  return static_cast<MessageType>(msg.index() + 1);
}

std::string_view type_name(MessageType type) {
  switch (type) {
    case MessageType::kFetchReq: return "FetchReq";
    case MessageType::kFetchResp: return "FetchResp";
    case MessageType::kEvictReq: return "EvictReq";
    case MessageType::kEvictAck: return "EvictAck";
    case MessageType::kClockCheckReq: return "ClockCheckReq";
    case MessageType::kClockCheckResp: return "ClockCheckResp";
    case MessageType::kSyncReq: return "SyncReq";
    case MessageType::kSyncResp: return "SyncResp";
    case MessageType::kDenseReduceReq: return "DenseReduceReq";
    case MessageType::kDenseReduceResp: return "DenseReduceResp";
    case MessageType::kFlushReq: return "FlushReq";
    case MessageType::kFlushAck: return "FlushAck";
  }
  return "Unknown";
}

bool is_request(MessageType type) {
  // Requests have odd tags, their responses the following even tag.
  return (static_cast<std::uint8_t>(type) & 1U) != 0;
}

MessageType response_type_for(MessageType request) {
  if (!is_request(request)) {
    throw ProtocolError(std::string(type_name(request)) + " is not a request");
  }
  return static_cast<MessageType>(static_cast<std::uint8_t>(request) + 1);
}

void throw_unexpected_type(MessageType got, MessageType wanted) {
  throw ProtocolError("expected " + std::string(type_name(wanted)) + ", got " + std::string(type_name(got)));
}

}  // namespace embcache
