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

#ifndef EMBCACHE_MESSAGE_H_
#define EMBCACHE_MESSAGE_H_

#include <cstdint>
#include <string_view>
#include <variant>
#include <vector>

#include "embcache/core.h"

namespace embcache {

// Wire tags. Values are part of the stable protocol; never renumber.
enum class MessageType : std::uint8_t {
  kFetchReq = 0x01,
  kFetchResp = 0x02,
  kEvictReq = 0x03,
  kEvictAck = 0x04,
  kClockCheckReq = 0x05,
  kClockCheckResp = 0x06,
  kSyncReq = 0x07,
  kSyncResp = 0x08,
  kDenseReduceReq = 0x09,
  kDenseReduceResp = 0x0A,
  kFlushReq = 0x0B,
  kFlushAck = 0x0C,
};

struct FetchReq {
  std::vector<EmbeddingKey> keys;
  friend bool operator==(const FetchReq&, const FetchReq&) = default;
};

struct FetchResp {
  std::vector<KeyedVector> entries;
  friend bool operator==(const FetchResp&, const FetchResp&) = default;
};

struct EvictReq {
  std::vector<EvictRecord> records;
  friend bool operator==(const EvictReq&, const EvictReq&) = default;
};

struct EvictAck {
  friend bool operator==(const EvictAck&, const EvictAck&) = default;
};

struct ClockCheckReq {
  std::vector<KeyClock> pairs;  // (key, c_c)
  friend bool operator==(const ClockCheckReq&, const ClockCheckReq&) = default;
};

struct ClockCheckResp {
  std::vector<KeyClock> pairs;  // (key, c_g), query order preserved
  friend bool operator==(const ClockCheckResp&, const ClockCheckResp&) = default;
};

// Write-back fused with a fetch of the same keys.
struct SyncReq {
  std::vector<EvictRecord> records;
  friend bool operator==(const SyncReq&, const SyncReq&) = default;
};

struct SyncResp {
  std::vector<KeyedVector> entries;
  friend bool operator==(const SyncResp&, const SyncResp&) = default;
};

struct DenseReduceReq {
  std::uint32_t worker_id = 0;
  std::vector<float> values;
  friend bool operator==(const DenseReduceReq&, const DenseReduceReq&) = default;
};

struct DenseReduceResp {
  std::vector<float> values;
  friend bool operator==(const DenseReduceResp&, const DenseReduceResp&) = default;
};

struct FlushReq {
  std::vector<EvictRecord> records;
  friend bool operator==(const FlushReq&, const FlushReq&) = default;
};

struct FlushAck {
  friend bool operator==(const FlushAck&, const FlushAck&) = default;
};

using Message = std::variant<FetchReq, FetchResp, EvictReq, EvictAck, ClockCheckReq, ClockCheckResp, SyncReq,
                             SyncResp, DenseReduceReq, DenseReduceResp, FlushReq, FlushAck>;

MessageType type_of(const Message& msg);
std::string_view type_name(MessageType type);

// The response type paired with a request type. Throws ProtocolError for
// response types.
MessageType response_type_for(MessageType request);

bool is_request(MessageType type);

[[noreturn]] void throw_unexpected_type(MessageType got, MessageType wanted);

// Unwraps a response, throwing ProtocolError if it is not a T.
template <typename T>
T expect(Message msg) {
  if (auto* value = std::get_if<T>(&msg)) {
    return std::move(*value);
  }
  throw_unexpected_type(type_of(msg), type_of(Message{T{}}));
}

}  // namespace embcache

#endif  // EMBCACHE_MESSAGE_H_
