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

#ifndef EMBCACHE_CODEC_H_
#define EMBCACHE_CODEC_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "embcache/message.h"

namespace embcache {

// Frame layout (all integers little-endian, no padding):
//
//   [payload_len: u32][msg_type: u8][payload ...]
//
// payload_len counts the type byte plus the payload. Lists are prefixed by a
// u32 element count; keys and clocks are u64; vector elements are IEEE-754
// binary32 in index order. Per message payload:
//
//   FetchReq        keys: list<u64>
//   FetchResp       entries: list<(key u64, vector list<f32>, c_g u64)>
//   EvictReq        records: list<(key u64, delta list<f32>, c_c u64)>
//   EvictAck        (empty)
//   ClockCheckReq   pairs: list<(key u64, c_c u64)>
//   ClockCheckResp  pairs: list<(key u64, c_g u64)>
//   SyncReq         as EvictReq
//   SyncResp        as FetchResp
//   DenseReduceReq  worker_id u32, values list<f32>
//   DenseReduceResp values list<f32>
//   FlushReq        as EvictReq
//   FlushAck        (empty)
using Bytes = std::vector<std::uint8_t>;

inline constexpr std::size_t kLengthPrefixBytes = 4;

Bytes encode(const Message& msg);

// Decodes exactly one complete frame. Throws FramingError when the input is
// truncated or its length disagrees with the declared length, and
// ProtocolError on an unknown message type.
Message decode(std::span<const std::uint8_t> frame);

// Total frame size (prefix included) once at least the prefix is available.
std::optional<std::size_t> frame_size(std::span<const std::uint8_t> buffered);

// Split of one frame's bytes into accounting categories. The categories
// always sum to encode(msg).size().
struct ByteBreakdown {
  std::uint64_t embedding = 0;  // vector/delta elements of sparse rows
  std::uint64_t clock = 0;      // (key, clock) pairs of clock checks
  std::uint64_t dense = 0;      // dense reduction values
  std::uint64_t framing = 0;    // everything else

  std::uint64_t total() const { return embedding + clock + dense + framing; }
  ByteBreakdown& operator+=(const ByteBreakdown& other);
  friend bool operator==(const ByteBreakdown&, const ByteBreakdown&) = default;
};

ByteBreakdown classify(const Message& msg);
// Same, for a message whose encoded size is already known.
ByteBreakdown classify(const Message& msg, std::size_t frame_bytes);

}  // namespace embcache

#endif  // EMBCACHE_CODEC_H_
