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

#include "embcache/codec.h"

#include <bit>
#include <cstring>
#include <string>

#include "embcache/errors.h"

namespace embcache {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  void count(std::size_t n) {
    if (n > UINT32_MAX) throw ProtocolError("list too long for the wire format");
    u32(static_cast<std::uint32_t>(n));
  }
  void floats(std::span<const float> values) {
    count(values.size());
    for (float v : values) f32(v);
  }
  void keyed_vectors(const std::vector<KeyedVector>& entries) {
    count(entries.size());
    for (const auto& e : entries) {
      u64(e.key.id);
      floats(e.vector);
      u64(e.clock);
    }
  }
  void records(const std::vector<EvictRecord>& records) {
    count(records.size());
    for (const auto& r : records) {
      u64(r.key.id);
      floats(r.delta);
      u64(r.clock);
    }
  }
  void key_clocks(const std::vector<KeyClock>& pairs) {
    count(pairs.size());
    for (const auto& p : pairs) {
      u64(p.key.id);
      u64(p.clock);
    }
  }

  Bytes finish(MessageType type) && {
    Bytes frame;
    frame.reserve(kLengthPrefixBytes + 1 + out_.size());
    const auto len = static_cast<std::uint32_t>(out_.size() + 1);
    for (int i = 0; i < 4; ++i) frame.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
    frame.push_back(static_cast<std::uint8_t>(type));
    frame.insert(frame.end(), out_.begin(), out_.end());
    return frame;
  }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }

  // Reads a count and checks that `min_elem_bytes` per element can still fit,
  // so a corrupt count cannot trigger a huge allocation.
  std::size_t count(std::size_t min_elem_bytes) {
    const std::size_t n = u32();
    if (min_elem_bytes > 0 && n > remaining() / min_elem_bytes) {
      throw FramingError("list count " + std::to_string(n) + " exceeds frame");
    }
    return n;
  }
  std::vector<float> floats() {
    const std::size_t n = count(4);
    std::vector<float> out(n);
    for (auto& v : out) v = f32();
    return out;
  }
  std::vector<KeyedVector> keyed_vectors() {
    const std::size_t n = count(20);
    std::vector<KeyedVector> out(n);
    for (auto& e : out) {
      e.key.id = u64();
      e.vector = floats();
      e.clock = u64();
    }
    return out;
  }
  std::vector<EvictRecord> records() {
    const std::size_t n = count(20);
    std::vector<EvictRecord> out(n);
    for (auto& r : out) {
      r.key.id = u64();
      r.delta = floats();
      r.clock = u64();
    }
    return out;
  }
  std::vector<KeyClock> key_clocks() {
    const std::size_t n = count(16);
    std::vector<KeyClock> out(n);
    for (auto& p : out) {
      p.key.id = u64();
      p.clock = u64();
    }
    return out;
  }

  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw FramingError("truncated frame");
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint64_t vector_bytes(const std::vector<KeyedVector>& entries) {
  std::uint64_t n = 0;
  for (const auto& e : entries) n += 4 * e.vector.size();
  return n;
}

std::uint64_t vector_bytes(const std::vector<EvictRecord>& records) {
  std::uint64_t n = 0;
  for (const auto& r : records) n += 4 * r.delta.size();
  return n;
}

}  // namespace

Bytes encode(const Message& msg) {
  Writer w;
  std::visit(
      [&w](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, FetchReq>) {
          w.count(m.keys.size());
          for (auto k : m.keys) w.u64(k.id);
        } else if constexpr (std::is_same_v<T, FetchResp> || std::is_same_v<T, SyncResp>) {
          w.keyed_vectors(m.entries);
        } else if constexpr (std::is_same_v<T, EvictReq> || std::is_same_v<T, SyncReq> ||
                             std::is_same_v<T, FlushReq>) {
          w.records(m.records);
        } else if constexpr (std::is_same_v<T, ClockCheckReq> || std::is_same_v<T, ClockCheckResp>) {
          w.key_clocks(m.pairs);
        } else if constexpr (std::is_same_v<T, DenseReduceReq>) {
          w.u32(m.worker_id);
          w.floats(m.values);
        } else if constexpr (std::is_same_v<T, DenseReduceResp>) {
          w.floats(m.values);
        }
        // EvictAck and FlushAck carry no payload.
      },
      msg);
  return std::move(w).finish(type_of(msg));
}

std::optional<std::size_t> frame_size(std::span<const std::uint8_t> buffered) {
  if (buffered.size() < kLengthPrefixBytes) {
    return std::nullopt;
  }
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(buffered[i]) << (8 * i);
  return kLengthPrefixBytes + static_cast<std::size_t>(len);
}

Message decode(std::span<const std::uint8_t> frame) {
  const auto declared = frame_size(frame);
  if (!declared) {
    throw FramingError("incomplete frame: missing length prefix");
  }
  if (*declared == kLengthPrefixBytes) {
    throw FramingError("frame declares zero length");
  }
  if (frame.size() < *declared) {
    throw FramingError("truncated frame: declared " + std::to_string(*declared) + " bytes, have " +
                       std::to_string(frame.size()));
  }
  if (frame.size() > *declared) {
    throw FramingError("frame length mismatch: declared " + std::to_string(*declared) + " bytes, have " +
                       std::to_string(frame.size()));
  }
  Reader r(frame.subspan(kLengthPrefixBytes));
  const auto tag = r.u8();
  Message out;
  switch (static_cast<MessageType>(tag)) {
    case MessageType::kFetchReq: {
      FetchReq m;
      m.keys.resize(r.count(8));
      for (auto& k : m.keys) k.id = r.u64();
      out = std::move(m);
      break;
    }
    case MessageType::kFetchResp:
      out = FetchResp{r.keyed_vectors()};
      break;
    case MessageType::kEvictReq:
      out = EvictReq{r.records()};
      break;
    case MessageType::kEvictAck:
      out = EvictAck{};
      break;
    case MessageType::kClockCheckReq:
      out = ClockCheckReq{r.key_clocks()};
      break;
    case MessageType::kClockCheckResp:
      out = ClockCheckResp{r.key_clocks()};
      break;
    case MessageType::kSyncReq:
      out = SyncReq{r.records()};
      break;
    case MessageType::kSyncResp:
      out = SyncResp{r.keyed_vectors()};
      break;
    case MessageType::kDenseReduceReq: {
      DenseReduceReq m;
      m.worker_id = r.u32();
      m.values = r.floats();
      out = std::move(m);
      break;
    }
    case MessageType::kDenseReduceResp:
      out = DenseReduceResp{r.floats()};
      break;
    case MessageType::kFlushReq:
      out = FlushReq{r.records()};
      break;
    case MessageType::kFlushAck:
      out = FlushAck{};
      break;
    default:
      throw ProtocolError("unknown message type 0x" + [tag] {
        static constexpr char kHex[] = "0123456789ABCDEF";
        return std::string{kHex[tag >> 4], kHex[tag & 0xF]};
      }());
  }
  if (r.remaining() != 0) {
    throw FramingError("frame length mismatch: " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return out;
}

ByteBreakdown& ByteBreakdown::operator+=(const ByteBreakdown& other) {
  embedding += other.embedding;
  clock += other.clock;
  dense += other.dense;
  framing += other.framing;
  return *this;
}

ByteBreakdown classify(const Message& msg) { return classify(msg, encode(msg).size()); }

ByteBreakdown classify(const Message& msg, std::size_t frame_bytes) {
  ByteBreakdown b;
  std::visit(
      [&b](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, FetchResp> || std::is_same_v<T, SyncResp>) {
          b.embedding = vector_bytes(m.entries);
        } else if constexpr (std::is_same_v<T, EvictReq> || std::is_same_v<T, SyncReq> ||
                             std::is_same_v<T, FlushReq>) {
          b.embedding = vector_bytes(m.records);
        } else if constexpr (std::is_same_v<T, ClockCheckReq> || std::is_same_v<T, ClockCheckResp>) {
          b.clock = 16 * m.pairs.size();
        } else if constexpr (std::is_same_v<T, DenseReduceReq> || std::is_same_v<T, DenseReduceResp>) {
          b.dense = 4 * m.values.size();
        }
      },
      msg);
  b.framing = frame_bytes - b.embedding - b.clock - b.dense;
  return b;
}

}  // namespace embcache
