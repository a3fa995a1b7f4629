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

#ifndef EMBCACHE_CORE_H_
#define EMBCACHE_CORE_H_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace embcache {

// Opaque categorical feature identifier.
struct EmbeddingKey {
  std::uint64_t id = 0;

  friend constexpr auto operator<=>(EmbeddingKey, EmbeddingKey) = default;
};

struct EmbeddingKeyHash {
  std::size_t operator()(EmbeddingKey key) const noexcept;
};

using ClockValue = std::uint64_t;

// One row of an embedding table, length D.
using EmbeddingVector = std::vector<float>;

// Additive change to an embedding, already scaled by -eta.
using UpdateDelta = std::vector<float>;

// Maximum permitted clock divergence, in iterations. Infinite disables
// both validity conditions.
class StalenessBound {
 public:
  constexpr StalenessBound() = default;
  constexpr explicit StalenessBound(std::uint64_t s) : s_(s) {}

  static constexpr StalenessBound infinite() { return StalenessBound(kInfinite); }

  constexpr bool is_infinite() const { return s_ == kInfinite; }
  constexpr std::uint64_t value() const { return s_; }

  // clock + s, saturating at the maximum clock.
  constexpr ClockValue add_to(ClockValue clock) const {
    return clock > kInfinite - s_ ? kInfinite : clock + s_;
  }

  // "inf" or the decimal value.
  std::string to_string() const;
  // Accepts a non-negative integer or one of "inf", "infinite", "infinity".
  static StalenessBound parse(const std::string& text);

  friend constexpr bool operator==(StalenessBound, StalenessBound) = default;

 private:
  static constexpr std::uint64_t kInfinite = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t s_ = 0;
};

// (key, vector, clock) as returned by fetches and syncs.
struct KeyedVector {
  EmbeddingKey key;
  EmbeddingVector vector;
  ClockValue clock = 0;

  friend bool operator==(const KeyedVector&, const KeyedVector&) = default;
};

// A write-back: the pending delta of one cached key and its current clock.
struct EvictRecord {
  EmbeddingKey key;
  UpdateDelta delta;
  ClockValue clock = 0;
  // False when the entry had no local updates since it was last synchronized.
  // Local bookkeeping only; never serialized.
  bool dirty = true;

  friend bool operator==(const EvictRecord& a, const EvictRecord& b) {
    return a.key == b.key && a.delta == b.delta && a.clock == b.clock;
  }
};

struct KeyClock {
  EmbeddingKey key;
  ClockValue clock = 0;

  friend bool operator==(const KeyClock&, const KeyClock&) = default;
};

// acc += delta element-wise. Throws DimensionError on length mismatch.
void accumulate_into(std::span<float> acc, std::span<const float> delta);

// Returns acc + delta element-wise.
UpdateDelta accumulate(std::span<const float> acc, std::span<const float> delta);

// -eta * gradient, the client-side pre-scaling shared by every write path.
UpdateDelta scale_gradient(std::span<const float> gradient, float eta);

// Deterministic initial row for `key`: uniform in [-0.01, 0.01], drawn from a
// counter-based generator keyed on (seed, key.id).
EmbeddingVector init_embedding(EmbeddingKey key, std::size_t dim, std::uint64_t seed);

// Element-wise mean, summed in the order the parts are given.
std::vector<float> elementwise_mean(std::span<const std::vector<float>> parts);

bool all_finite(std::span<const float> values);
bool all_zero(std::span<const float> values);

}  // namespace embcache

template <>
struct std::hash<embcache::EmbeddingKey> : embcache::EmbeddingKeyHash {};

#endif  // EMBCACHE_CORE_H_
