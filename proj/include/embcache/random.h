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

#ifndef EMBCACHE_RANDOM_H_
#define EMBCACHE_RANDOM_H_

#include <cstdint>

namespace embcache {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(a ^ mix64(b + 0x632BE59BD9B4E019ULL));
}

// Maps the top 53 bits of a word to [0, 1).
constexpr double unit_double(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Counter-based stream: the i-th output depends only on (seed, stream, i),
// so any position can be regenerated without replaying the prefix.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(hash_combine(seed, stream)) {}

  constexpr std::uint64_t next_u64() noexcept { return mix64(key_ + 0xD1B54A32D192ED03ULL * ++counter_); }
  constexpr double next_double() noexcept { return unit_double(next_u64()); }

  // Uniform integer in [0, bound). Bound must be non-zero.
  std::uint64_t next_below(std::uint64_t bound) noexcept {
    // Lemire's multiply-shift with rejection.
    while (true) {
      const unsigned __int128 product = static_cast<unsigned __int128>(next_u64()) * bound;
      const auto low = static_cast<std::uint64_t>(product);
      if (low >= bound || low >= (-bound) % bound) {
        return static_cast<std::uint64_t>(product >> 64);
      }
    }
  }

  constexpr std::uint64_t position() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace embcache

#endif  // EMBCACHE_RANDOM_H_
