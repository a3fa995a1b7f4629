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

#ifndef EMBCACHE_CACHE_H_
#define EMBCACHE_CACHE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "embcache/core.h"

namespace embcache {

enum class CachePolicy { kLru, kLfu, kLightLfu };

std::string_view policy_name(CachePolicy policy);
// Accepts "lru", "lfu", "light_lfu".
CachePolicy parse_policy(std::string_view name);

struct PolicyMeta {
  std::uint64_t freq = 0;        // LFU count: install plus every get
  std::uint64_t last_touch = 0;  // LRU tick
  bool promoted = false;         // LightLFU: pinned, no further bookkeeping
};

struct CacheEntry {
  EmbeddingVector vector;  // fetched value plus every local update
  ClockValue start_clock = 0;
  ClockValue current_clock = 0;
  UpdateDelta pending;  // local updates not yet written back
  PolicyMeta meta;

  bool dirty() const { return current_clock != start_clock; }
};

struct CacheOptions {
  std::size_t capacity = 1;
  CachePolicy policy = CachePolicy::kLfu;
  // LightLFU: entries reaching this many accesses get promoted.
  std::uint64_t promotion_threshold = 64;
  // LightLFU: promoted entries may occupy at most this share of capacity.
  double max_promoted_fraction = 0.5;
  // Carry an evicted key's frequency over to its next install.
  bool persistent_frequency = false;
};

// A worker-local write-back cache of embedding rows with start/current clock
// bookkeeping. Single owner; not thread-safe.
//
// Keys may be pinned for the duration of a read/write cycle: pinned entries
// are never chosen as overflow victims. After every public operation the
// table holds at most capacity() entries.
class CacheTable {
 public:
  CacheTable(std::size_t dim, CacheOptions options);

  // Membership only; policy metadata is untouched.
  bool find(EmbeddingKey key) const;

  // (c_c <= c_s + s) && (c_g <= c_c + s). Always true for infinite s.
  bool check_valid(EmbeddingKey key, StalenessBound s, ClockValue global_clock) const;

  // Installs (or overwrites) the entry with c_s = c_c = c_g and no pending
  // delta, then evicts overflow.
  std::vector<EvictRecord> fetch_install(EmbeddingKey key, EmbeddingVector vector, ClockValue global_clock);

  // Resynchronizes a resident entry in place: new vector, c_s = c_c = c_g,
  // no pending delta. Policy metadata is kept apart from a fresh touch.
  void refresh(EmbeddingKey key, EmbeddingVector vector, ClockValue global_clock);

  // vector += delta; pending += delta.
  void update(EmbeddingKey key, std::span<const float> delta);

  // c_c += 1.
  void clock(EmbeddingKey key);

  EvictRecord evict(EmbeddingKey key);
  std::vector<EvictRecord> evict_overflow();

  // The local vector; counts as an access for the replacement policy.
  const EmbeddingVector& get(EmbeddingKey key);

  // Inspection, no metadata change.
  const CacheEntry& entry(EmbeddingKey key) const;
  const CacheEntry* try_entry(EmbeddingKey key) const;

  void pin(EmbeddingKey key);
  void unpin_all();

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return options_.capacity; }
  std::size_t dim() const { return dim_; }
  std::size_t promoted_count() const { return promoted_; }
  const CacheOptions& options() const { return options_; }
  // Resident keys, ascending.
  std::vector<EmbeddingKey> keys() const;

 private:
  // (policy rank, key id); the smallest element is the next victim.
  using Rank = std::pair<std::uint64_t, std::uint64_t>;

  CacheEntry& at(EmbeddingKey key);
  Rank rank_of(EmbeddingKey key, const CacheEntry& entry) const;
  void index_insert(EmbeddingKey key, const CacheEntry& entry);
  void index_erase(EmbeddingKey key, const CacheEntry& entry);
  EvictRecord remove(EmbeddingKey key);
  std::optional<EmbeddingKey> pick_victim() const;
  std::size_t max_promoted() const;

  std::size_t dim_;
  CacheOptions options_;
  std::unordered_map<EmbeddingKey, CacheEntry> entries_;
  std::set<Rank> victims_;  // every resident, non-promoted entry
  std::unordered_set<EmbeddingKey> pinned_;
  std::unordered_map<EmbeddingKey, std::uint64_t> frequency_history_;
  std::uint64_t tick_ = 0;
  std::size_t promoted_ = 0;
};

}  // namespace embcache

#endif  // EMBCACHE_CACHE_H_
