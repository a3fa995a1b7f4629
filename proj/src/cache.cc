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

#include "embcache/cache.h"

#include <algorithm>
#include <string>

#include "embcache/errors.h"

namespace embcache {

std::string_view policy_name(CachePolicy policy) {
  switch (policy) {
    case CachePolicy::kLru: return "lru";
    case CachePolicy::kLfu: return "lfu";
    case CachePolicy::kLightLfu: return "light_lfu";
  }
  return "unknown";
}

CachePolicy parse_policy(std::string_view name) {
  if (name == "lru") return CachePolicy::kLru;
  if (name == "lfu") return CachePolicy::kLfu;
  if (name == "light_lfu") return CachePolicy::kLightLfu;
  throw ConfigError("unknown cache policy '" + std::string(name) + "'");
}

CacheTable::CacheTable(std::size_t dim, CacheOptions options) : dim_(dim), options_(options) {
  if (dim == 0) throw DimensionError("cache dimension must be at least 1");
  if (options_.capacity == 0) throw ConfigError("cache capacity must be at least 1");
  if (options_.max_promoted_fraction < 0.0 || options_.max_promoted_fraction > 1.0) {
    throw ConfigError("max_promoted_fraction must lie in [0, 1]");
  }
}

bool CacheTable::find(EmbeddingKey key) const { return entries_.contains(key); }

const CacheEntry* CacheTable::try_entry(EmbeddingKey key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

const CacheEntry& CacheTable::entry(EmbeddingKey key) const {
  if (const auto* e = try_entry(key)) return *e;
  throw LookupError("key " + std::to_string(key.id) + " is not cached");
}

CacheEntry& CacheTable::at(EmbeddingKey key) { return const_cast<CacheEntry&>(entry(key)); }

bool CacheTable::check_valid(EmbeddingKey key, StalenessBound s, ClockValue global_clock) const {
  const auto& e = entry(key);
  if (s.is_infinite()) return true;
  return e.current_clock <= s.add_to(e.start_clock) && global_clock <= s.add_to(e.current_clock);
}

CacheTable::Rank CacheTable::rank_of(EmbeddingKey key, const CacheEntry& e) const {
  const auto rank = options_.policy == CachePolicy::kLru ? e.meta.last_touch : e.meta.freq;
  return {rank, key.id};
}

void CacheTable::index_insert(EmbeddingKey key, const CacheEntry& e) {
  if (!e.meta.promoted) victims_.insert(rank_of(key, e));
}

void CacheTable::index_erase(EmbeddingKey key, const CacheEntry& e) {
  if (!e.meta.promoted) victims_.erase(rank_of(key, e));
}

std::size_t CacheTable::max_promoted() const {
  return static_cast<std::size_t>(options_.max_promoted_fraction * static_cast<double>(options_.capacity));
}

std::vector<EvictRecord> CacheTable::fetch_install(EmbeddingKey key, EmbeddingVector vector,
                                                   ClockValue global_clock) {
  if (vector.size() != dim_) {
    throw DimensionError("installing vector of length " + std::to_string(vector.size()) + " into dim " +
                         std::to_string(dim_) + " cache");
  }
  std::uint64_t freq = 1;
  if (auto it = entries_.find(key); it != entries_.end()) {
    index_erase(key, it->second);
    if (it->second.meta.promoted) --promoted_;
    entries_.erase(it);
  } else if (options_.persistent_frequency) {
    if (auto h = frequency_history_.find(key); h != frequency_history_.end()) freq += h->second;
  }
  CacheEntry e;
  e.vector = std::move(vector);
  e.start_clock = global_clock;
  e.current_clock = global_clock;
  e.pending.assign(dim_, 0.0F);
  e.meta = PolicyMeta{freq, ++tick_, false};
  index_insert(key, e);
  entries_.emplace(key, std::move(e));
  return evict_overflow();
}

void CacheTable::refresh(EmbeddingKey key, EmbeddingVector vector, ClockValue global_clock) {
  if (vector.size() != dim_) {
    throw DimensionError("refreshing with vector of length " + std::to_string(vector.size()) + " in dim " +
                         std::to_string(dim_) + " cache");
  }
  auto& e = at(key);
  e.vector = std::move(vector);
  e.start_clock = global_clock;
  e.current_clock = global_clock;
  std::fill(e.pending.begin(), e.pending.end(), 0.0F);
  if (!e.meta.promoted) {
    index_erase(key, e);
    e.meta.last_touch = ++tick_;
    index_insert(key, e);
  }
}

void CacheTable::update(EmbeddingKey key, std::span<const float> delta) {
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    throw ProtocolError("update of key " + std::to_string(key.id) + " that was not read");
  }
  auto& e = it->second;
  accumulate_into(e.vector, delta);
  accumulate_into(e.pending, delta);
  if (!e.meta.promoted) {
    index_erase(key, e);
    e.meta.last_touch = ++tick_;
    index_insert(key, e);
  }
}

void CacheTable::clock(EmbeddingKey key) { ++at(key).current_clock; }

const EmbeddingVector& CacheTable::get(EmbeddingKey key) {
  auto& e = at(key);
  if (e.meta.promoted) return e.vector;
  index_erase(key, e);
  ++e.meta.freq;
  e.meta.last_touch = ++tick_;
  if (options_.policy == CachePolicy::kLightLfu && e.meta.freq >= options_.promotion_threshold &&
      promoted_ < max_promoted()) {
    e.meta.promoted = true;
    ++promoted_;
  }
  index_insert(key, e);
  return e.vector;
}

EvictRecord CacheTable::remove(EmbeddingKey key) {
  auto node = entries_.extract(key);
  auto& e = node.mapped();
  index_erase(key, e);
  if (e.meta.promoted) --promoted_;
  if (options_.persistent_frequency) frequency_history_[key] = e.meta.freq;
  pinned_.erase(key);
  EvictRecord record{key, std::move(e.pending), e.current_clock, e.dirty()};
  return record;
}

EvictRecord CacheTable::evict(EmbeddingKey key) {
  if (!find(key)) throw LookupError("evict of key " + std::to_string(key.id) + " that is not cached");
  return remove(key);
}

std::optional<EmbeddingKey> CacheTable::pick_victim() const {
  for (const auto& [rank, id] : victims_) {
    if (!pinned_.contains(EmbeddingKey{id})) return EmbeddingKey{id};
  }
  // Only promoted or pinned entries left: fall back to the smallest promoted key.
  std::optional<EmbeddingKey> best;
  for (const auto& [key, e] : entries_) {
    if (e.meta.promoted && !pinned_.contains(key) && (!best || key < *best)) best = key;
  }
  return best;
}

std::vector<EvictRecord> CacheTable::evict_overflow() {
  std::vector<EvictRecord> out;
  while (entries_.size() > options_.capacity) {
    const auto victim = pick_victim();
    if (!victim) {
      throw ProtocolError("cache capacity " + std::to_string(options_.capacity) +
                          " cannot hold the pinned working set of " + std::to_string(pinned_.size()) + " keys");
    }
    out.push_back(remove(*victim));
  }
  return out;
}

void CacheTable::pin(EmbeddingKey key) { pinned_.insert(key); }

void CacheTable::unpin_all() { pinned_.clear(); }

std::vector<EmbeddingKey> CacheTable::keys() const {
  std::vector<EmbeddingKey> out;
  out.reserve(entries_.size());
  for (const auto& [key, e] : entries_) out.push_back(key);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace embcache
