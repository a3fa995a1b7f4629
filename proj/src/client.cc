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

#include "embcache/client.h"

#include <algorithm>
#include <map>
#include <string>

#include "embcache/errors.h"

namespace embcache {

DedupResult dedup_keys(std::span<const EmbeddingKey> keys) {
  std::vector<EmbeddingKey> sorted(keys.begin(), keys.end());
  std::sort(sorted.begin(), sorted.end());
  DedupResult out;
  for (const auto key : sorted) {
    if (!out.keys.empty() && out.keys.back() == key) {
      ++out.multiplicity.back();
    } else {
      out.keys.push_back(key);
      out.multiplicity.push_back(1);
    }
  }
  return out;
}

std::vector<KeyGradient> aggregate_gradients(std::span<const KeyGradient> gradients) {
  std::map<EmbeddingKey, std::vector<float>> sums;
  for (const auto& g : gradients) {
    auto [it, inserted] = sums.try_emplace(g.key, g.gradient);
    if (!inserted) accumulate_into(it->second, g.gradient);
  }
  std::vector<KeyGradient> out;
  out.reserve(sums.size());
  for (auto& [key, sum] : sums) out.push_back({key, std::move(sum)});
  return out;
}

ClientStats& ClientStats::operator+=(const ClientStats& o) {
  reads += o.reads;
  writes += o.writes;
  cache_hits += o.cache_hits;
  cache_misses += o.cache_misses;
  invalid_hits += o.invalid_hits;
  embedding_bytes_sent += o.embedding_bytes_sent;
  embedding_bytes_received += o.embedding_bytes_received;
  clock_bytes += o.clock_bytes;
  dense_bytes += o.dense_bytes;
  bytes_sent += o.bytes_sent;
  bytes_received += o.bytes_received;
  round_trips += o.round_trips;
  return *this;
}

namespace {

ClientStats with_traffic(ClientStats stats, const Endpoint& endpoint) {
  const auto& b = endpoint.bytes();
  stats.embedding_bytes_sent = b.sent.embedding;
  stats.embedding_bytes_received = b.received.embedding;
  stats.clock_bytes = b.sent.clock + b.received.clock;
  stats.dense_bytes = b.sent.dense + b.received.dense;
  stats.bytes_sent = b.sent.total();
  stats.bytes_received = b.received.total();
  stats.round_trips = endpoint.round_trips();
  return stats;
}

void check_response_keys(const std::vector<KeyedVector>& entries, std::size_t expected) {
  if (entries.size() != expected) {
    throw ProtocolError("server returned " + std::to_string(entries.size()) + " rows for " +
                        std::to_string(expected) + " keys");
  }
}

}  // namespace

CachedClient::CachedClient(Endpoint& endpoint, CacheTable cache, ClientOptions options, ClientObserver* observer)
    : endpoint_(endpoint), cache_(std::move(cache)), options_(options), observer_(observer) {}

CachedClient::~CachedClient() {
  if (async_prefetch_.valid()) {
    try {
      async_prefetch_.get();
    } catch (const Error&) {
      // Nobody is left to report a prefetch failure to.
    }
  }
}

ClientStats CachedClient::stats() const { return with_traffic(counters_, endpoint_); }

void CachedClient::notify_read(EmbeddingKey key, ClockValue observed) {
  if (!observer_) return;
  const auto& e = cache_.entry(key);
  observer_->on_read(options_.worker_id, key, ReplicaClocks{e.start_clock, e.current_clock, observed});
}

std::vector<KeyedVector> CachedClient::synchronize(std::vector<EvictRecord> records) {
  if (records.empty()) return {};
  const std::size_t n = records.size();
  std::vector<KeyedVector> entries;
  if (options_.fused_sync) {
    auto resp = expect<SyncResp>(endpoint_.request(SyncReq{records}));
    entries = std::move(resp.entries);
  } else {
    std::vector<EmbeddingKey> keys;
    keys.reserve(n);
    for (const auto& r : records) keys.push_back(r.key);
    expect<EvictAck>(endpoint_.request(EvictReq{records}));
    entries = expect<FetchResp>(endpoint_.request(FetchReq{std::move(keys)})).entries;
  }
  check_response_keys(entries, n);
  if (observer_) {
    for (const auto& r : records) observer_->on_evict(options_.worker_id, r);
  }
  return entries;
}

void CachedClient::install_synced(const std::vector<KeyedVector>& entries) {
  for (const auto& e : entries) {
    if (options_.fused_sync) {
      cache_.refresh(e.key, e.vector, e.clock);
    } else {
      // Evict + Fetch: the entry is re-installed with fresh metadata.
      cache_.fetch_install(e.key, e.vector, e.clock);
    }
    if (observer_) observer_->on_fetch(options_.worker_id, e.key, e.clock);
  }
}

void CachedClient::ensure_resident(std::span<const EmbeddingKey> keys,
                                   const std::unordered_set<EmbeddingKey>& prevalidated) {
  const auto s = options_.staleness;
  std::vector<EmbeddingKey> misses;
  std::vector<EmbeddingKey> to_check;
  std::vector<std::pair<EmbeddingKey, ClockValue>> valid;
  for (const auto key : keys) {
    if (prevalidated.contains(key) && cache_.find(key)) continue;
    if (!cache_.find(key)) {
      misses.push_back(key);
    } else if (s.is_infinite()) {
      valid.emplace_back(key, cache_.entry(key).start_clock);
    } else {
      to_check.push_back(key);
    }
  }

  // Round 1: clock check of every hit.
  std::vector<EvictRecord> invalid;
  if (!to_check.empty()) {
    ClockCheckReq req;
    req.pairs.reserve(to_check.size());
    for (const auto key : to_check) req.pairs.push_back({key, cache_.entry(key).current_clock});
    auto resp = expect<ClockCheckResp>(endpoint_.request(req));
    if (resp.pairs.size() != to_check.size()) {
      throw ProtocolError("clock check answered " + std::to_string(resp.pairs.size()) + " of " +
                          std::to_string(to_check.size()) + " keys");
    }
    for (std::size_t i = 0; i < to_check.size(); ++i) {
      const auto key = to_check[i];
      const auto global = resp.pairs[i].clock;
      if (resp.pairs[i].key != key) throw ProtocolError("clock check answered out of order");
      const auto& e = cache_.entry(key);
      if (observer_) observer_->on_clock_check(options_.worker_id, key, e.current_clock, global);
      if (cache_.check_valid(key, s, global)) {
        valid.emplace_back(key, global);
      } else {
        invalid.push_back(EvictRecord{key, e.pending, e.current_clock, e.dirty()});
      }
    }
  }

  // Round 2: misses. Round 3: invalid hits. The sync goes last because it is
  // the only round that changes server state.
  std::vector<KeyedVector> fetched;
  if (!misses.empty()) {
    fetched = expect<FetchResp>(endpoint_.request(FetchReq{misses})).entries;
    check_response_keys(fetched, misses.size());
  }
  const auto invalid_count = invalid.size();
  const auto synced = synchronize(std::move(invalid));

  // Apply. Requested keys are pinned, so installs only displace other keys.
  install_synced(synced);
  for (const auto& e : fetched) {
    auto overflow = cache_.fetch_install(e.key, e.vector, e.clock);
    if (observer_) observer_->on_fetch(options_.worker_id, e.key, e.clock);
    for (auto& r : overflow) deferred_evictions_.push_back(std::move(r));
  }

  counters_.cache_misses += misses.size();
  counters_.cache_hits += valid.size() + invalid_count;
  counters_.invalid_hits += invalid_count;
  for (const auto& [key, observed] : valid) notify_read(key, observed);
  for (const auto& e : synced) notify_read(e.key, e.clock);
  for (const auto& e : fetched) notify_read(e.key, e.clock);
}

void CachedClient::run_prefetch(const std::vector<EmbeddingKey>& keys) {
  cache_.unpin_all();
  for (const auto key : keys) cache_.pin(key);
  ensure_resident(keys, {});
  if (!deferred_evictions_.empty()) {
    send_evictions(std::move(deferred_evictions_), false);
    deferred_evictions_.clear();
  }
  prefetched_.insert(keys.begin(), keys.end());
}

void CachedClient::complete_prefetch() {
  if (async_prefetch_.valid()) {
    async_prefetch_.get();
  }
  if (pending_prefetch_) {
    auto keys = std::move(*pending_prefetch_);
    pending_prefetch_.reset();
    run_prefetch(keys);
  }
}

void CachedClient::prefetch(std::span<const EmbeddingKey> keys) {
  complete_prefetch();
  auto unique = dedup_keys(keys).keys;
  if (options_.prefetch_mode == PrefetchMode::kDeferred) {
    pending_prefetch_ = std::move(unique);
    return;
  }
  async_prefetch_ = std::async(std::launch::async, [this, unique = std::move(unique)] { run_prefetch(unique); });
}

EmbeddingLookup CachedClient::read(std::span<const EmbeddingKey> keys) {
  complete_prefetch();
  if (!deferred_evictions_.empty()) {
    // A read without an intervening write: push displaced rows first so a
    // refetch of one of them sees its own updates.
    send_evictions(std::move(deferred_evictions_), false);
    deferred_evictions_.clear();
  }
  const auto unique = dedup_keys(keys).keys;
  cache_.unpin_all();
  for (const auto key : unique) cache_.pin(key);

  auto prevalidated = std::move(prefetched_);
  prefetched_.clear();
  ensure_resident(unique, prevalidated);

  EmbeddingLookup out;
  out.reserve(unique.size());
  for (const auto key : unique) out.emplace(key, cache_.get(key));
  ++counters_.reads;
  return out;
}

void CachedClient::write(std::span<const KeyGradient> gradients, float eta) {
  complete_prefetch();
  const auto summed = aggregate_gradients(gradients);
  for (const auto& g : summed) {
    if (!cache_.find(g.key)) {
      throw ProtocolError("write of key " + std::to_string(g.key.id) + " that the preceding read did not return");
    }
    if (g.gradient.size() != cache_.dim()) {
      throw DimensionError("gradient for key " + std::to_string(g.key.id) + " has " +
                           std::to_string(g.gradient.size()) + " elements");
    }
  }

  const auto s = options_.staleness;
  std::vector<EvictRecord> over_bound;
  for (const auto& g : summed) {
    const auto delta = scale_gradient(g.gradient, eta);
    cache_.update(g.key, delta);
    cache_.clock(g.key);
    const auto& e = cache_.entry(g.key);
    if (observer_) {
      observer_->on_write(options_.worker_id, g.key, ReplicaClocks{e.start_clock, e.current_clock, e.start_clock},
                          delta);
    }
    if (options_.bound_writeback && e.current_clock > s.add_to(e.start_clock)) {
      over_bound.push_back(EvictRecord{g.key, e.pending, e.current_clock, true});
    }
  }
  install_synced(synchronize(std::move(over_bound)));

  cache_.unpin_all();
  auto records = std::move(deferred_evictions_);
  deferred_evictions_.clear();
  for (auto& r : cache_.evict_overflow()) records.push_back(std::move(r));
  send_evictions(std::move(records), false);
  ++counters_.writes;
}

void CachedClient::send_evictions(std::vector<EvictRecord> records, bool flush) {
  std::erase_if(records, [](const EvictRecord& r) { return !r.dirty; });
  if (records.empty()) return;
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  if (flush) {
    expect<FlushAck>(endpoint_.request(FlushReq{records}));
  } else {
    expect<EvictAck>(endpoint_.request(EvictReq{records}));
  }
  if (observer_) {
    for (const auto& r : records) observer_->on_evict(options_.worker_id, r);
  }
}

void CachedClient::flush() {
  complete_prefetch();
  prefetched_.clear();
  cache_.unpin_all();
  auto records = std::move(deferred_evictions_);
  deferred_evictions_.clear();
  for (const auto key : cache_.keys()) records.push_back(cache_.evict(key));
  send_evictions(std::move(records), true);
}

DirectClient::DirectClient(Endpoint& endpoint, std::uint32_t worker_id, ClientObserver* observer)
    : endpoint_(endpoint), worker_id_(worker_id), observer_(observer) {}

ClientStats DirectClient::stats() const { return with_traffic(counters_, endpoint_); }

EmbeddingLookup DirectClient::read(std::span<const EmbeddingKey> keys) {
  auto unique = dedup_keys(keys).keys;
  EmbeddingLookup out;
  if (!unique.empty()) {
    const auto n = unique.size();
    auto entries = expect<FetchResp>(endpoint_.request(FetchReq{std::move(unique)})).entries;
    check_response_keys(entries, n);
    out.reserve(n);
    for (auto& e : entries) {
      read_clocks_[e.key] = e.clock;
      if (observer_) observer_->on_fetch(worker_id_, e.key, e.clock);
      out.emplace(e.key, std::move(e.vector));
    }
    counters_.cache_misses += n;
  }
  ++counters_.reads;
  return out;
}

void DirectClient::write(std::span<const KeyGradient> gradients, float eta) {
  const auto summed = aggregate_gradients(gradients);
  EvictReq req;
  req.records.reserve(summed.size());
  for (const auto& g : summed) {
    const auto it = read_clocks_.find(g.key);
    if (it == read_clocks_.end()) {
      throw ProtocolError("write of key " + std::to_string(g.key.id) + " that was never read");
    }
    req.records.push_back(EvictRecord{g.key, scale_gradient(g.gradient, eta), it->second + 1, true});
  }
  if (!req.records.empty()) {
    expect<EvictAck>(endpoint_.request(req));
  }
  for (const auto& r : req.records) {
    read_clocks_[r.key] = r.clock;
    if (observer_) {
      observer_->on_write(worker_id_, r.key, ReplicaClocks{r.clock - 1, r.clock, r.clock - 1}, r.delta);
      observer_->on_evict(worker_id_, r);
    }
  }
  ++counters_.writes;
}

}  // namespace embcache
