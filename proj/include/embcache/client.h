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

#ifndef EMBCACHE_CLIENT_H_
#define EMBCACHE_CLIENT_H_

#include <cstdint>
#include <future>
#include <optional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "embcache/cache.h"
#include "embcache/core.h"
#include "embcache/transport.h"

namespace embcache {

using EmbeddingLookup = std::unordered_map<EmbeddingKey, EmbeddingVector>;

struct DedupResult {
  std::vector<EmbeddingKey> keys;            // unique, ascending
  std::vector<std::uint32_t> multiplicity;  // parallel to keys
};

DedupResult dedup_keys(std::span<const EmbeddingKey> keys);

// Gradient of one key occurrence (or of an already aggregated key).
struct KeyGradient {
  EmbeddingKey key;
  std::vector<float> gradient;
};

struct ClientStats {
  std::uint64_t reads = 0;   // read() calls
  std::uint64_t writes = 0;  // write() calls
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
  std::uint64_t invalid_hits = 0;  // hits that needed a sync
  std::uint64_t embedding_bytes_sent = 0;
  std::uint64_t embedding_bytes_received = 0;
  std::uint64_t clock_bytes = 0;  // both directions
  std::uint64_t dense_bytes = 0;  // both directions
  std::uint64_t bytes_sent = 0;   // every category
  std::uint64_t bytes_received = 0;
  std::uint64_t round_trips = 0;

  ClientStats& operator+=(const ClientStats& other);
  friend bool operator==(const ClientStats&, const ClientStats&) = default;
};

struct ReplicaClocks {
  ClockValue start = 0;
  ClockValue current = 0;
  // c_g the validity decision was based on. For infinite staleness no check
  // happens and this is the start clock.
  ClockValue observed_global = 0;
};

// Hooks for recording protocol events. Default implementations ignore them.
class ClientObserver {
 public:
  virtual ~ClientObserver() = default;
  // A key became readable: it is resident and passed (or skipped) validation.
  virtual void on_read(std::uint32_t /*worker*/, EmbeddingKey /*key*/, const ReplicaClocks& /*clocks*/) {}
  // A local update was applied; clocks are after the tick.
  virtual void on_write(std::uint32_t /*worker*/, EmbeddingKey /*key*/, const ReplicaClocks& /*clocks*/,
                        std::span<const float> /*delta*/) {}
  virtual void on_fetch(std::uint32_t /*worker*/, EmbeddingKey /*key*/, ClockValue /*global*/) {}
  // A record was sent to the server (evict, sync, or flush).
  virtual void on_evict(std::uint32_t /*worker*/, const EvictRecord& /*record*/) {}
  virtual void on_clock_check(std::uint32_t /*worker*/, EmbeddingKey /*key*/, ClockValue /*current*/,
                              ClockValue /*global*/) {}
};

// Worker-side embedding access.
class EmbeddingClient {
 public:
  virtual ~EmbeddingClient() = default;

  // Returns the vector of every distinct requested key.
  virtual EmbeddingLookup read(std::span<const EmbeddingKey> keys) = 0;

  // Applies -eta * (sum of gradients per key). Every key must have been
  // returned by the preceding read.
  virtual void write(std::span<const KeyGradient> gradients, float eta) = 0;

  // Writes back everything still held locally.
  virtual void flush() = 0;

  // Announces the next read's keys so their network rounds can overlap.
  virtual void prefetch(std::span<const EmbeddingKey> keys) = 0;

  virtual ClientStats stats() const = 0;
  virtual std::uint32_t worker_id() const = 0;
};

enum class PrefetchMode {
  // Rounds run when the next read starts; results identical to no prefetch.
  kDeferred,
  // Rounds run on a background thread right away; the next read waits.
  kAsync,
};

struct ClientOptions {
  std::uint32_t worker_id = 0;
  StalenessBound staleness{0};
  // Synchronize invalid hits with one SyncReq instead of EvictReq + FetchReq.
  bool fused_sync = true;
  // After a write, immediately synchronize entries whose current clock has
  // run past start + s; they would fail validation at their next read anyway.
  bool bound_writeback = true;
  PrefetchMode prefetch_mode = PrefetchMode::kDeferred;
};

// Read/write protocol over a local write-back cache.
class CachedClient final : public EmbeddingClient {
 public:
  CachedClient(Endpoint& endpoint, CacheTable cache, ClientOptions options, ClientObserver* observer = nullptr);
  ~CachedClient() override;

  EmbeddingLookup read(std::span<const EmbeddingKey> keys) override;
  void write(std::span<const KeyGradient> gradients, float eta) override;
  void flush() override;
  void prefetch(std::span<const EmbeddingKey> keys) override;
  ClientStats stats() const override;
  std::uint32_t worker_id() const override { return options_.worker_id; }
  // Blocks until an issued prefetch, including its write-backs, is done.
  void await_prefetch() { complete_prefetch(); }

  const CacheTable& cache() const { return cache_; }
  // Test hook: direct access to the local cache.
  CacheTable& mutable_cache() { return cache_; }
  const ClientOptions& options() const { return options_; }

 private:
  // Makes every key resident and valid. Network rounds happen before any
  // cache mutation so a failed round leaves the cache untouched.
  void ensure_resident(std::span<const EmbeddingKey> keys, const std::unordered_set<EmbeddingKey>& prevalidated);
  std::vector<KeyedVector> synchronize(std::vector<EvictRecord> records);
  void install_synced(const std::vector<KeyedVector>& entries);
  void send_evictions(std::vector<EvictRecord> records, bool flush);
  void run_prefetch(const std::vector<EmbeddingKey>& keys);
  void complete_prefetch();
  void notify_read(EmbeddingKey key, ClockValue observed);

  Endpoint& endpoint_;
  CacheTable cache_;
  ClientOptions options_;
  ClientObserver* observer_;
  ClientStats counters_;
  // Overflow victims produced while installing during a read; written back
  // together with the next write's evictions.
  std::vector<EvictRecord> deferred_evictions_;
  std::optional<std::vector<EmbeddingKey>> pending_prefetch_;
  std::future<void> async_prefetch_;
  std::unordered_set<EmbeddingKey> prefetched_;
};

// Baseline without a cache: every read fetches, every write pushes.
class DirectClient final : public EmbeddingClient {
 public:
  DirectClient(Endpoint& endpoint, std::uint32_t worker_id, ClientObserver* observer = nullptr);

  EmbeddingLookup read(std::span<const EmbeddingKey> keys) override;
  void write(std::span<const KeyGradient> gradients, float eta) override;
  void flush() override {}
  void prefetch(std::span<const EmbeddingKey> /*keys*/) override {}
  ClientStats stats() const override;
  std::uint32_t worker_id() const override { return worker_id_; }

 private:
  Endpoint& endpoint_;
  std::uint32_t worker_id_;
  ClientObserver* observer_;
  ClientStats counters_;
  std::unordered_map<EmbeddingKey, ClockValue> read_clocks_;
};

// Per-key sums of gradients in arrival order, keyed ascending.
std::vector<KeyGradient> aggregate_gradients(std::span<const KeyGradient> gradients);

}  // namespace embcache

#endif  // EMBCACHE_CLIENT_H_
