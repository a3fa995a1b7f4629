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

#ifndef EMBCACHE_SERVER_H_
#define EMBCACHE_SERVER_H_

#include <array>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "embcache/core.h"
#include "embcache/transport.h"

namespace embcache {

// Authoritative row of the global table.
struct GlobalEntry {
  EmbeddingVector vector;
  ClockValue clock = 0;  // c_g: number of updates folded in, Lamport-merged
};

// The global embedding table. Rows are created lazily from init_embedding on
// first access and never removed. Every per-key read-modify-write is
// serialized; distinct keys may proceed in parallel.
class GlobalTable {
 public:
  GlobalTable(std::size_t dim, std::uint64_t init_seed);

  GlobalTable(const GlobalTable&) = delete;
  GlobalTable& operator=(const GlobalTable&) = delete;

  // Current (vector, c_g) per key, creating missing rows with c_g = 0.
  std::vector<KeyedVector> fetch(std::span<const EmbeddingKey> keys);

  // vector += delta; c_g = max(c_g, c_c). One record per key.
  void apply(std::span<const EvictRecord> records);

  // apply() followed by fetch() of the same keys, atomically per key.
  std::vector<KeyedVector> sync(std::span<const EvictRecord> records);

  // c_g per queried key, in query order. Throws ProtocolError for keys that
  // were never fetched.
  std::vector<KeyClock> clocks(std::span<const KeyClock> queries) const;

  // Inspection without side effects (no lazy creation).
  std::optional<ClockValue> clock_of(EmbeddingKey key) const;
  std::optional<EmbeddingVector> vector_of(EmbeddingKey key) const;
  // The stored row, or init_embedding for keys never touched.
  EmbeddingVector vector_or_init(EmbeddingKey key) const;
  // All rows sorted by key.
  std::vector<KeyedVector> snapshot() const;

  std::size_t size() const;
  std::size_t dim() const { return dim_; }
  std::uint64_t init_seed() const { return init_seed_; }

 private:
  static constexpr std::size_t kShards = 64;

  struct Shard {
    mutable std::mutex mu;
    std::unordered_map<EmbeddingKey, GlobalEntry> rows;
  };

  Shard& shard_for(EmbeddingKey key) { return shards_[EmbeddingKeyHash{}(key) % kShards]; }
  const Shard& shard_for(EmbeddingKey key) const { return shards_[EmbeddingKeyHash{}(key) % kShards]; }

  GlobalEntry& row_locked(Shard& shard, EmbeddingKey key);
  void apply_locked(GlobalEntry& row, const EvictRecord& record) const;
  void check_dim(std::size_t n) const;

  std::size_t dim_;
  std::uint64_t init_seed_;
  std::array<Shard, kShards> shards_;
};

// Rendezvous that averages one vector per worker per round. The mean is
// accumulated in worker-id order, so every backend gets bit-identical results.
class DenseReducer {
 public:
  explicit DenseReducer(std::size_t workers);

  std::uint64_t submit(std::uint32_t worker_id, std::vector<float> values);
  std::optional<std::vector<float>> poll(std::uint64_t round, std::uint32_t worker_id);
  std::vector<float> await(std::uint64_t round, std::uint32_t worker_id, std::chrono::milliseconds timeout);

  std::size_t workers() const { return workers_; }

 private:
  struct Round {
    std::vector<std::optional<std::vector<float>>> parts;
    std::size_t received = 0;
    std::optional<std::vector<float>> result;
    std::vector<bool> collected;
    std::size_t collected_count = 0;
  };

  std::optional<std::vector<float>> take_locked(std::uint64_t round, std::uint32_t worker_id);

  std::size_t workers_;
  std::mutex mu_;
  std::condition_variable done_;
  std::map<std::uint64_t, Round> rounds_;
  // Next round each worker will contribute to.
  std::vector<std::uint64_t> next_round_;
};

// The coordinator: global table plus dense rendezvous behind the message
// vocabulary.
class ParameterServer final : public Service {
 public:
  ParameterServer(std::size_t dim, std::uint64_t init_seed, std::size_t workers);

  Message handle(const Message& request) override;
  std::uint64_t submit_dense(std::uint32_t worker_id, std::vector<float> values) override;
  std::optional<std::vector<float>> poll_dense(std::uint64_t round, std::uint32_t worker_id) override;
  std::vector<float> await_dense(std::uint64_t round, std::uint32_t worker_id,
                                 std::chrono::milliseconds timeout) override;

  // Individual handlers, also used directly by tests.
  FetchResp handle_fetch(const FetchReq& req);
  EvictAck handle_evict(const EvictReq& req);
  ClockCheckResp handle_clock_check(const ClockCheckReq& req) const;
  SyncResp handle_sync(const SyncReq& req);
  FlushAck handle_flush(const FlushReq& req);

  GlobalTable& table() { return table_; }
  const GlobalTable& table() const { return table_; }

 private:
  GlobalTable table_;
  DenseReducer dense_;
};

}  // namespace embcache

#endif  // EMBCACHE_SERVER_H_
