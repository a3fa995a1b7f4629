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

#include "embcache/server.h"

#include <algorithm>
#include <string>

#include "embcache/errors.h"

namespace embcache {

GlobalTable::GlobalTable(std::size_t dim, std::uint64_t init_seed) : dim_(dim), init_seed_(init_seed) {
  if (dim == 0) {
    throw DimensionError("embedding dimension must be at least 1");
  }
}

void GlobalTable::check_dim(std::size_t n) const {
  if (n != dim_) {
    throw ProtocolError("delta has " + std::to_string(n) + " elements, table dimension is " + std::to_string(dim_));
  }
}

GlobalEntry& GlobalTable::row_locked(Shard& shard, EmbeddingKey key) {
  auto it = shard.rows.find(key);
  if (it == shard.rows.end()) {
    it = shard.rows.emplace(key, GlobalEntry{init_embedding(key, dim_, init_seed_), 0}).first;
  }
  return it->second;
}

void GlobalTable::apply_locked(GlobalEntry& row, const EvictRecord& record) const {
  accumulate_into(row.vector, record.delta);
  row.clock = std::max(row.clock, record.clock);
}

std::vector<KeyedVector> GlobalTable::fetch(std::span<const EmbeddingKey> keys) {
  std::vector<KeyedVector> out;
  out.reserve(keys.size());
  for (const auto key : keys) {
    auto& shard = shard_for(key);
    std::lock_guard lock(shard.mu);
    const auto& row = row_locked(shard, key);
    out.push_back({key, row.vector, row.clock});
  }
  return out;
}

void GlobalTable::apply(std::span<const EvictRecord> records) {
  // Validate the whole batch first so a bad record cannot leave it half applied.
  for (const auto& r : records) check_dim(r.delta.size());
  for (const auto& r : records) {
    auto& shard = shard_for(r.key);
    std::lock_guard lock(shard.mu);
    apply_locked(row_locked(shard, r.key), r);
  }
}

std::vector<KeyedVector> GlobalTable::sync(std::span<const EvictRecord> records) {
  for (const auto& r : records) check_dim(r.delta.size());
  std::vector<KeyedVector> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    auto& shard = shard_for(r.key);
    std::lock_guard lock(shard.mu);
    auto& row = row_locked(shard, r.key);
    apply_locked(row, r);
    out.push_back({r.key, row.vector, row.clock});
  }
  return out;
}

std::vector<KeyClock> GlobalTable::clocks(std::span<const KeyClock> queries) const {
  std::vector<KeyClock> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    const auto clock = clock_of(q.key);
    if (!clock) {
      throw ProtocolError("clock check for unknown key " + std::to_string(q.key.id));
    }
    out.push_back({q.key, *clock});
  }
  return out;
}

std::optional<ClockValue> GlobalTable::clock_of(EmbeddingKey key) const {
  const auto& shard = shard_for(key);
  std::lock_guard lock(shard.mu);
  const auto it = shard.rows.find(key);
  if (it == shard.rows.end()) return std::nullopt;
  return it->second.clock;
}

std::optional<EmbeddingVector> GlobalTable::vector_of(EmbeddingKey key) const {
  const auto& shard = shard_for(key);
  std::lock_guard lock(shard.mu);
  const auto it = shard.rows.find(key);
  if (it == shard.rows.end()) return std::nullopt;
  return it->second.vector;
}

EmbeddingVector GlobalTable::vector_or_init(EmbeddingKey key) const {
  auto row = vector_of(key);
  return row ? std::move(*row) : init_embedding(key, dim_, init_seed_);
}

std::vector<KeyedVector> GlobalTable::snapshot() const {
  std::vector<KeyedVector> out;
  for (const auto& shard : shards_) {
    std::lock_guard lock(shard.mu);
    for (const auto& [key, row] : shard.rows) {
      out.push_back({key, row.vector, row.clock});
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  return out;
}

std::size_t GlobalTable::size() const {
  std::size_t n = 0;
  for (const auto& shard : shards_) {
    std::lock_guard lock(shard.mu);
    n += shard.rows.size();
  }
  return n;
}

DenseReducer::DenseReducer(std::size_t workers) : workers_(workers), next_round_(workers, 0) {
  if (workers == 0) {
    throw ConfigError("dense reducer needs at least one worker");
  }
}

std::uint64_t DenseReducer::submit(std::uint32_t worker_id, std::vector<float> values) {
  std::lock_guard lock(mu_);
  if (worker_id >= workers_) {
    throw ProtocolError("dense contribution from unknown worker " + std::to_string(worker_id));
  }
  const std::uint64_t id = next_round_[worker_id]++;
  auto& round = rounds_[id];
  if (round.parts.empty()) {
    round.parts.resize(workers_);
    round.collected.resize(workers_, false);
  }
  round.parts[worker_id] = std::move(values);
  if (++round.received == workers_) {
    std::vector<std::vector<float>> ordered;
    ordered.reserve(workers_);
    for (auto& part : round.parts) ordered.push_back(std::move(*part));
    round.result = elementwise_mean(ordered);
    round.parts.clear();
    done_.notify_all();
  }
  return id;
}

std::optional<std::vector<float>> DenseReducer::take_locked(std::uint64_t round_id, std::uint32_t worker_id) {
  auto it = rounds_.find(round_id);
  if (it == rounds_.end() || worker_id >= workers_) {
    throw ProtocolError("no dense round " + std::to_string(round_id) + " for worker " + std::to_string(worker_id));
  }
  auto& round = it->second;
  if (!round.result) return std::nullopt;
  if (round.collected[worker_id]) {
    throw ProtocolError("dense result collected twice by worker " + std::to_string(worker_id));
  }
  round.collected[worker_id] = true;
  auto out = *round.result;
  if (++round.collected_count == workers_) {
    rounds_.erase(it);
  }
  return out;
}

std::optional<std::vector<float>> DenseReducer::poll(std::uint64_t round, std::uint32_t worker_id) {
  std::lock_guard lock(mu_);
  return take_locked(round, worker_id);
}

std::vector<float> DenseReducer::await(std::uint64_t round, std::uint32_t worker_id,
                                       std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    if (auto result = take_locked(round, worker_id)) {
      return std::move(*result);
    }
    if (done_.wait_until(lock, deadline) == std::cv_status::timeout) {
      if (auto result = take_locked(round, worker_id)) {
        return std::move(*result);
      }
      throw BarrierError("dense round " + std::to_string(round) + " timed out waiting for contributions");
    }
  }
}

ParameterServer::ParameterServer(std::size_t dim, std::uint64_t init_seed, std::size_t workers)
    : table_(dim, init_seed), dense_(workers) {}

FetchResp ParameterServer::handle_fetch(const FetchReq& req) { return FetchResp{table_.fetch(req.keys)}; }

EvictAck ParameterServer::handle_evict(const EvictReq& req) {
  table_.apply(req.records);
  return {};
}

ClockCheckResp ParameterServer::handle_clock_check(const ClockCheckReq& req) const {
  return ClockCheckResp{table_.clocks(req.pairs)};
}

SyncResp ParameterServer::handle_sync(const SyncReq& req) { return SyncResp{table_.sync(req.records)}; }

FlushAck ParameterServer::handle_flush(const FlushReq& req) {
  table_.apply(req.records);
  return {};
}

Message ParameterServer::handle(const Message& request) {
  return std::visit(
      [this](const auto& m) -> Message {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, FetchReq>) {
          return handle_fetch(m);
        } else if constexpr (std::is_same_v<T, EvictReq>) {
          return handle_evict(m);
        } else if constexpr (std::is_same_v<T, ClockCheckReq>) {
          return handle_clock_check(m);
        } else if constexpr (std::is_same_v<T, SyncReq>) {
          return handle_sync(m);
        } else if constexpr (std::is_same_v<T, FlushReq>) {
          return handle_flush(m);
        } else {
          throw ProtocolError("server cannot handle " + std::string(type_name(type_of(Message{m}))));
        }
      },
      request);
}

std::uint64_t ParameterServer::submit_dense(std::uint32_t worker_id, std::vector<float> values) {
  return dense_.submit(worker_id, std::move(values));
}

std::optional<std::vector<float>> ParameterServer::poll_dense(std::uint64_t round, std::uint32_t worker_id) {
  return dense_.poll(round, worker_id);
}

std::vector<float> ParameterServer::await_dense(std::uint64_t round, std::uint32_t worker_id,
                                                std::chrono::milliseconds timeout) {
  return dense_.await(round, worker_id, timeout);
}

}  // namespace embcache
