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

#ifndef EMBCACHE_TRAINER_H_
#define EMBCACHE_TRAINER_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "embcache/cache.h"
#include "embcache/client.h"
#include "embcache/model.h"
#include "embcache/server.h"
#include "embcache/tcp_transport.h"
#include "embcache/transport.h"
#include "embcache/workload.h"

namespace embcache {

enum class TrainMode { kNoCache, kCache };
enum class ScheduleKind { kRoundRobin, kAsyncRandom };
enum class Backend { kSim, kTcp };

std::string_view mode_name(TrainMode mode);
TrainMode parse_mode(std::string_view name);  // "ps_nocache" | "cache"
std::string_view schedule_name(ScheduleKind kind);
ScheduleKind parse_schedule(std::string_view name);  // "round_robin" | "async_random"
std::string_view backend_name(Backend backend);
Backend parse_backend(std::string_view name);  // "sim" | "tcp"

struct Schedule {
  ScheduleKind kind = ScheduleKind::kRoundRobin;
  std::uint64_t seed = 0;  // AsyncRandom worker picks
};

struct TransportConfig {
  Backend backend = Backend::kSim;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0: ephemeral
  // TCP only: run each worker on its own thread instead of the serialized
  // driver. Requires the AsyncRandom schedule; results are not reproducible.
  bool concurrent = false;
};

struct TrainConfig {
  std::size_t workers = 4;
  std::size_t iterations = 1000;
  std::size_t batch_size = 32;
  float eta = 0.1F;
  StalenessBound staleness{0};
  std::size_t dim = 16;
  double cache_fraction = 0.1;
  CachePolicy policy = CachePolicy::kLfu;
  Schedule schedule;
  TrainMode mode = TrainMode::kCache;
  std::uint64_t seed = 0;
  // Vocabulary the cache fraction refers to.
  std::size_t vocab_size = 100'000;
  bool fused_sync = true;
  bool bound_writeback = true;
  std::uint64_t promotion_threshold = 64;
  // Carry an evicted key's LFU count over to its next install.
  bool persistent_frequency = false;
  // Prefetch the next batch's keys after each step. Deferred on the
  // serialized driver, asynchronous on the concurrent one.
  bool prefetch = true;

  // Throws ConfigError.
  void validate() const;
  // ceil(cache_fraction * vocab_size), at least 1.
  std::size_t cache_capacity() const;
};

struct RunReport {
  // Mean training loss per iteration. An AsyncRandom iteration is a block of
  // `workers` scheduled steps.
  std::vector<double> loss_curve;
  std::optional<double> final_auc;  // empty when the test set has one class
  std::vector<ClientStats> stats;   // per worker, dense traffic included
  std::vector<std::uint64_t> steps;  // per worker
  std::uint64_t clock_violations = 0;
  double wall_time = 0.0;  // seconds
  DenseParams dense;       // final, worker 0
};

// Runs mini-batch SGD over a parameter server with one client per worker.
// The server, transport and clients live as long as the trainer, so the
// final state can be inspected after run().
class Trainer {
 public:
  Trainer(TrainConfig config, TransportConfig transport = {}, ClientObserver* observer = nullptr);
  ~Trainer();
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  // Trains on `train` split equally across workers, flushes every client
  // and evaluates on `test` with the global table. Callable once.
  RunReport run(const Dataset& train, const Dataset& test);

  const TrainConfig& config() const { return config_; }
  ParameterServer& server() { return *server_; }
  const ParameterServer& server() const { return *server_; }
  EmbeddingClient& client(std::size_t worker) { return *clients_.at(worker); }
  // Null in PS_NoCache mode.
  const CacheTable* cache(std::size_t worker) const;
  const DenseParams& dense(std::size_t worker) const { return dense_.at(worker); }

 private:
  class BatchSampler;
  struct StepResult {
    std::vector<float> dense_gradient;
    double loss = 0.0;
  };

  StepResult step(std::size_t worker, BatchSampler& sampler);
  std::vector<std::vector<float>> reduce_dense(const std::vector<std::vector<float>>& parts);
  void run_round_robin(std::vector<BatchSampler>& samplers, RunReport& report);
  void run_async_random(std::vector<BatchSampler>& samplers, RunReport& report);
  void run_concurrent(std::vector<BatchSampler>& samplers, RunReport& report);
  void evaluate(const Dataset& test, RunReport& report) const;

  TrainConfig config_;
  TransportConfig transport_;
  ClientObserver* observer_;
  std::unique_ptr<ParameterServer> server_;
  std::unique_ptr<TcpServer> tcp_server_;
  std::vector<std::unique_ptr<Endpoint>> endpoints_;
  std::vector<std::unique_ptr<EmbeddingClient>> clients_;
  std::vector<DenseParams> dense_;
  std::vector<std::uint64_t> steps_;
  bool ran_ = false;
};

}  // namespace embcache

#endif  // EMBCACHE_TRAINER_H_
