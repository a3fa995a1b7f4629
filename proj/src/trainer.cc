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

#include "embcache/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>
#include <thread>

#include "embcache/errors.h"
#include "embcache/random.h"
#include "embcache/sim_transport.h"

namespace embcache {

namespace {
constexpr std::uint64_t kBatchStream = 0x6261'7463'68ULL;
constexpr std::uint64_t kScheduleStream = 0x7363'6865'64ULL;

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}
}  // namespace

std::string_view mode_name(TrainMode mode) {
  return mode == TrainMode::kNoCache ? "ps_nocache" : "cache";
}

TrainMode parse_mode(std::string_view name) {
  if (name == "ps_nocache") return TrainMode::kNoCache;
  if (name == "cache") return TrainMode::kCache;
  throw ConfigError("unknown mode '" + std::string(name) + "' (expected ps_nocache or cache)");
}

std::string_view schedule_name(ScheduleKind kind) {
  return kind == ScheduleKind::kRoundRobin ? "round_robin" : "async_random";
}

ScheduleKind parse_schedule(std::string_view name) {
  if (name == "round_robin") return ScheduleKind::kRoundRobin;
  if (name == "async_random") return ScheduleKind::kAsyncRandom;
  throw ConfigError("unknown schedule '" + std::string(name) + "' (expected round_robin or async_random)");
}

std::string_view backend_name(Backend backend) { return backend == Backend::kSim ? "sim" : "tcp"; }

Backend parse_backend(std::string_view name) {
  if (name == "sim") return Backend::kSim;
  if (name == "tcp") return Backend::kTcp;
  throw ConfigError("unknown backend '" + std::string(name) + "' (expected sim or tcp)");
}

void TrainConfig::validate() const {
  if (workers == 0) throw ConfigError("workers must be at least 1");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (!(eta > 0.0F) || !std::isfinite(eta)) throw ConfigError("eta must be a positive finite number");
  if (dim == 0) throw ConfigError("dim must be at least 1");
  if (vocab_size == 0) throw ConfigError("vocab_size must be at least 1");
  if (!(cache_fraction > 0.0 && cache_fraction <= 1.0)) throw ConfigError("cache_fraction must lie in (0, 1]");
  if (promotion_threshold == 0) throw ConfigError("promotion_threshold must be at least 1");
}

std::size_t TrainConfig::cache_capacity() const {
  const auto cap = static_cast<std::size_t>(std::ceil(cache_fraction * static_cast<double>(vocab_size) - 1e-9));
  return std::max<std::size_t>(cap, 1);
}

// Cycles through one worker's partition in a fresh pseudo-random order per
// epoch.
class Trainer::BatchSampler {
 public:
  BatchSampler(std::span<const Sample> partition, std::size_t batch_size, std::uint64_t seed)
      : partition_(partition), batch_size_(batch_size), seed_(seed), order_(partition.size()) {
    reshuffle();
  }

  std::vector<Sample> next() {
    std::vector<Sample> out;
    out.reserve(batch_size_);
    for (std::size_t i = 0; i < batch_size_; ++i) {
      if (cursor_ == order_.size()) {
        ++epoch_;
        reshuffle();
      }
      out.push_back(partition_[order_[cursor_++]]);
    }
    return out;
  }

  // Keys of the batch next() will return, without advancing.
  std::vector<EmbeddingKey> peek_keys() const {
    BatchSampler copy = *this;
    std::vector<EmbeddingKey> keys;
    for (const auto& s : copy.next()) keys.insert(keys.end(), s.keys.begin(), s.keys.end());
    return keys;
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    CounterRng rng(seed_, epoch_);
    for (std::size_t i = order_.size(); i > 1; --i) {
      std::swap(order_[i - 1], order_[rng.next_below(i)]);
    }
    cursor_ = 0;
  }

  std::span<const Sample> partition_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::uint64_t epoch_ = 0;
};

Trainer::Trainer(TrainConfig config, TransportConfig transport, ClientObserver* observer)
    : config_(config), transport_(std::move(transport)), observer_(observer) {
  config_.validate();
  if (transport_.concurrent) {
    if (transport_.backend != Backend::kTcp) throw ConfigError("concurrent execution needs the tcp backend");
    if (config_.schedule.kind != ScheduleKind::kAsyncRandom) {
      throw ConfigError("concurrent execution needs the async_random schedule");
    }
  }
  server_ = std::make_unique<ParameterServer>(config_.dim, config_.seed, config_.workers);
  if (transport_.backend == Backend::kTcp) {
    tcp_server_ = std::make_unique<TcpServer>(*server_, transport_.host, transport_.port);
  }
  auto make_endpoint = [&]() -> std::unique_ptr<Endpoint> {
    if (tcp_server_) return std::make_unique<TcpEndpoint>(transport_.host, tcp_server_->port());
    return std::make_unique<SimEndpoint>(*server_);
  };
  for (std::size_t w = 0; w < config_.workers; ++w) {
    endpoints_.push_back(make_endpoint());
    const auto id = static_cast<std::uint32_t>(w);
    if (config_.mode == TrainMode::kNoCache) {
      clients_.push_back(std::make_unique<DirectClient>(*endpoints_.back(), id, observer_));
    } else {
      CacheOptions cache_options;
      cache_options.capacity = config_.cache_capacity();
      cache_options.policy = config_.policy;
      cache_options.promotion_threshold = config_.promotion_threshold;
      cache_options.persistent_frequency = config_.persistent_frequency;
      ClientOptions options;
      options.worker_id = id;
      options.staleness = config_.staleness;
      options.fused_sync = config_.fused_sync;
      options.bound_writeback = config_.bound_writeback;
      options.prefetch_mode = transport_.concurrent ? PrefetchMode::kAsync : PrefetchMode::kDeferred;
      clients_.push_back(std::make_unique<CachedClient>(*endpoints_.back(), CacheTable(config_.dim, cache_options),
                                                        options, observer_));
    }
  }
  dense_.assign(config_.workers, DenseParams::init(config_.dim, config_.seed));
  steps_.assign(config_.workers, 0);
}

Trainer::~Trainer() = default;

const CacheTable* Trainer::cache(std::size_t worker) const {
  const auto* cached = dynamic_cast<const CachedClient*>(clients_.at(worker).get());
  return cached ? &cached->cache() : nullptr;
}

Trainer::StepResult Trainer::step(std::size_t worker, BatchSampler& sampler) {
  const auto batch = sampler.next();
  std::vector<EmbeddingKey> keys;
  for (const auto& s : batch) keys.insert(keys.end(), s.keys.begin(), s.keys.end());

  auto& client = *clients_[worker];
  const auto embeddings = client.read(keys);
  auto z = logits(batch, embeddings, dense_[worker]);
  const double loss = bce_loss(z, batch);
  for (auto& v : z) v = 1.0 / (1.0 + std::exp(-v));
  auto grads = backward(batch, z, embeddings, dense_[worker]);
  client.write(grads.embeddings, config_.eta);
  if (config_.prefetch) client.prefetch(sampler.peek_keys());
  ++steps_[worker];
  if (!std::isfinite(loss)) throw Error("training loss is not finite at worker " + std::to_string(worker));
  return {std::move(grads.dense), loss};
}

std::vector<std::vector<float>> Trainer::reduce_dense(const std::vector<std::vector<float>>& parts) {
  for (std::size_t w = 0; w < parts.size(); ++w) {
    endpoints_[w]->send(DenseReduceReq{static_cast<std::uint32_t>(w), parts[w]});
  }
  std::vector<std::vector<float>> out;
  out.reserve(parts.size());
  for (std::size_t w = 0; w < parts.size(); ++w) {
    out.push_back(expect<DenseReduceResp>(endpoints_[w]->receive()).values);
  }
  return out;
}

void Trainer::run_round_robin(std::vector<BatchSampler>& samplers, RunReport& report) {
  const auto n = config_.workers;
  std::vector<std::vector<float>> grads(n);
  std::vector<double> losses(n);
  for (std::size_t t = 0; t < config_.iterations; ++t) {
    for (std::size_t w = 0; w < n; ++w) {
      auto r = step(w, samplers[w]);
      grads[w] = std::move(r.dense_gradient);
      losses[w] = r.loss;
    }
    const auto means = reduce_dense(grads);
    for (std::size_t w = 0; w < n; ++w) apply_dense(dense_[w], means[w], config_.eta);
    for (std::size_t w = 1; w < n; ++w) {
      if (!(dense_[w] == dense_[0])) throw ProtocolError("dense replicas diverged at iteration " + std::to_string(t));
    }
    report.loss_curve.push_back(mean_of(losses));
  }
}

void Trainer::run_async_random(std::vector<BatchSampler>& samplers, RunReport& report) {
  const auto n = config_.workers;
  CounterRng picker(hash_combine(config_.seed, config_.schedule.seed), kScheduleStream);
  std::vector<double> block;
  block.reserve(n);
  std::vector<std::vector<float>> packed(n);
  for (std::size_t t = 0; t < config_.iterations; ++t) {
    block.clear();
    for (std::size_t k = 0; k < n; ++k) {
      const auto w = static_cast<std::size_t>(picker.next_below(n));
      auto r = step(w, samplers[w]);
      apply_dense(dense_[w], r.dense_gradient, config_.eta);
      block.push_back(r.loss);
    }
    for (std::size_t w = 0; w < n; ++w) packed[w] = dense_[w].pack();
    const auto means = reduce_dense(packed);
    for (std::size_t w = 0; w < n; ++w) dense_[w] = DenseParams::unpack(means[w]);
    report.loss_curve.push_back(mean_of(block));
  }
}

void Trainer::run_concurrent(std::vector<BatchSampler>& samplers, RunReport& report) {
  const auto n = config_.workers;
  std::vector<std::vector<double>> losses(n, std::vector<double>(config_.iterations, 0.0));
  std::vector<std::exception_ptr> failures(n);
  std::vector<std::thread> threads;
  threads.reserve(n);
  for (std::size_t w = 0; w < n; ++w) {
    threads.emplace_back([&, w] {
      try {
        auto& endpoint = *endpoints_[w];
        for (std::size_t t = 0; t < config_.iterations; ++t) {
          auto r = step(w, samplers[w]);
          apply_dense(dense_[w], r.dense_gradient, config_.eta);
          auto resp = expect<DenseReduceResp>(
              endpoint.request(DenseReduceReq{static_cast<std::uint32_t>(w), dense_[w].pack()}));
          dense_[w] = DenseParams::unpack(resp.values);
          losses[w][t] = r.loss;
        }
      } catch (...) {
        failures[w] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  std::vector<double> column(n);
  for (std::size_t t = 0; t < config_.iterations; ++t) {
    for (std::size_t w = 0; w < n; ++w) column[w] = losses[w][t];
    report.loss_curve.push_back(mean_of(column));
  }
}

void Trainer::evaluate(const Dataset& test, RunReport& report) const {
  if (test.empty()) return;
  EmbeddingLookup embeddings;
  const auto& table = server_->table();
  for (const auto& s : test) {
    for (const auto key : s.keys) {
      if (!embeddings.contains(key)) embeddings.emplace(key, table.vector_or_init(key));
    }
  }
  const auto preds = forward(test, embeddings, dense_[0]);
  std::vector<std::uint8_t> labels;
  labels.reserve(test.size());
  for (const auto& s : test) labels.push_back(s.label);
  try {
    report.final_auc = auc(preds, labels);
  } catch (const MetricError&) {
    report.final_auc.reset();
  }
}

RunReport Trainer::run(const Dataset& train, const Dataset& test) {
  if (ran_) throw Error("Trainer::run may only be called once");
  ran_ = true;
  const auto started = std::chrono::steady_clock::now();
  const auto n = config_.workers;
  if (train.empty()) throw ConfigError("training set is empty");
  const auto part = train.size() / n;
  if (part < config_.batch_size) {
    throw ConfigError("each worker's partition (" + std::to_string(part) + " samples) is smaller than batch_size (" +
                      std::to_string(config_.batch_size) + ")");
  }
  if (config_.mode == TrainMode::kCache) {
    std::size_t widest = 0;
    for (const auto& s : train) widest = std::max(widest, s.keys.size());
    if (config_.cache_capacity() < config_.batch_size * widest) {
      throw ConfigError("cache capacity " + std::to_string(config_.cache_capacity()) +
                        " cannot hold one batch of up to " + std::to_string(config_.batch_size * widest) + " keys");
    }
  }

  std::vector<BatchSampler> samplers;
  samplers.reserve(n);
  for (std::size_t w = 0; w < n; ++w) {
    samplers.emplace_back(std::span<const Sample>(train).subspan(w * part, part), config_.batch_size,
                          hash_combine(hash_combine(config_.seed, kBatchStream), w));
  }

  RunReport report;
  report.loss_curve.reserve(config_.iterations);
  if (transport_.concurrent) {
    run_concurrent(samplers, report);
  } else if (config_.schedule.kind == ScheduleKind::kRoundRobin) {
    run_round_robin(samplers, report);
  } else {
    run_async_random(samplers, report);
  }
  for (auto& client : clients_) client->flush();

  for (std::size_t w = 0; w < n; ++w) {
    report.stats.push_back(clients_[w]->stats());
  }
  report.steps = steps_;
  report.dense = dense_[0];
  evaluate(test, report);
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace embcache
