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

#ifndef EMBCACHE_EXPERIMENTS_H_
#define EMBCACHE_EXPERIMENTS_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "embcache/cache.h"
#include "embcache/config.h"
#include "embcache/recorder.h"
#include "embcache/trainer.h"
#include "embcache/workload.h"

namespace embcache {

inline constexpr double kConservationTolerance = 1e-5;

struct LoadedData {
  Dataset all;
  Dataset train;
  Dataset test;
};

// Generated or CSV samples, split by the configured holdout fraction.
LoadedData load_data(const ExperimentConfig& config);

struct RecorderSummary {
  std::uint64_t events = 0;
  std::uint64_t read_write_events = 0;
  std::uint64_t violations = 0;
  std::vector<Violation> first_violations;
  std::uint64_t replica_pairs_checked = 0;
  std::uint64_t max_replica_gap = 0;
  ConservationResult conservation;
};

struct SimulationOutcome {
  RunReport report;
  std::optional<RecorderSummary> recorder;
  std::vector<KeyedVector> final_table;  // global rows after flush, by key
  // Empty when every run-level invariant held.
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

// One training run. With the recorder on, the clock invariants and the
// conservation check are evaluated; with `keep_log` the full event stream is
// returned through `log_out`.
SimulationOutcome run_simulation(const ExperimentConfig& config, const LoadedData& data, bool force_recorder = false,
                                 std::vector<RecorderEvent>* log_out = nullptr);

struct CacheSweepRow {
  CachePolicy policy = CachePolicy::kLfu;
  double fraction = 0.0;
  std::size_t capacity = 0;
  std::uint64_t accesses = 0;
  std::uint64_t misses = 0;
  std::uint64_t distinct_keys = 0;

  double miss_rate() const { return accesses ? static_cast<double>(misses) / static_cast<double>(accesses) : 0.0; }
};

// Replays `trace` against an empty cache: a hit is get(), a miss is
// fetch_install() of the pinned key followed by get().
CacheSweepRow replay_trace(std::span<const EmbeddingKey> trace, const CacheOptions& options);

std::vector<CacheSweepRow> cache_sweep(std::span<const EmbeddingKey> trace, std::size_t vocab_size,
                                       std::span<const double> fractions, std::span<const CachePolicy> policies,
                                       std::uint64_t promotion_threshold, bool persistent_frequency = false);

struct StalenessRow {
  StalenessBound staleness;
  std::vector<double> aucs;  // one per seed, in seed order
  double mean = 0.0;
  double stdev = 0.0;  // sample standard deviation
};

// Trains once per (s, seed); the seed drives initialization, batch order
// and the schedule.
std::vector<StalenessRow> staleness_sweep(const ExperimentConfig& config, const LoadedData& data);

struct CommReport {
  std::uint64_t cache_embedding_bytes = 0;
  std::uint64_t nocache_embedding_bytes = 0;
  std::uint64_t cache_clock_bytes = 0;
  std::uint64_t cache_total_bytes = 0;
  std::uint64_t nocache_total_bytes = 0;
  double cache_hit_rate = 0.0;

  // Embedding payload only.
  double ratio() const;
  double reduction() const { return 1.0 - ratio(); }
  // Clock bytes relative to the baseline's embedding bytes.
  double clock_overhead() const;
};

// Cache mode at the configured s against PS_NoCache on the same data,
// seed and schedule.
CommReport comm_report(const ExperimentConfig& config, const LoadedData& data);

// Report serialization. Wall-clock time is kept out of these documents so
// reruns are byte-identical; see timing_to_json.
nlohmann::json run_report_to_json(const ExperimentConfig& config, const SimulationOutcome& outcome);
nlohmann::json timing_to_json(const RunReport& report);
nlohmann::json cache_sweep_to_json(const std::vector<CacheSweepRow>& rows);
std::string cache_sweep_to_csv(const std::vector<CacheSweepRow>& rows);
nlohmann::json staleness_sweep_to_json(const std::vector<StalenessRow>& rows);
nlohmann::json comm_report_to_json(const ExperimentConfig& config, const CommReport& report);
nlohmann::json dataset_sidecar(const ExperimentConfig& config, const Dataset& data);

// Writes `doc` with two-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace embcache

#endif  // EMBCACHE_EXPERIMENTS_H_
