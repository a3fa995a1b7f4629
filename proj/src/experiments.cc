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

#include "embcache/experiments.h"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "embcache/errors.h"
#include "embcache/random.h"

namespace embcache {

using nlohmann::json;

namespace {

json stats_to_json(const ClientStats& s) {
  return json{
      {"reads", s.reads},
      {"writes", s.writes},
      {"cache_hits", s.cache_hits},
      {"cache_misses", s.cache_misses},
      {"invalid_hits", s.invalid_hits},
      {"embedding_bytes_sent", s.embedding_bytes_sent},
      {"embedding_bytes_received", s.embedding_bytes_received},
      {"clock_bytes", s.clock_bytes},
      {"dense_bytes", s.dense_bytes},
      {"bytes_sent", s.bytes_sent},
      {"bytes_received", s.bytes_received},
      {"round_trips", s.round_trips},
  };
}

ClientStats total_stats(const RunReport& report) {
  ClientStats total;
  for (const auto& s : report.stats) total += s;
  return total;
}

std::string table_digest(const std::vector<KeyedVector>& rows) {
  std::uint64_t h = 0x243F6A8885A308D3ULL;
  for (const auto& row : rows) {
    h = hash_combine(h, row.key.id);
    h = hash_combine(h, row.clock);
    for (const float v : row.vector) h = hash_combine(h, std::bit_cast<std::uint32_t>(v));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json run_auc(const RunReport& report) {
  return report.final_auc ? json(*report.final_auc) : json(nullptr);
}

}  // namespace

LoadedData load_data(const ExperimentConfig& config) {
  LoadedData out;
  if (config.dataset.csv) {
    out.all = load_csv(*config.dataset.csv, config.dataset.spec.vocab_size);
  } else {
    out.all = gen_dataset(config.dataset.spec);
  }
  auto [train, test] = split_holdout(out.all, config.dataset.holdout_fraction);
  out.train = std::move(train);
  out.test = std::move(test);
  return out;
}

SimulationOutcome run_simulation(const ExperimentConfig& config, const LoadedData& data, bool force_recorder,
                                 std::vector<RecorderEvent>* log_out) {
  const bool use_recorder = config.recorder || force_recorder;
  if (use_recorder && config.transport.backend != Backend::kSim) {
    throw ConfigError("the recorder needs the sim backend");
  }
  std::optional<Recorder> recorder;
  if (use_recorder) recorder.emplace(config.train.staleness, log_out != nullptr);

  Trainer trainer(config.train, config.transport, recorder ? &*recorder : nullptr);
  if (recorder) {
    std::vector<const CacheTable*> caches;
    for (std::size_t w = 0; w < config.train.workers; ++w) caches.push_back(trainer.cache(w));
    recorder->attach(&trainer.server().table(), std::move(caches));
  }

  SimulationOutcome out;
  out.report = trainer.run(data.train, data.test);
  out.final_table = trainer.server().table().snapshot();
  if (recorder) {
    RecorderSummary summary;
    summary.events = recorder->events();
    summary.read_write_events = recorder->read_write_events();
    summary.violations = recorder->violation_count();
    summary.first_violations = recorder->violations();
    summary.replica_pairs_checked = recorder->replica_pairs_checked();
    summary.max_replica_gap = recorder->max_replica_gap();
    summary.conservation = recorder->check_conservation(trainer.server().table(), kConservationTolerance);
    if (log_out) {
      *log_out = recorder->log();
    }
    out.report.clock_violations = summary.violations;
    if (summary.violations > 0) {
      out.failures.push_back(std::to_string(summary.violations) + " clock invariant violations, first: " +
                             summary.first_violations.front().what);
    }
    if (!summary.conservation.ok()) {
      out.failures.push_back("conservation failed for " + std::to_string(summary.conservation.mismatched_keys) +
                             " keys (max error " + std::to_string(summary.conservation.max_abs_error) + ")");
    }
    out.recorder = std::move(summary);
  }
  for (const double loss : out.report.loss_curve) {
    if (!std::isfinite(loss)) {
      out.failures.push_back("non-finite training loss");
      break;
    }
  }
  return out;
}

CacheSweepRow replay_trace(std::span<const EmbeddingKey> trace, const CacheOptions& options) {
  CacheTable cache(1, options);
  CacheSweepRow row;
  row.policy = options.policy;
  row.capacity = options.capacity;
  const EmbeddingVector placeholder{0.0F};
  std::unordered_set<EmbeddingKey> seen;
  for (const auto key : trace) {
    ++row.accesses;
    if (!cache.find(key)) {
      ++row.misses;
      cache.unpin_all();
      cache.pin(key);
      cache.fetch_install(key, placeholder, 0);
    }
    cache.get(key);
    seen.insert(key);
  }
  row.distinct_keys = seen.size();
  return row;
}

std::vector<CacheSweepRow> cache_sweep(std::span<const EmbeddingKey> trace, std::size_t vocab_size,
                                       std::span<const double> fractions, std::span<const CachePolicy> policies,
                                       std::uint64_t promotion_threshold, bool persistent_frequency) {
  std::vector<CacheSweepRow> rows;
  for (const auto policy : policies) {
    for (const double fraction : fractions) {
      if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("cache fraction must lie in (0, 1]");
      CacheOptions options;
      options.policy = policy;
      options.capacity = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(vocab_size) - 1e-9)));
      options.promotion_threshold = promotion_threshold;
      options.persistent_frequency = persistent_frequency;
      auto row = replay_trace(trace, options);
      row.fraction = fraction;
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<StalenessRow> staleness_sweep(const ExperimentConfig& config, const LoadedData& data) {
  std::vector<StalenessRow> rows;
  for (const auto s : config.sweeps.staleness_values) {
    StalenessRow row;
    row.staleness = s;
    for (const auto seed : config.sweeps.seeds) {
      auto cfg = config;
      cfg.recorder = false;
      cfg.train.staleness = s;
      cfg.train.seed = seed;
      cfg.train.schedule.seed = seed;
      Trainer trainer(cfg.train, cfg.transport);
      const auto report = trainer.run(data.train, data.test);
      if (!report.final_auc) throw MetricError("test set lacks one of the classes; AUC undefined");
      row.aucs.push_back(*report.final_auc);
    }
    double sum = 0.0;
    for (const double a : row.aucs) sum += a;
    row.mean = sum / static_cast<double>(row.aucs.size());
    if (row.aucs.size() > 1) {
      double sq = 0.0;
      for (const double a : row.aucs) sq += (a - row.mean) * (a - row.mean);
      row.stdev = std::sqrt(sq / static_cast<double>(row.aucs.size() - 1));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

double CommReport::ratio() const {
  if (nocache_embedding_bytes == 0) return 0.0;
  return static_cast<double>(cache_embedding_bytes) / static_cast<double>(nocache_embedding_bytes);
}

double CommReport::clock_overhead() const {
  if (nocache_embedding_bytes == 0) return 0.0;
  return static_cast<double>(cache_clock_bytes) / static_cast<double>(nocache_embedding_bytes);
}

CommReport comm_report(const ExperimentConfig& config, const LoadedData& data) {
  auto run_mode = [&](TrainMode mode) {
    auto cfg = config;
    cfg.train.mode = mode;
    Trainer trainer(cfg.train, cfg.transport);
    return total_stats(trainer.run(data.train, data.test));
  };
  const auto cached = run_mode(TrainMode::kCache);
  const auto direct = run_mode(TrainMode::kNoCache);
  CommReport out;
  out.cache_embedding_bytes = cached.embedding_bytes_sent + cached.embedding_bytes_received;
  out.nocache_embedding_bytes = direct.embedding_bytes_sent + direct.embedding_bytes_received;
  out.cache_clock_bytes = cached.clock_bytes;
  out.cache_total_bytes = cached.bytes_sent + cached.bytes_received;
  out.nocache_total_bytes = direct.bytes_sent + direct.bytes_received;
  const auto lookups = cached.cache_hits + cached.cache_misses;
  out.cache_hit_rate = lookups ? static_cast<double>(cached.cache_hits) / static_cast<double>(lookups) : 0.0;
  return out;
}

json run_report_to_json(const ExperimentConfig& config, const SimulationOutcome& outcome) {
  const auto& r = outcome.report;
  json workers = json::array();
  for (std::size_t w = 0; w < r.stats.size(); ++w) {
    auto entry = stats_to_json(r.stats[w]);
    entry["worker"] = w;
    entry["steps"] = w < r.steps.size() ? r.steps[w] : 0;
    workers.push_back(std::move(entry));
  }
  json recorder = nullptr;
  if (outcome.recorder) {
    const auto& s = *outcome.recorder;
    json first = json::array();
    for (const auto& v : s.first_violations) first.push_back({{"tick", v.tick}, {"what", v.what}});
    recorder = json{
        {"read_write_events", s.read_write_events},
        {"violations", s.violations},
        {"first_violations", first},
        {"replica_pairs_checked", s.replica_pairs_checked},
        {"max_replica_gap", s.max_replica_gap},
        {"conservation",
         {{"keys_checked", s.conservation.keys_checked},
          {"mismatched_keys", s.conservation.mismatched_keys},
          {"max_abs_error", s.conservation.max_abs_error},
          {"tolerance", kConservationTolerance}}},
    };
  }
  return json{
      {"schema_version", kSchemaVersion},
      {"config", config_to_json(config)},
      {"loss_curve", r.loss_curve},
      {"final_auc", run_auc(r)},
      {"clock_violations", r.clock_violations},
      {"dense", {{"u", r.dense.u}, {"b", r.dense.b}}},
      {"workers", workers},
      {"totals", stats_to_json(total_stats(r))},
      {"global_rows", outcome.final_table.size()},
      {"table_digest", table_digest(outcome.final_table)},
      {"recorder", recorder},
      {"invariants_ok", outcome.ok()},
      {"failures", outcome.failures},
  };
}

json timing_to_json(const RunReport& report) {
  return json{{"schema_version", kSchemaVersion}, {"wall_time_seconds", report.wall_time}};
}

json cache_sweep_to_json(const std::vector<CacheSweepRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"policy", policy_name(r.policy)},
                   {"fraction", r.fraction},
                   {"capacity", r.capacity},
                   {"accesses", r.accesses},
                   {"misses", r.misses},
                   {"distinct_keys", r.distinct_keys},
                   {"miss_rate", r.miss_rate()}});
  }
  return json{{"schema_version", kSchemaVersion}, {"rows", out}};
}

std::string cache_sweep_to_csv(const std::vector<CacheSweepRow>& rows) {
  std::ostringstream out;
  out << "policy,fraction,capacity,accesses,misses,miss_rate\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f", r.miss_rate());
    out << policy_name(r.policy) << ',' << r.fraction << ',' << r.capacity << ',' << r.accesses << ',' << r.misses
        << ',' << buf << '\n';
  }
  return out.str();
}

json staleness_sweep_to_json(const std::vector<StalenessRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"staleness", staleness_to_json(r.staleness)},
                   {"aucs", r.aucs},
                   {"mean_auc", r.mean},
                   {"stdev_auc", r.stdev},
                   {"seeds", r.aucs.size()}});
  }
  return json{{"schema_version", kSchemaVersion}, {"rows", out}};
}

json comm_report_to_json(const ExperimentConfig& config, const CommReport& r) {
  return json{
      {"schema_version", kSchemaVersion},
      {"config", config_to_json(config)},
      {"cache_embedding_bytes", r.cache_embedding_bytes},
      {"nocache_embedding_bytes", r.nocache_embedding_bytes},
      {"cache_clock_bytes", r.cache_clock_bytes},
      {"cache_total_bytes", r.cache_total_bytes},
      {"nocache_total_bytes", r.nocache_total_bytes},
      {"cache_hit_rate", r.cache_hit_rate},
      {"embedding_byte_ratio", r.ratio()},
      {"reduction", r.reduction()},
      {"clock_overhead", r.clock_overhead()},
  };
}

json dataset_sidecar(const ExperimentConfig& config, const Dataset& data) {
  const auto& s = config.dataset.spec;
  json out{
      {"schema_version", kSchemaVersion},
      {"n_samples", data.size()},
      {"features_per_sample", s.features_per_sample},
      {"vocab_size", s.vocab_size},
      {"zipf_alpha", s.zipf_alpha},
      {"teacher_seed", s.teacher_seed},
      {"sample_seed", s.sample_seed},
      {"dim", s.dim},
      {"teacher_gain", s.teacher_gain},
      {"source", config.dataset.csv ? config.dataset.csv->string() : std::string("generated")},
  };
  out["popularity_deciles"] = data.empty() ? json::array() : json(popularity_report(data));
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

void write_json(const std::filesystem::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

}  // namespace embcache
