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

// Command-line driver for data generation, training runs and sweeps.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "embcache/config.h"
#include "embcache/errors.h"
#include "embcache/experiments.h"

namespace {

using embcache::ExperimentConfig;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "Overrides train.seed");
  cmd->add_option("--out", flags.out, "Output directory (overrides config.output)");
}

ExperimentConfig resolve(const CommonFlags& flags) {
  ExperimentConfig cfg = flags.config.empty() ? ExperimentConfig{} : embcache::load_config(flags.config);
  if (flags.seed) cfg.train.seed = *flags.seed;
  if (!flags.out.empty()) cfg.output = flags.out;
  cfg.validate();
  return cfg;
}

int gen_data(const ExperimentConfig& cfg) {
  const auto data = embcache::load_data(cfg);
  const auto csv = cfg.output / "dataset.csv";
  std::filesystem::create_directories(cfg.output);
  embcache::write_csv(csv, data.all);
  embcache::write_json(cfg.output / "dataset.json", embcache::dataset_sidecar(cfg, data.all));
  std::printf("wrote %zu samples to %s\n", data.all.size(), csv.c_str());
  return 0;
}

int simulate(const ExperimentConfig& cfg, bool force_recorder) {
  const auto data = embcache::load_data(cfg);
  const bool recording = cfg.recorder || force_recorder;
  std::vector<embcache::RecorderEvent> log;
  const auto outcome = embcache::run_simulation(cfg, data, force_recorder, recording ? &log : nullptr);
  embcache::write_json(cfg.output / "run_report.json", embcache::run_report_to_json(cfg, outcome));
  embcache::write_json(cfg.output / "timing.json", embcache::timing_to_json(outcome.report));
  if (recording) {
    std::ofstream out(cfg.output / "recorder_log.csv", std::ios::binary | std::ios::trunc);
    embcache::write_event_log(out, log);
  }
  const auto& r = outcome.report;
  std::printf("mode=%s s=%s final_auc=%s clock_violations=%llu\n",
              std::string(embcache::mode_name(cfg.train.mode)).c_str(), cfg.train.staleness.to_string().c_str(),
              r.final_auc ? std::to_string(*r.final_auc).c_str() : "n/a",
              static_cast<unsigned long long>(r.clock_violations));
  if (outcome.recorder) {
    std::printf("recorded %llu read/write events, %llu replica pairs checked, max gap %llu\n",
                static_cast<unsigned long long>(outcome.recorder->read_write_events),
                static_cast<unsigned long long>(outcome.recorder->replica_pairs_checked),
                static_cast<unsigned long long>(outcome.recorder->max_replica_gap));
  }
  for (const auto& f : outcome.failures) std::fprintf(stderr, "invariant failed: %s\n", f.c_str());
  return outcome.ok() ? 0 : 1;
}

int cache_sweep(const ExperimentConfig& cfg) {
  const auto data = embcache::load_data(cfg);
  const auto trace = embcache::access_trace(data.all);
  const auto rows = embcache::cache_sweep(trace, cfg.dataset.spec.vocab_size, cfg.sweeps.cache_sizes,
                                          cfg.sweeps.policies, cfg.train.promotion_threshold,
                                          cfg.train.persistent_frequency);
  embcache::write_json(cfg.output / "cache_sweep.json", embcache::cache_sweep_to_json(rows));
  const auto csv = embcache::cache_sweep_to_csv(rows);
  embcache::write_text(cfg.output / "cache_sweep.csv", csv);
  std::fputs(csv.c_str(), stdout);
  return 0;
}

int staleness_sweep(const ExperimentConfig& cfg) {
  const auto data = embcache::load_data(cfg);
  const auto rows = embcache::staleness_sweep(cfg, data);
  embcache::write_json(cfg.output / "staleness_sweep.json", embcache::staleness_sweep_to_json(rows));
  for (const auto& r : rows) {
    std::printf("s=%-6s mean_auc=%.4f stdev=%.4f\n", r.staleness.to_string().c_str(), r.mean, r.stdev);
  }
  return 0;
}

int comm_report(const ExperimentConfig& cfg) {
  const auto data = embcache::load_data(cfg);
  const auto r = embcache::comm_report(cfg, data);
  embcache::write_json(cfg.output / "comm_report.json", embcache::comm_report_to_json(cfg, r));
  std::printf("embedding bytes: cache=%llu nocache=%llu ratio=%.4f reduction=%.2f%% clock_overhead=%.4f\n",
              static_cast<unsigned long long>(r.cache_embedding_bytes),
              static_cast<unsigned long long>(r.nocache_embedding_bytes), r.ratio(), 100.0 * r.reduction(),
              r.clock_overhead());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cached embedding parameter server: data generation, training and sweeps"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto* gen = app.add_subcommand("gen-data", "Generate a dataset CSV and its sidecar JSON");
  auto* sim = app.add_subcommand("simulate", "Run one training job and write its report");
  auto* verify = app.add_subcommand("verify-clocks", "simulate with the invariant recorder forced on");
  auto* sweep = app.add_subcommand("cache-sweep", "Replay the access trace for each cache size and policy");
  auto* stale = app.add_subcommand("staleness-sweep", "Final AUC over staleness bounds and seeds");
  auto* comm = app.add_subcommand("comm-report", "Embedding traffic of Cache mode against PS_NoCache");
  for (auto* cmd : {gen, sim, verify, sweep, stale, comm}) add_common(cmd, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve(flags);
    if (gen->parsed()) return gen_data(cfg);
    if (sim->parsed()) return simulate(cfg, false);
    if (verify->parsed()) return simulate(cfg, true);
    if (sweep->parsed()) return cache_sweep(cfg);
    if (stale->parsed()) return staleness_sweep(cfg);
    if (comm->parsed()) return comm_report(cfg);
  } catch (const embcache::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
