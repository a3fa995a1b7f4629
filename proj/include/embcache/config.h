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

#ifndef EMBCACHE_CONFIG_H_
#define EMBCACHE_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "embcache/cache.h"
#include "embcache/core.h"
#include "embcache/trainer.h"
#include "embcache/workload.h"

namespace embcache {

inline constexpr int kSchemaVersion = 1;

struct DatasetSource {
  DatasetSpec spec;
  // When set, samples come from this CSV instead of the generator; keys are
  // hashed into [1, vocab_size].
  std::optional<std::filesystem::path> csv;
  double holdout_fraction = 0.1;
};

struct SweepConfig {
  std::vector<double> cache_sizes{0.03, 0.05, 0.10, 0.15};
  std::vector<CachePolicy> policies{CachePolicy::kLru, CachePolicy::kLfu, CachePolicy::kLightLfu};
  std::vector<StalenessBound> staleness_values{StalenessBound(0), StalenessBound(100), StalenessBound(10000),
                                               StalenessBound::infinite()};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

struct ExperimentConfig {
  DatasetSource dataset;
  // dim and vocab_size mirror the dataset section.
  TrainConfig train;
  TransportConfig transport;
  bool recorder = false;
  std::filesystem::path output = "out";
  SweepConfig sweeps;

  // Throws ConfigError.
  void validate() const;
};

// Missing fields keep their defaults; unknown fields, wrong types and
// invalid values raise ConfigError. The result is validated.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

nlohmann::json staleness_to_json(StalenessBound s);
StalenessBound staleness_from_json(const nlohmann::json& value);

}  // namespace embcache

#endif  // EMBCACHE_CONFIG_H_
