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

#ifndef EMBCACHE_WORKLOAD_H_
#define EMBCACHE_WORKLOAD_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "embcache/core.h"
#include "embcache/random.h"

namespace embcache {

struct Sample {
  std::vector<EmbeddingKey> keys;  // duplicates allowed
  std::uint8_t label = 0;          // 0 or 1

  friend bool operator==(const Sample&, const Sample&) = default;
};

using Dataset = std::vector<Sample>;

struct DatasetSpec {
  std::size_t n_samples = 200'000;
  std::size_t features_per_sample = 8;
  std::size_t vocab_size = 100'000;
  double zipf_alpha = 1.05;
  std::uint64_t teacher_seed = 1;
  // Seed of the key/label draws, independent of the teacher.
  std::uint64_t sample_seed = 2;
  std::size_t dim = 16;
  // Multiplies the teacher logit; 0 yields Bernoulli(0.5) labels.
  double teacher_gain = 1.0;

  // Throws ConfigError.
  void validate() const;
};

// Rank-frequency sampler: P(key = r) = r^-alpha / H for r in [1, m]. The CDF
// is held in 64-bit fixed point and sampled by binary search, so draws do not
// depend on floating-point behaviour once the table is built.
class ZipfSampler {
 public:
  ZipfSampler(double alpha, std::size_t vocab_size);

  EmbeddingKey operator()(CounterRng& rng) const;
  // Analytic probability of key r (1-based).
  double probability(std::uint64_t rank) const;
  std::size_t vocab_size() const { return cdf_.size(); }

 private:
  std::vector<std::uint64_t> cdf_;  // cdf_[r-1] = floor(P(key <= r) * 2^64), last forced to max
  std::vector<double> pmf_;
};

// Hidden logistic model that labels generated data.
struct Teacher {
  std::vector<float> u;
  float b = 0.0F;
  std::uint64_t seed = 0;
  std::size_t dim = 0;
  double gain = 1.0;

  static Teacher from_spec(const DatasetSpec& spec);
  EmbeddingVector embedding(EmbeddingKey key) const;
  double logit(std::span<const EmbeddingKey> keys) const;
};

Dataset gen_dataset(const DatasetSpec& spec);

// Splits off the last `fraction` of samples as a held-out set.
std::pair<Dataset, Dataset> split_holdout(Dataset data, double fraction);

// Cumulative share of accesses held by the top 10%, 20%, ..., 100% of the
// distinct keys, keys sorted by access count descending. Ten values, the
// last one 1.0.
std::vector<double> popularity_report(const Dataset& data);

// One sample per line: "<label>,<key> <key> ...". With vocab_cap set, keys
// are hashed into [1, vocab_cap]. Throws ParseError with the line number.
Dataset load_csv(const std::filesystem::path& path, std::optional<std::size_t> vocab_cap = std::nullopt);
void write_csv(const std::filesystem::path& path, const Dataset& data);

// Raw key stream in sample order, for cache replay.
std::vector<EmbeddingKey> access_trace(const Dataset& data);

}  // namespace embcache

#endif  // EMBCACHE_WORKLOAD_H_
