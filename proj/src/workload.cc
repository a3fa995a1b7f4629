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

#include "embcache/workload.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>

#include "embcache/errors.h"

namespace embcache {

namespace {
constexpr std::uint64_t kTeacherUStream = 0x7465'6163'6865'7275ULL;
constexpr std::uint64_t kTeacherEmbStream = 0x7465'6163'6865'7278ULL;
constexpr std::uint64_t kLabelStream = 0x6C61'6265'6Cull;
}  // namespace

void DatasetSpec::validate() const {
  if (features_per_sample == 0) throw ConfigError("features_per_sample must be at least 1");
  if (vocab_size < features_per_sample) {
    throw ConfigError("vocab_size (" + std::to_string(vocab_size) + ") must be >= features_per_sample (" +
                      std::to_string(features_per_sample) + ")");
  }
  if (!(zipf_alpha > 0.0) || !std::isfinite(zipf_alpha)) throw ConfigError("zipf_alpha must be > 0");
  if (dim == 0) throw ConfigError("dim must be at least 1");
  if (!std::isfinite(teacher_gain)) throw ConfigError("teacher_gain must be finite");
}

ZipfSampler::ZipfSampler(double alpha, std::size_t vocab_size) {
  if (!(alpha > 0.0)) throw ConfigError("zipf alpha must be > 0");
  if (vocab_size == 0) throw ConfigError("zipf vocabulary must be non-empty");
  pmf_.resize(vocab_size);
  long double norm = 0.0L;
  // Smallest terms first keeps the harmonic sum accurate.
  for (std::size_t r = vocab_size; r >= 1; --r) {
    pmf_[r - 1] = std::pow(static_cast<double>(r), -alpha);
    norm += pmf_[r - 1];
  }
  cdf_.resize(vocab_size);
  long double cum = 0.0L;
  constexpr long double kScale = 18446744073709551616.0L;  // 2^64
  for (std::size_t r = 0; r < vocab_size; ++r) {
    pmf_[r] = static_cast<double>(pmf_[r] / norm);
    cum += pmf_[r];
    const long double fixed = std::floor(std::min(cum, 1.0L) * kScale);
    cdf_[r] = fixed >= kScale ? UINT64_MAX : static_cast<std::uint64_t>(fixed);
  }
  cdf_.back() = UINT64_MAX;
}

EmbeddingKey ZipfSampler::operator()(CounterRng& rng) const {
  const auto x = rng.next_u64();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), x);
  const auto rank = it == cdf_.end() ? cdf_.size() : static_cast<std::size_t>(it - cdf_.begin()) + 1;
  return EmbeddingKey{rank};
}

double ZipfSampler::probability(std::uint64_t rank) const {
  if (rank == 0 || rank > pmf_.size()) return 0.0;
  return pmf_[rank - 1];
}

Teacher Teacher::from_spec(const DatasetSpec& spec) {
  Teacher t;
  t.seed = spec.teacher_seed;
  t.dim = spec.dim;
  t.gain = spec.teacher_gain;
  CounterRng rng(spec.teacher_seed, kTeacherUStream);
  t.u.resize(spec.dim);
  for (auto& v : t.u) v = static_cast<float>(2.0 * rng.next_double() - 1.0);
  t.b = 0.0F;
  return t;
}

EmbeddingVector Teacher::embedding(EmbeddingKey key) const {
  // Scaled so the pooled logit over F keys has a standard deviation near 2
  // for F = 8, D = 16.
  const double half_width = std::sqrt(36.0 / (8.0 * static_cast<double>(dim)));
  CounterRng rng(hash_combine(seed, kTeacherEmbStream), key.id);
  EmbeddingVector out(dim);
  for (auto& v : out) v = static_cast<float>((2.0 * rng.next_double() - 1.0) * half_width);
  return out;
}

double Teacher::logit(std::span<const EmbeddingKey> keys) const {
  std::vector<double> pooled(dim, 0.0);
  for (const auto key : keys) {
    const auto e = embedding(key);
    for (std::size_t i = 0; i < dim; ++i) pooled[i] += e[i];
  }
  double z = b;
  for (std::size_t i = 0; i < dim; ++i) z += u[i] * pooled[i];
  return gain * z;
}

Dataset gen_dataset(const DatasetSpec& spec) {
  spec.validate();
  const ZipfSampler zipf(spec.zipf_alpha, spec.vocab_size);
  const Teacher teacher = Teacher::from_spec(spec);
  Dataset out(spec.n_samples);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    CounterRng rng(spec.sample_seed, i);
    auto& sample = out[i];
    sample.keys.resize(spec.features_per_sample);
    for (auto& key : sample.keys) key = zipf(rng);
    const double p = 1.0 / (1.0 + std::exp(-teacher.logit(sample.keys)));
    CounterRng label_rng(hash_combine(spec.sample_seed, kLabelStream), i);
    sample.label = label_rng.next_double() < p ? 1 : 0;
  }
  return out;
}

std::pair<Dataset, Dataset> split_holdout(Dataset data, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("holdout fraction must lie in [0, 1)");
  const auto held = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(data.size())));
  Dataset test(std::make_move_iterator(data.end() - static_cast<std::ptrdiff_t>(held)),
               std::make_move_iterator(data.end()));
  data.resize(data.size() - held);
  return {std::move(data), std::move(test)};
}

std::vector<double> popularity_report(const Dataset& data) {
  std::unordered_map<EmbeddingKey, std::uint64_t> counts;
  std::uint64_t total = 0;
  for (const auto& s : data) {
    for (const auto key : s.keys) {
      ++counts[key];
      ++total;
    }
  }
  if (total == 0) throw MetricError("popularity of an empty dataset is undefined");
  std::vector<std::uint64_t> sorted;
  sorted.reserve(counts.size());
  for (const auto& [key, c] : counts) sorted.push_back(c);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  std::vector<double> shares;
  shares.reserve(10);
  std::uint64_t running = 0;
  std::size_t taken = 0;
  for (int decile = 1; decile <= 10; ++decile) {
    const std::size_t upto = (sorted.size() * static_cast<std::size_t>(decile) + 9) / 10;
    while (taken < upto) running += sorted[taken++];
    shares.push_back(static_cast<double>(running) / static_cast<double>(total));
  }
  return shares;
}

Dataset load_csv(const std::filesystem::path& path, std::optional<std::size_t> vocab_cap) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  if (vocab_cap && *vocab_cap == 0) throw ConfigError("vocab cap must be at least 1");
  Dataset out;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) -> ParseError {
    return ParseError(path.string() + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw fail("missing ',' after label");
    const std::string_view label(line.data(), comma);
    Sample s;
    if (label == "0") {
      s.label = 0;
    } else if (label == "1") {
      s.label = 1;
    } else {
      throw fail("label must be 0 or 1, got '" + std::string(label) + "'");
    }
    const char* p = line.data() + comma + 1;
    const char* end = line.data() + line.size();
    while (p < end) {
      if (*p == ' ') {
        ++p;
        continue;
      }
      std::uint64_t id = 0;
      const auto [next, ec] = std::from_chars(p, end, id);
      if (ec != std::errc() || (next < end && *next != ' ')) throw fail("invalid key");
      p = next;
      if (vocab_cap) id = mix64(id) % *vocab_cap + 1;
      s.keys.push_back(EmbeddingKey{id});
    }
    if (s.keys.empty()) throw fail("sample has no keys");
    out.push_back(std::move(s));
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write " + path.string());
  std::string line;
  for (const auto& s : data) {
    line.clear();
    line += s.label ? '1' : '0';
    line += ',';
    for (std::size_t i = 0; i < s.keys.size(); ++i) {
      if (i) line += ' ';
      line += std::to_string(s.keys[i].id);
    }
    line += '\n';
    out << line;
  }
  if (!out) throw ParseError("write failed for " + path.string());
}

std::vector<EmbeddingKey> access_trace(const Dataset& data) {
  std::vector<EmbeddingKey> out;
  for (const auto& s : data) out.insert(out.end(), s.keys.begin(), s.keys.end());
  return out;
}

}  // namespace embcache
