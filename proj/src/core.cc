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

#include "embcache/core.h"

#include <algorithm>
#include <cmath>

#include "embcache/errors.h"
#include "embcache/random.h"

namespace embcache {

namespace {
constexpr float kInitRange = 0.01F;
// Stream id separating embedding init from other consumers of the same seed.
constexpr std::uint64_t kInitStream = 0x656D62'696E6974ULL;

void check_same_length(std::size_t a, std::size_t b) {
  if (a != b) {
    throw DimensionError("vector length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}
}  // namespace

std::size_t EmbeddingKeyHash::operator()(EmbeddingKey key) const noexcept {
  return static_cast<std::size_t>(mix64(key.id));
}

std::string StalenessBound::to_string() const {
  return is_infinite() ? "inf" : std::to_string(s_);
}

StalenessBound StalenessBound::parse(const std::string& text) {
  if (text == "inf" || text == "infinite" || text == "infinity") {
    return infinite();
  }
  if (text.empty() || !std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw ParseError("invalid staleness bound '" + text + "'");
  }
  try {
    const auto value = std::stoull(text);
    if (value == kInfinite) {
      return infinite();
    }
    return StalenessBound(value);
  } catch (const std::out_of_range&) {
    throw ParseError("staleness bound out of range '" + text + "'");
  }
}

void accumulate_into(std::span<float> acc, std::span<const float> delta) {
  check_same_length(acc.size(), delta.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    acc[i] += delta[i];
  }
}

UpdateDelta accumulate(std::span<const float> acc, std::span<const float> delta) {
  UpdateDelta out(acc.begin(), acc.end());
  accumulate_into(out, delta);
  return out;
}

UpdateDelta scale_gradient(std::span<const float> gradient, float eta) {
  UpdateDelta out(gradient.size());
  for (std::size_t i = 0; i < gradient.size(); ++i) {
    out[i] = -eta * gradient[i];
  }
  return out;
}

EmbeddingVector init_embedding(EmbeddingKey key, std::size_t dim, std::uint64_t seed) {
  CounterRng rng(hash_combine(seed, kInitStream), key.id);
  EmbeddingVector out(dim);
  for (auto& v : out) {
    // 24 random bits map exactly onto a float grid in [-range, range].
    const auto bits = static_cast<float>(rng.next_u64() >> 40);
    v = (bits * 0x1.0p-23F - 1.0F) * kInitRange;
  }
  return out;
}

std::vector<float> elementwise_mean(std::span<const std::vector<float>> parts) {
  if (parts.empty()) {
    return {};
  }
  const std::size_t n = parts.front().size();
  std::vector<double> sum(n, 0.0);
  for (const auto& part : parts) {
    check_same_length(n, part.size());
    for (std::size_t i = 0; i < n; ++i) {
      sum[i] += part[i];
    }
  }
  std::vector<float> out(n);
  const auto count = static_cast<double>(parts.size());
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<float>(sum[i] / count);
  }
  return out;
}

bool all_finite(std::span<const float> values) {
  return std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); });
}

bool all_zero(std::span<const float> values) {
  return std::all_of(values.begin(), values.end(), [](float v) { return v == 0.0F; });
}

}  // namespace embcache
