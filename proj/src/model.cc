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

#include "embcache/model.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "embcache/errors.h"
#include "embcache/random.h"

namespace embcache {

namespace {
constexpr std::uint64_t kDenseInitStream = 0x64656E'7365ULL;

std::vector<double> pooled_sum(const Sample& sample, const EmbeddingLookup& embeddings, std::size_t dim) {
  std::vector<double> pooled(dim, 0.0);
  for (const auto key : sample.keys) {
    const auto it = embeddings.find(key);
    if (it == embeddings.end()) throw LookupError("no embedding for key " + std::to_string(key.id));
    if (it->second.size() != dim) {
      throw DimensionError("embedding of key " + std::to_string(key.id) + " has " +
                           std::to_string(it->second.size()) + " elements, expected " + std::to_string(dim));
    }
    for (std::size_t i = 0; i < dim; ++i) pooled[i] += it->second[i];
  }
  return pooled;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}
}  // namespace

DenseParams DenseParams::init(std::size_t dim, std::uint64_t seed) {
  DenseParams p;
  CounterRng rng(seed, kDenseInitStream);
  p.u.resize(dim);
  for (auto& v : p.u) v = static_cast<float>(2.0 * rng.next_double() - 1.0);
  return p;
}

std::vector<float> DenseParams::pack() const {
  std::vector<float> out(u);
  out.push_back(b);
  return out;
}

DenseParams DenseParams::unpack(std::span<const float> packed) {
  if (packed.empty()) throw DimensionError("packed dense parameters are empty");
  DenseParams p;
  p.u.assign(packed.begin(), packed.end() - 1);
  p.b = packed.back();
  return p;
}

std::vector<double> logits(std::span<const Sample> batch, const EmbeddingLookup& embeddings,
                           const DenseParams& dense) {
  const auto dim = dense.u.size();
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto& sample : batch) {
    const auto pooled = pooled_sum(sample, embeddings, dim);
    double z = dense.b;
    for (std::size_t i = 0; i < dim; ++i) z += static_cast<double>(dense.u[i]) * pooled[i];
    out.push_back(z);
  }
  return out;
}

std::vector<double> forward(std::span<const Sample> batch, const EmbeddingLookup& embeddings,
                            const DenseParams& dense) {
  auto z = logits(batch, embeddings, dense);
  for (auto& v : z) v = sigmoid(v);
  return z;
}

double bce_loss(std::span<const double> z, std::span<const Sample> batch) {
  if (z.size() != batch.size()) throw DimensionError("logit count does not match batch size");
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    // softplus(z) - y z, written to stay finite for large |z|.
    total += std::max(z[i], 0.0) + std::log1p(std::exp(-std::abs(z[i]))) - batch[i].label * z[i];
  }
  return total / static_cast<double>(batch.size());
}

Gradients backward(std::span<const Sample> batch, std::span<const double> predictions,
                   const EmbeddingLookup& embeddings, const DenseParams& dense) {
  if (predictions.size() != batch.size()) throw DimensionError("prediction count does not match batch size");
  const auto dim = dense.u.size();
  const double inv_batch = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());

  std::vector<double> du(dim, 0.0);
  double db = 0.0;
  double loss = 0.0;
  std::map<EmbeddingKey, std::vector<double>> dx;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto& sample = batch[s];
    const auto pooled = pooled_sum(sample, embeddings, dim);
    const double p = predictions[s];
    const double err = p - sample.label;
    constexpr double kEps = 1e-300;
    loss -= sample.label ? std::log(std::max(p, kEps)) : std::log(std::max(1.0 - p, kEps));
    for (std::size_t i = 0; i < dim; ++i) du[i] += err * pooled[i];
    db += err;
    for (const auto key : sample.keys) {
      auto& g = dx.try_emplace(key, dim, 0.0).first->second;
      for (std::size_t i = 0; i < dim; ++i) g[i] += err * dense.u[i];
    }
  }

  Gradients out;
  out.dense.resize(dim + 1);
  for (std::size_t i = 0; i < dim; ++i) out.dense[i] = static_cast<float>(du[i] * inv_batch);
  out.dense[dim] = static_cast<float>(db * inv_batch);
  out.embeddings.reserve(dx.size());
  for (const auto& [key, g] : dx) {
    KeyGradient kg{key, std::vector<float>(dim)};
    for (std::size_t i = 0; i < dim; ++i) kg.gradient[i] = static_cast<float>(g[i] * inv_batch);
    out.embeddings.push_back(std::move(kg));
  }
  out.loss = loss * inv_batch;
  return out;
}

std::vector<float> allreduce_dense(std::span<const std::vector<float>> grads, std::size_t workers) {
  if (grads.size() != workers) {
    throw BarrierError("dense reduction has " + std::to_string(grads.size()) + " of " + std::to_string(workers) +
                       " contributions");
  }
  return elementwise_mean(grads);
}

void apply_dense(DenseParams& params, std::span<const float> packed_gradient, float eta) {
  if (packed_gradient.size() != params.u.size() + 1) {
    throw DimensionError("dense gradient has " + std::to_string(packed_gradient.size()) + " elements, expected " +
                         std::to_string(params.u.size() + 1));
  }
  for (std::size_t i = 0; i < params.u.size(); ++i) params.u[i] -= eta * packed_gradient[i];
  params.b -= eta * packed_gradient.back();
}

double auc(std::span<const double> predictions, std::span<const std::uint8_t> labels) {
  if (predictions.size() != labels.size()) throw DimensionError("prediction and label counts differ");
  const auto n = predictions.size();
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
  const auto negatives = n - positives;
  if (positives == 0 || negatives == 0) throw MetricError("AUC needs at least one positive and one negative label");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return predictions[a] < predictions[b]; });
  // Sum of midranks of the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && predictions[order[j]] == predictions[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) rank_sum += midrank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives);
  return (rank_sum - p * (p + 1) / 2) / (p * static_cast<double>(negatives));
}

}  // namespace embcache
