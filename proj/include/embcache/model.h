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

#ifndef EMBCACHE_MODEL_H_
#define EMBCACHE_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "embcache/client.h"
#include "embcache/core.h"
#include "embcache/workload.h"

namespace embcache {

// Dense weights of the logistic scorer over sum-pooled embeddings.
struct DenseParams {
  std::vector<float> u;  // length D
  float b = 0.0F;

  // u uniform in [-1, 1] from (seed, dim), b = 0.
  static DenseParams init(std::size_t dim, std::uint64_t seed);
  // [u..., b], the layout exchanged in dense reductions.
  std::vector<float> pack() const;
  static DenseParams unpack(std::span<const float> packed);

  friend bool operator==(const DenseParams&, const DenseParams&) = default;
};

struct Gradients {
  std::vector<float> dense;             // packed like DenseParams, batch mean
  std::vector<KeyGradient> embeddings;  // one per distinct key, ascending, scaled by 1/batch
  double loss = 0.0;                    // mean binary cross-entropy
};

// Per-sample logit b + u . sum(x_k). Throws LookupError for a key missing
// from `embeddings`, DimensionError on length mismatch.
std::vector<double> logits(std::span<const Sample> batch, const EmbeddingLookup& embeddings,
                           const DenseParams& dense);

// Per-sample sigmoid(logit).
std::vector<double> forward(std::span<const Sample> batch, const EmbeddingLookup& embeddings,
                            const DenseParams& dense);

Gradients backward(std::span<const Sample> batch, std::span<const double> predictions,
                   const EmbeddingLookup& embeddings, const DenseParams& dense);

// Mean binary cross-entropy computed from logits.
double bce_loss(std::span<const double> logits, std::span<const Sample> batch);

// Element-wise mean of one packed gradient per worker, in worker order.
// Throws BarrierError if the number of parts differs from `workers`.
std::vector<float> allreduce_dense(std::span<const std::vector<float>> grads, std::size_t workers);

// params -= eta * packed_gradient.
void apply_dense(DenseParams& params, std::span<const float> packed_gradient, float eta);

// Mann-Whitney AUC, ties counted as 1/2. Throws MetricError unless both
// classes are present, DimensionError on length mismatch.
double auc(std::span<const double> predictions, std::span<const std::uint8_t> labels);

}  // namespace embcache

#endif  // EMBCACHE_MODEL_H_
