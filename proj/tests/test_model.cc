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

#include <cmath>
#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "embcache/errors.h"
#include "embcache/model.h"
#include "support.h"

namespace embcache {
namespace {

DenseParams dense(std::vector<float> u, float b) {
  DenseParams d;
  d.u = std::move(u);
  d.b = b;
  return d;
}

Sample sample(std::vector<std::uint64_t> ids, std::uint8_t label) {
  Sample s;
  for (const auto id : ids) s.keys.push_back(EmbeddingKey{id});
  s.label = label;
  return s;
}

TEST(Forward, ZeroPooledIsHalf) {
  const EmbeddingLookup emb{{EmbeddingKey{1}, {0.0F, 0.0F}}};
  const Dataset batch{sample({1}, 1)};
  EXPECT_DOUBLE_EQ(forward(batch, emb, dense({1.0F, 0.0F}, 0.0F))[0], 0.5);
}

TEST(Forward, LogThree) {
  const EmbeddingLookup emb{{EmbeddingKey{1}, {static_cast<float>(std::log(3.0)), 5.0F}}};
  const Dataset batch{sample({1}, 1)};
  EXPECT_NEAR(forward(batch, emb, dense({1.0F, 0.0F}, 0.0F))[0], 0.75, 1e-7);
}

TEST(Forward, MultiplicityCounts) {
  const EmbeddingLookup emb{{EmbeddingKey{1}, {1.0F, 0.0F}}};
  const Dataset batch{sample({1, 1}, 0)};
  EXPECT_DOUBLE_EQ(logits(batch, emb, dense({1.0F, 0.0F}, 0.0F))[0], 2.0);
}

TEST(Forward, MissingKeyIsLookupError) {
  const EmbeddingLookup emb{{EmbeddingKey{1}, {1.0F, 0.0F}}};
  const Dataset batch{sample({2}, 0)};
  EXPECT_THROW(forward(batch, emb, dense({1.0F, 0.0F}, 0.0F)), LookupError);
}

TEST(Backward, LogisticGradient) {
  const EmbeddingLookup emb{{EmbeddingKey{1}, {0.0F, 0.0F}}};
  const Dataset batch{sample({1}, 1)};
  const auto d = dense({1.0F, 0.0F}, 0.0F);
  const std::vector<double> preds{0.5};
  const auto g = backward(batch, preds, emb, d);
  ASSERT_EQ(g.embeddings.size(), 1U);
  EXPECT_EQ(g.embeddings[0].gradient, (std::vector<float>{-0.5F, 0.0F}));
  // dL/db = yhat - y.
  EXPECT_FLOAT_EQ(g.dense.back(), -0.5F);
}

TEST(Backward, PerfectPredictionHasZeroGradient) {
  const EmbeddingLookup emb{{EmbeddingKey{1}, {0.3F, -0.2F}}, {EmbeddingKey{2}, {1.0F, 1.0F}}};
  const Dataset batch{sample({1, 2}, 1), sample({2}, 0)};
  const std::vector<double> preds{1.0, 0.0};
  const auto g = backward(batch, preds, emb, dense({0.5F, 0.5F}, 0.1F));
  for (const auto x : g.dense) EXPECT_EQ(x, 0.0F);
  for (const auto& kg : g.embeddings) {
    for (const auto x : kg.gradient) EXPECT_EQ(x, 0.0F);
  }
}

TEST(Backward, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    EXPECT_LE(testing::gradient_check_error(seed), 1e-4) << "instance " << seed;
  }
}

TEST(Loss, MatchesReference) {
  const auto g = testing::random_instance(5);
  const auto z = logits(g.batch, g.embeddings, g.dense);
  std::vector<double> theta;
  const std::map<EmbeddingKey, EmbeddingVector> ordered(g.embeddings.begin(), g.embeddings.end());
  for (const auto& [key, v] : ordered) theta.insert(theta.end(), v.begin(), v.end());
  theta.insert(theta.end(), g.dense.u.begin(), g.dense.u.end());
  theta.push_back(g.dense.b);
  EXPECT_NEAR(bce_loss(z, g.batch), testing::reference_loss(g, theta), 1e-9);
}

TEST(Loss, StableForLargeLogits) {
  const Dataset batch{sample({1}, 0), sample({1}, 1)};
  const std::vector<double> z{800.0, -800.0};
  EXPECT_NEAR(bce_loss(z, batch), 800.0, 1e-9);
}

TEST(Auc, Examples) {
  EXPECT_DOUBLE_EQ(auc(std::vector<double>{0.9, 0.1}, std::vector<std::uint8_t>{1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(auc(std::vector<double>{0.5, 0.5}, std::vector<std::uint8_t>{1, 0}), 0.5);
  EXPECT_DOUBLE_EQ(auc(std::vector<double>{0.1, 0.9}, std::vector<std::uint8_t>{1, 0}), 0.0);
  EXPECT_DOUBLE_EQ(auc(std::vector<double>{0.2, 0.4, 0.4, 0.8}, std::vector<std::uint8_t>{0, 1, 0, 1}), 0.875);
}

TEST(Auc, DegenerateLabels) {
  EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<std::uint8_t>{1, 1}), MetricError);
  EXPECT_THROW(auc(std::vector<double>{0.1}, std::vector<std::uint8_t>{1, 0}), DimensionError);
}

TEST(Allreduce, Examples) {
  const std::vector<std::vector<float>> two{{2.0F, 0.0F}, {0.0F, 2.0F}};
  EXPECT_EQ(allreduce_dense(two, 2), (std::vector<float>{1.0F, 1.0F}));
  const std::vector<std::vector<float>> one{{0.3F, -7.0F}};
  EXPECT_EQ(allreduce_dense(one, 1), one[0]);
  const std::vector<std::vector<float>> same(4, std::vector<float>{0.1F, 0.7F});
  EXPECT_EQ(allreduce_dense(same, 4), same[0]);
  EXPECT_THROW(allreduce_dense(two, 3), BarrierError);
}

TEST(DenseParams, PackRoundTrip) {
  const auto d = DenseParams::init(5, 9);
  EXPECT_EQ(d.pack().size(), 6U);
  EXPECT_EQ(DenseParams::unpack(d.pack()), d);
  for (const auto x : d.u) EXPECT_LE(std::abs(x), 1.0F);
  EXPECT_EQ(d.b, 0.0F);
}

TEST(ApplyDense, Step) {
  auto d = dense({1.0F, 2.0F}, 0.5F);
  apply_dense(d, std::vector<float>{1.0F, -1.0F, 2.0F}, 0.5F);
  EXPECT_EQ(d.u, (std::vector<float>{0.5F, 2.5F}));
  EXPECT_EQ(d.b, -0.5F);
}

}  // namespace
}  // namespace embcache
