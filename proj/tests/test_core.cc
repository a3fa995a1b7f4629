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
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "embcache/core.h"
#include "embcache/errors.h"
#include "embcache/random.h"

namespace embcache {
namespace {

TEST(Accumulate, ElementWise) {
  const std::vector<float> a{1.0F, 2.0F};
  const std::vector<float> b{0.5F, -1.0F};
  EXPECT_EQ(accumulate(a, b), (std::vector<float>{1.5F, 1.0F}));
}

TEST(Accumulate, ZeroIsIdentity) {
  const std::vector<float> zero(2, 0.0F);
  const std::vector<float> d{0.25F, -3.5F};
  EXPECT_EQ(accumulate(zero, d), d);
}

TEST(Accumulate, CommutesBitwise) {
  CounterRng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<float> a(8), b(8);
    for (auto& v : a) v = static_cast<float>(rng.next_double() * 200.0 - 100.0);
    for (auto& v : b) v = static_cast<float>(rng.next_double() * 2e-3 - 1e-3);
    EXPECT_EQ(accumulate(a, b), accumulate(b, a));
  }
}

TEST(Accumulate, LengthMismatchThrows) {
  const std::vector<float> a(3), b(4);
  EXPECT_THROW(accumulate(a, b), DimensionError);
  std::vector<float> acc(2);
  EXPECT_THROW(accumulate_into(acc, b), DimensionError);
}

TEST(ScaleGradient, NegatesAndScales) {
  const std::vector<float> g{1.0F, -2.0F};
  EXPECT_EQ(scale_gradient(g, 0.5F), (std::vector<float>{-0.5F, 1.0F}));
}

TEST(InitEmbedding, Deterministic) {
  EXPECT_EQ(init_embedding(EmbeddingKey{42}, 16, 9), init_embedding(EmbeddingKey{42}, 16, 9));
  EXPECT_NE(init_embedding(EmbeddingKey{42}, 16, 9), init_embedding(EmbeddingKey{42}, 16, 10));
}

TEST(InitEmbedding, WithinRange) {
  for (std::uint64_t k = 0; k < 2000; ++k) {
    for (const float e : init_embedding(EmbeddingKey{k}, 8, 3)) {
      EXPECT_LE(std::abs(e), 0.01F);
    }
  }
}

TEST(InitEmbedding, DistinctKeysDiffer) {
  std::set<std::vector<float>> seen;
  for (std::uint64_t k = 1; k <= 10'000; ++k) seen.insert(init_embedding(EmbeddingKey{k}, 8, 1));
  EXPECT_EQ(seen.size(), 10'000U);
}

TEST(StalenessBound, ParseAndPrint) {
  EXPECT_EQ(StalenessBound::parse("0"), StalenessBound(0));
  EXPECT_EQ(StalenessBound::parse("100"), StalenessBound(100));
  EXPECT_TRUE(StalenessBound::parse("inf").is_infinite());
  EXPECT_TRUE(StalenessBound::parse("infinity").is_infinite());
  EXPECT_EQ(StalenessBound::infinite().to_string(), "inf");
  EXPECT_EQ(StalenessBound(5).to_string(), "5");
  EXPECT_THROW(StalenessBound::parse("-1"), ParseError);
  EXPECT_THROW(StalenessBound::parse("abc"), ParseError);
}

TEST(StalenessBound, AddSaturates) {
  EXPECT_EQ(StalenessBound(3).add_to(4), 7U);
  EXPECT_EQ(StalenessBound::infinite().add_to(4), StalenessBound::infinite().value());
}

TEST(ElementwiseMean, InOrder) {
  const std::vector<std::vector<float>> parts{{2.0F, 0.0F}, {0.0F, 2.0F}};
  EXPECT_EQ(elementwise_mean(parts), (std::vector<float>{1.0F, 1.0F}));
}

TEST(CounterRng, PositionIndependent) {
  CounterRng a(5, 2);
  CounterRng b(5, 2);
  EXPECT_EQ(a.next_u64(), b.next_u64());
  CounterRng c(5, 3);
  EXPECT_NE(CounterRng(5, 2).next_u64(), c.next_u64());
  for (int i = 0; i < 1000; ++i) {
    const double u = a.next_double();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(a.next_below(7), 7U);
  }
}

}  // namespace
}  // namespace embcache
