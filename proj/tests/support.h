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

#ifndef EMBCACHE_TESTS_SUPPORT_H_
#define EMBCACHE_TESTS_SUPPORT_H_

#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "embcache/client.h"
#include "embcache/codec.h"
#include "embcache/model.h"
#include "embcache/random.h"
#include "embcache/server.h"
#include "embcache/sim_transport.h"
#include "embcache/trainer.h"

namespace embcache::testing {

// Uniformly chosen message type with random contents.
class RandomMessages {
 public:
  explicit RandomMessages(std::uint64_t seed) : rng_(seed) {}

  Message next() {
    switch (rng_.next_below(12)) {
      case 0: return FetchReq{keys()};
      case 1: return FetchResp{rows()};
      case 2: return EvictReq{records()};
      case 3: return EvictAck{};
      case 4: return ClockCheckReq{pairs()};
      case 5: return ClockCheckResp{pairs()};
      case 6: return SyncReq{records()};
      case 7: return SyncResp{rows()};
      case 8: return DenseReduceReq{static_cast<std::uint32_t>(rng_.next_u64()), floats()};
      case 9: return DenseReduceResp{floats()};
      case 10: return FlushReq{records()};
      default: return FlushAck{};
    }
  }

 private:
  std::size_t count() { return rng_.next_below(6); }
  EmbeddingKey key() { return EmbeddingKey{rng_.next_u64()}; }
  std::vector<float> floats() {
    std::vector<float> v(rng_.next_below(10));
    for (auto& f : v) f = static_cast<float>(rng_.next_double() * 2e4 - 1e4);
    return v;
  }
  std::vector<EmbeddingKey> keys() {
    std::vector<EmbeddingKey> out(count());
    for (auto& k : out) k = key();
    return out;
  }
  std::vector<KeyedVector> rows() {
    std::vector<KeyedVector> out(count());
    for (auto& r : out) r = KeyedVector{key(), floats(), rng_.next_u64()};
    return out;
  }
  std::vector<EvictRecord> records() {
    std::vector<EvictRecord> out(count());
    for (auto& r : out) r = EvictRecord{key(), floats(), rng_.next_u64(), true};
    return out;
  }
  std::vector<KeyClock> pairs() {
    std::vector<KeyClock> out(count());
    for (auto& p : out) p = KeyClock{key(), rng_.next_u64()};
    return out;
  }

  CounterRng rng_;
};

// A small random logistic instance: embeddings, dense weights and a batch.
struct GradInstance {
  std::size_t dim = 0;
  Dataset batch;
  EmbeddingLookup embeddings;
  DenseParams dense;
};

inline GradInstance random_instance(std::uint64_t seed) {
  CounterRng rng(seed, 77);
  GradInstance g;
  g.dim = 1 + rng.next_below(6);
  const auto vocab = 1 + rng.next_below(6);
  const auto batch = 1 + rng.next_below(6);
  auto uniform = [&rng] { return static_cast<float>(rng.next_double() * 2.0 - 1.0); };
  for (std::uint64_t k = 1; k <= vocab; ++k) {
    EmbeddingVector v(g.dim);
    for (auto& x : v) x = uniform();
    g.embeddings.emplace(EmbeddingKey{k}, std::move(v));
  }
  g.dense.u.resize(g.dim);
  for (auto& x : g.dense.u) x = uniform();
  g.dense.b = uniform();
  for (std::size_t i = 0; i < batch; ++i) {
    Sample s;
    for (std::size_t j = 0, n = 1 + rng.next_below(4); j < n; ++j) s.keys.push_back({1 + rng.next_below(vocab)});
    s.label = static_cast<std::uint8_t>(rng.next_below(2));
    g.batch.push_back(std::move(s));
  }
  return g;
}

// Mean binary cross-entropy written out directly in double, with the
// parameters given as one flat vector: every embedding (keys ascending),
// then u, then b.
inline double reference_loss(const GradInstance& g, const std::vector<double>& theta) {
  std::map<std::uint64_t, std::size_t> offset;
  std::size_t next = 0;
  for (const auto& [key, v] : std::map<EmbeddingKey, EmbeddingVector>(g.embeddings.begin(), g.embeddings.end())) {
    offset[key.id] = next;
    next += v.size();
  }
  const std::size_t u_at = next;
  const double b = theta[u_at + g.dim];
  double total = 0.0;
  for (const auto& s : g.batch) {
    double z = b;
    for (std::size_t d = 0; d < g.dim; ++d) {
      double pooled = 0.0;
      for (const auto key : s.keys) pooled += theta[offset.at(key.id) + d];
      z += theta[u_at + d] * pooled;
    }
    const double y = s.label;
    total += std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - y * z;
  }
  return total / static_cast<double>(g.batch.size());
}

// ||analytic - numeric|| / ||numeric|| with central differences of step h.
inline double gradient_check_error(std::uint64_t seed, double h = 1e-3) {
  const auto g = random_instance(seed);
  std::vector<double> theta;
  const std::map<EmbeddingKey, EmbeddingVector> ordered(g.embeddings.begin(), g.embeddings.end());
  for (const auto& [key, v] : ordered) theta.insert(theta.end(), v.begin(), v.end());
  theta.insert(theta.end(), g.dense.u.begin(), g.dense.u.end());
  theta.push_back(g.dense.b);

  std::vector<double> numeric(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    auto plus = theta;
    auto minus = theta;
    plus[i] += h;
    minus[i] -= h;
    numeric[i] = (reference_loss(g, plus) - reference_loss(g, minus)) / (2.0 * h);
  }

  const auto preds = forward(g.batch, g.embeddings, g.dense);
  const auto grads = backward(g.batch, preds, g.embeddings, g.dense);
  std::vector<double> analytic(theta.size(), 0.0);
  std::map<EmbeddingKey, std::size_t> offset;
  std::size_t next = 0;
  for (const auto& [key, v] : ordered) {
    offset[key] = next;
    next += v.size();
  }
  for (const auto& kg : grads.embeddings) {
    for (std::size_t d = 0; d < kg.gradient.size(); ++d) analytic[offset.at(kg.key) + d] = kg.gradient[d];
  }
  for (std::size_t d = 0; d < grads.dense.size(); ++d) analytic[next + d] = grads.dense[d];

  double diff = 0.0;
  double norm = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    norm += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
}

// Drives one cached client through random read/write/prefetch rounds against
// a private server and compares every read with init plus the worker's own
// deltas. Returns a description of the first mismatch.
inline std::optional<std::string> read_my_updates_violation(StalenessBound s, bool bound_writeback, bool prefetch,
                                                            std::uint64_t seed, int rounds = 400,
                                                            std::uint64_t* reads_checked = nullptr) {
  constexpr std::size_t kDim = 4;
  constexpr std::uint64_t kInitSeed = 3;
  constexpr std::uint64_t kKeys = 12;
  ParameterServer server(kDim, kInitSeed, 1);
  SimEndpoint endpoint(server);
  CacheOptions co;
  co.capacity = 6;
  ClientOptions options;
  options.staleness = s;
  options.bound_writeback = bound_writeback;
  CachedClient client(endpoint, CacheTable(kDim, co), options);

  std::map<EmbeddingKey, std::vector<double>> own;
  auto expected = [&](EmbeddingKey key) {
    const auto init = init_embedding(key, kDim, kInitSeed);
    std::vector<double> out(init.begin(), init.end());
    if (auto it = own.find(key); it != own.end()) {
      for (std::size_t i = 0; i < kDim; ++i) out[i] += it->second[i];
    }
    return out;
  };
  auto mismatch = [&](const char* where, int round, EmbeddingKey key, std::span<const float> got)
      -> std::optional<std::string> {
    const auto want = expected(key);
    for (std::size_t i = 0; i < kDim; ++i) {
      if (!(std::abs(got[i] - want[i]) <= 1e-5)) {
        std::ostringstream msg;
        msg << where << " s=" << s.to_string() << " round " << round << " key " << key.id << " element " << i
            << ": got " << got[i] << ", want " << want[i];
        return msg.str();
      }
    }
    return std::nullopt;
  };

  CounterRng rng(seed, 91);
  auto random_keys = [&] {
    std::vector<EmbeddingKey> out;
    for (std::size_t i = 0, n = 1 + rng.next_below(5); i < n; ++i) out.push_back({1 + rng.next_below(kKeys)});
    return out;
  };
  std::vector<EmbeddingKey> next;
  for (int round = 0; round < rounds; ++round) {
    const auto batch = next.empty() ? random_keys() : next;
    for (const auto& [key, vec] : client.read(batch)) {
      if (reads_checked) ++*reads_checked;
      if (auto m = mismatch("read", round, key, vec)) return m;
    }
    std::vector<KeyGradient> grads;
    for (const auto key : batch) {
      if (rng.next_below(3) == 0) continue;
      grads.push_back({key, std::vector<float>(kDim)});
      for (auto& x : grads.back().gradient) x = static_cast<float>(rng.next_double() * 2.0 - 1.0);
    }
    const float eta = 0.25F;
    client.write(grads, eta);
    for (const auto& g : grads) {
      const auto delta = scale_gradient(g.gradient, eta);
      auto& sum = own[g.key];
      if (sum.empty()) sum.assign(kDim, 0.0);
      for (std::size_t i = 0; i < kDim; ++i) sum[i] += delta[i];
    }
    next.clear();
    if (prefetch) {
      next = random_keys();
      client.prefetch(next);
    }
  }
  client.flush();
  for (std::uint64_t id = 1; id <= kKeys; ++id) {
    if (auto m = mismatch("after flush", rounds, EmbeddingKey{id}, server.table().vector_or_init({id}))) return m;
  }
  return std::nullopt;
}

struct ParameterGap {
  // max |a - b| / max |b|, taken separately over the dense weights and over
  // the embedding table; the larger of the two.
  double normwise = 0.0;
  // Largest element-wise |a - b| / max(|a|, |b|).
  double elementwise = 0.0;
};

// Infinite when the two tables hold different keys.
inline ParameterGap parameter_gap(const Trainer& a, const Trainer& b) {
  ParameterGap gap;
  auto block = [&gap](const std::vector<float>& x, const std::vector<float>& y) {
    double diff = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = std::abs(static_cast<double>(x[i]) - y[i]);
      const double m = std::max(std::abs(x[i]), std::abs(y[i]));
      diff = std::max(diff, d);
      scale = std::max(scale, m);
      if (m > 0.0) gap.elementwise = std::max(gap.elementwise, d / m);
    }
    if (scale > 0.0) gap.normwise = std::max(gap.normwise, diff / scale);
  };
  block(a.dense(0).pack(), b.dense(0).pack());
  const auto ta = a.server().table().snapshot();
  const auto tb = b.server().table().snapshot();
  if (ta.size() != tb.size()) return {INFINITY, INFINITY};
  std::vector<float> fa, fb;
  for (std::size_t r = 0; r < ta.size(); ++r) {
    if (ta[r].key != tb[r].key) return {INFINITY, INFINITY};
    fa.insert(fa.end(), ta[r].vector.begin(), ta[r].vector.end());
    fb.insert(fb.end(), tb[r].vector.begin(), tb[r].vector.end());
  }
  block(fa, fb);
  return gap;
}

inline double parameter_difference(const Trainer& a, const Trainer& b) { return parameter_gap(a, b).normwise; }

}  // namespace embcache::testing

#endif  // EMBCACHE_TESTS_SUPPORT_H_
