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
#include <memory>
#include <vector>

#include <gtest/gtest.h>

#include "embcache/client.h"
#include "embcache/errors.h"
#include "embcache/random.h"
#include "embcache/server.h"
#include "embcache/sim_transport.h"
#include "support.h"

namespace embcache {
namespace {

constexpr std::size_t kDim = 4;
constexpr std::uint64_t kSeed = 3;

std::vector<EmbeddingKey> keys(std::initializer_list<std::uint64_t> ids) {
  std::vector<EmbeddingKey> out;
  for (const auto id : ids) out.push_back(EmbeddingKey{id});
  return out;
}

struct EvictCounter : ClientObserver {
  std::vector<EvictRecord> records;
  void on_evict(std::uint32_t, const EvictRecord& r) override { records.push_back(r); }
};

struct Fixture {
  explicit Fixture(ClientOptions options, std::size_t capacity = 16, ClientObserver* observer = nullptr)
      : server(kDim, kSeed, 1), endpoint(server) {
    CacheOptions co;
    co.capacity = capacity;
    client = std::make_unique<CachedClient>(endpoint, CacheTable(kDim, co), options, observer);
  }

  ParameterServer server;
  SimEndpoint endpoint;
  std::unique_ptr<CachedClient> client;
};

ClientOptions with_s(StalenessBound s, bool bound_writeback = true) {
  ClientOptions o;
  o.staleness = s;
  o.bound_writeback = bound_writeback;
  return o;
}

KeyGradient grad(std::uint64_t id, float value) { return {EmbeddingKey{id}, std::vector<float>(kDim, value)}; }

TEST(Dedup, Examples) {
  const auto r = dedup_keys(keys({5, 3, 5, 7}));
  EXPECT_EQ(r.keys, keys({3, 5, 7}));
  EXPECT_EQ(r.multiplicity, (std::vector<std::uint32_t>{1, 2, 1}));
  EXPECT_TRUE(dedup_keys({}).keys.empty());
  EXPECT_EQ(dedup_keys(keys({1, 2, 9})).keys, keys({1, 2, 9}));
}

TEST(CachedRead, ColdMissesOneFetch) {
  Fixture f(with_s(StalenessBound(0)));
  const auto out = f.client->read(keys({1, 2}));
  EXPECT_EQ(out.size(), 2U);
  const auto st = f.client->stats();
  EXPECT_EQ(st.cache_misses, 2U);
  EXPECT_EQ(st.round_trips, 1U);
  EXPECT_EQ(st.embedding_bytes_received, 2U * kDim * 4U);
  for (const auto k : keys({1, 2})) {
    const auto& e = f.client->cache().entry(k);
    EXPECT_EQ(e.start_clock, 0U);
    EXPECT_EQ(e.current_clock, 0U);
    EXPECT_EQ(out.at(k), init_embedding(k, kDim, kSeed));
  }
}

TEST(CachedRead, WarmValidHitMovesClocksOnly) {
  Fixture f(with_s(StalenessBound(5)));
  f.client->read(keys({1, 2}));
  const auto before = f.client->stats();
  f.client->read(keys({1, 2}));
  const auto after = f.client->stats();
  EXPECT_EQ(after.embedding_bytes_received, before.embedding_bytes_received);
  EXPECT_EQ(after.embedding_bytes_sent, before.embedding_bytes_sent);
  EXPECT_EQ(after.clock_bytes - before.clock_bytes, 2U * 2U * 16U);
  EXPECT_EQ(after.cache_hits, 2U);
}

TEST(CachedRead, InfiniteStalenessHitIsLocal) {
  Fixture f(with_s(StalenessBound::infinite()));
  f.client->read(keys({1}));
  const auto rt = f.client->stats().round_trips;
  f.client->read(keys({1}));
  EXPECT_EQ(f.client->stats().round_trips, rt);
}

TEST(CachedRead, LocallyUpdatedEntryInvalidAtZero) {
  // Without the write-time bound check the entry is only synchronized at
  // the next read.
  Fixture f(with_s(StalenessBound(0), false));
  f.client->read(keys({1}));
  f.client->write(std::vector<KeyGradient>{grad(1, 1.0F)}, 0.1F);
  const auto& e = f.client->cache().entry(EmbeddingKey{1});
  EXPECT_EQ(e.current_clock, e.start_clock + 1);
  const auto before = f.client->stats();
  f.client->read(keys({1}));
  const auto after = f.client->stats();
  EXPECT_EQ(after.invalid_hits, 1U);
  EXPECT_EQ(after.round_trips - before.round_trips, 2U);  // clock check, sync
  EXPECT_EQ(f.server.table().clock_of(EmbeddingKey{1}), 1U);
}

TEST(CachedWrite, DuplicateKeySummedOneTick) {
  Fixture f(with_s(StalenessBound(5)));
  f.client->read(keys({4, 4}));
  const KeyGradient g{EmbeddingKey{4}, {1.0F, 2.0F, 0.0F, -1.0F}};
  f.client->write(std::vector<KeyGradient>{g, g}, 0.5F);
  const auto& e = f.client->cache().entry(EmbeddingKey{4});
  EXPECT_EQ(e.pending, (std::vector<float>{-1.0F, -2.0F, 0.0F, 1.0F}));
  EXPECT_EQ(e.current_clock, 1U);
}

TEST(CachedWrite, NoOverflowSendsNothing) {
  Fixture f(with_s(StalenessBound(5)));
  f.client->read(keys({1, 2, 3}));
  const auto before = f.client->stats();
  f.client->write(std::vector<KeyGradient>{grad(1, 1), grad(2, 1), grad(3, 1)}, 0.1F);
  const auto after = f.client->stats();
  EXPECT_EQ(after.embedding_bytes_sent, before.embedding_bytes_sent);
  EXPECT_EQ(after.round_trips, before.round_trips);
}

TEST(CachedWrite, OneVictimOneRecord) {
  EvictCounter counter;
  Fixture f(with_s(StalenessBound(5)), 2, &counter);
  f.client->read(keys({1, 2}));
  f.client->write(std::vector<KeyGradient>{grad(1, 1), grad(2, 1)}, 0.1F);
  f.client->read(keys({3}));
  EXPECT_TRUE(counter.records.empty());
  f.client->write(std::vector<KeyGradient>{grad(3, 1)}, 0.1F);
  ASSERT_EQ(counter.records.size(), 1U);
  EXPECT_EQ(counter.records[0].key, EmbeddingKey{1});
  EXPECT_EQ(f.server.table().clock_of(EmbeddingKey{1}), 1U);
}

TEST(CachedWrite, UnreadKeyRejected) {
  Fixture f(with_s(StalenessBound(5)));
  f.client->read(keys({1}));
  EXPECT_THROW(f.client->write(std::vector<KeyGradient>{grad(2, 1)}, 0.1F), ProtocolError);
}

TEST(CachedWrite, BoundWritebackAtZero) {
  Fixture f(with_s(StalenessBound(0)));
  f.client->read(keys({1}));
  f.client->write(std::vector<KeyGradient>{grad(1, 1)}, 0.1F);
  EXPECT_EQ(f.server.table().clock_of(EmbeddingKey{1}), 1U);
  const auto& e = f.client->cache().entry(EmbeddingKey{1});
  EXPECT_EQ(e.start_clock, 1U);
  EXPECT_FALSE(e.dirty());
}

TEST(CachedFlush, DropsCleanEntries) {
  EvictCounter counter;
  Fixture f(with_s(StalenessBound(10)), 16, &counter);
  f.client->read(keys({1, 2, 3, 4, 5}));
  f.client->write(std::vector<KeyGradient>{grad(1, 1), grad(3, 1), grad(5, 1)}, 0.1F);
  f.client->flush();
  ASSERT_EQ(counter.records.size(), 3U);
  EXPECT_EQ(f.client->cache().size(), 0U);
  for (const auto id : {1U, 3U, 5U}) EXPECT_EQ(f.server.table().clock_of(EmbeddingKey{id}), 1U);
  for (const auto id : {2U, 4U}) EXPECT_EQ(f.server.table().clock_of(EmbeddingKey{id}), 0U);
}

TEST(CachedFlush, EmptyIsNoop) {
  Fixture f(with_s(StalenessBound(0)));
  f.client->flush();
  EXPECT_EQ(f.client->stats().round_trips, 0U);
}

TEST(CachedPrefetch, ReadAfterPrefetchHasNoRounds) {
  for (const auto mode : {PrefetchMode::kAsync, PrefetchMode::kDeferred}) {
    auto options = with_s(StalenessBound(2));
    options.prefetch_mode = mode;
    Fixture f(options, 4);
    f.client->read(keys({1, 2, 3}));
    f.client->write(std::vector<KeyGradient>{grad(1, 1), grad(2, 1)}, 0.1F);
    f.client->prefetch(keys({2, 5, 6, 7}));
    f.client->await_prefetch();
    const auto rt = f.client->stats().round_trips;
    const auto out = f.client->read(keys({2, 5, 6, 7}));
    EXPECT_EQ(out.size(), 4U);
    EXPECT_EQ(f.client->stats().round_trips, rt);
  }
}

TEST(CachedPrefetch, ValidKeysMoveNoEmbeddingBytes) {
  Fixture f(with_s(StalenessBound(3)));
  f.client->read(keys({1, 2}));
  const auto before = f.client->stats();
  f.client->prefetch(keys({1, 2}));
  f.client->await_prefetch();
  const auto after = f.client->stats();
  EXPECT_EQ(after.embedding_bytes_received, before.embedding_bytes_received);
  EXPECT_EQ(after.embedding_bytes_sent, before.embedding_bytes_sent);
}

TEST(ReadMyUpdates, AllStaleness) {
  const StalenessBound bounds[] = {StalenessBound(0), StalenessBound(1), StalenessBound(5), StalenessBound(100),
                                   StalenessBound::infinite()};
  std::uint64_t seed = 1;
  for (const auto s : bounds) {
    for (const bool bound_writeback : {true, false}) {
      for (const bool prefetch : {false, true}) {
        const auto v = testing::read_my_updates_violation(s, bound_writeback, prefetch, seed++);
        EXPECT_FALSE(v.has_value()) << *v;
      }
    }
  }
}

TEST(LazyWriteback, OtherWorkerMissesUpdateAtZero) {
  // Two workers on one server; worker 0 writes key 1, then worker 1 reads it.
  for (const bool bound_writeback : {true, false}) {
    ParameterServer server(kDim, kSeed, 2);
    SimEndpoint e0(server), e1(server);
    CacheOptions co;
    co.capacity = 8;
    auto o0 = with_s(StalenessBound(0), bound_writeback);
    auto o1 = o0;
    o1.worker_id = 1;
    CachedClient c0(e0, CacheTable(kDim, co), o0);
    CachedClient c1(e1, CacheTable(kDim, co), o1);
    c0.read(keys({1}));
    c0.write(std::vector<KeyGradient>{grad(1, 1.0F)}, 1.0F);
    const auto seen = c1.read(keys({1})).at(EmbeddingKey{1});
    const auto init = init_embedding(EmbeddingKey{1}, kDim, kSeed);
    if (bound_writeback) {
      EXPECT_EQ(seen, accumulate(init, std::vector<float>(kDim, -1.0F)));
    } else {
      EXPECT_EQ(seen, init);
    }
  }
}

TEST(DirectClient, FetchesEveryReadAndPushesEveryWrite) {
  ParameterServer server(kDim, kSeed, 1);
  SimEndpoint endpoint(server);
  DirectClient client(endpoint, 0);
  client.read(keys({1, 2, 2}));
  client.write(std::vector<KeyGradient>{grad(1, 1.0F), grad(1, 1.0F)}, 0.5F);
  EXPECT_EQ(server.table().clock_of(EmbeddingKey{1}), 1U);
  const auto v = client.read(keys({1})).at(EmbeddingKey{1});
  EXPECT_EQ(v, accumulate(init_embedding(EmbeddingKey{1}, kDim, kSeed), std::vector<float>(kDim, -1.0F)));
  const auto st = client.stats();
  EXPECT_EQ(st.round_trips, 3U);
  EXPECT_EQ(st.embedding_bytes_received, 3U * kDim * 4U);
  EXPECT_EQ(st.embedding_bytes_sent, 1U * kDim * 4U);
  EXPECT_THROW(client.write(std::vector<KeyGradient>{grad(9, 1.0F)}, 0.5F), ProtocolError);
}

}  // namespace
}  // namespace embcache
