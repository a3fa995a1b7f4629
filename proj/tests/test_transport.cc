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

#include <chrono>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "embcache/errors.h"
#include "embcache/server.h"
#include "embcache/sim_transport.h"
#include "embcache/tcp_transport.h"

namespace embcache {
namespace {

constexpr std::size_t kDim = 8;

TEST(SimEndpoint, FetchAccounting) {
  ParameterServer server(kDim, 1, 1);
  SimEndpoint ep(server);
  const auto resp = expect<FetchResp>(ep.request(FetchReq{{EmbeddingKey{1}, EmbeddingKey{2}}}));
  EXPECT_EQ(resp.entries.size(), 2U);
  EXPECT_EQ(ep.bytes().received.embedding, 2U * 8U * 4U);
  EXPECT_EQ(ep.bytes().sent.embedding, 0U);
  EXPECT_EQ(ep.round_trips(), 1U);
}

TEST(SimEndpoint, ClockCheckAccounting) {
  ParameterServer server(kDim, 1, 1);
  SimEndpoint ep(server);
  ClockCheckReq req;
  for (std::uint64_t k = 1; k <= 5; ++k) req.pairs.push_back({EmbeddingKey{k}, 0});
  ep.request(FetchReq{{EmbeddingKey{1}, EmbeddingKey{2}, EmbeddingKey{3}, EmbeddingKey{4}, EmbeddingKey{5}}});
  const auto before = ep.bytes();
  ep.request(req);
  EXPECT_EQ(ep.bytes().sent.clock - before.sent.clock, 5U * 16U);
  EXPECT_EQ(ep.bytes().received.clock - before.received.clock, 5U * 16U);
  EXPECT_EQ(ep.bytes().sent.embedding, before.sent.embedding);
  EXPECT_EQ(ep.bytes().received.embedding, before.received.embedding);
}

TEST(SimEndpoint, CountersRepeatable) {
  auto run = [] {
    ParameterServer server(kDim, 4, 1);
    SimEndpoint ep(server);
    for (std::uint64_t k = 1; k < 50; ++k) {
      ep.request(FetchReq{{EmbeddingKey{k}}});
      ep.request(EvictReq{{EvictRecord{EmbeddingKey{k}, std::vector<float>(kDim, 0.5F), k, true}}});
    }
    return ep.bytes();
  };
  EXPECT_EQ(run(), run());
}

TEST(SimEndpoint, ReceiveWithoutRequestIsProtocolError) {
  ParameterServer server(kDim, 1, 1);
  SimEndpoint ep(server);
  EXPECT_THROW(ep.receive(), ProtocolError);
  EXPECT_THROW(ep.send(FetchResp{}), ProtocolError);
}

TEST(SimEndpoint, DenseRoundNeedsEveryWorker) {
  ParameterServer server(kDim, 1, 2);
  SimEndpoint a(server), b(server);
  a.send(DenseReduceReq{0, {2.0F, 0.0F}});
  b.send(DenseReduceReq{1, {0.0F, 2.0F}});
  EXPECT_EQ(expect<DenseReduceResp>(a.receive()).values, (std::vector<float>{1.0F, 1.0F}));
  EXPECT_EQ(expect<DenseReduceResp>(b.receive()).values, (std::vector<float>{1.0F, 1.0F}));
  EXPECT_EQ(a.bytes().sent.dense, 8U);

  a.send(DenseReduceReq{0, {1.0F}});
  EXPECT_THROW(a.receive(), BarrierError);
}

TEST(TcpEndpoint, RoundTripMatchesSim) {
  ParameterServer tcp_ps(kDim, 9, 1);
  ParameterServer sim_ps(kDim, 9, 1);
  TcpServer listener(tcp_ps, "127.0.0.1", 0);
  TcpEndpoint tcp("127.0.0.1", listener.port());
  SimEndpoint sim(sim_ps);
  const std::vector<Message> script{
      FetchReq{{EmbeddingKey{1}, EmbeddingKey{2}}},
      EvictReq{{EvictRecord{EmbeddingKey{1}, std::vector<float>(kDim, 0.25F), 3, true}}},
      ClockCheckReq{{{EmbeddingKey{1}, 0}, {EmbeddingKey{2}, 0}}},
      SyncReq{{EvictRecord{EmbeddingKey{2}, std::vector<float>(kDim, -1.0F), 7, true}}},
      FlushReq{{EvictRecord{EmbeddingKey{1}, std::vector<float>(kDim, 1.0F), 9, true}}},
      DenseReduceReq{0, {1.0F, 2.0F}},
  };
  for (const auto& m : script) EXPECT_EQ(tcp.request(m), sim.request(m));
  EXPECT_EQ(tcp.bytes(), sim.bytes());
  EXPECT_EQ(tcp_ps.table().snapshot(), sim_ps.table().snapshot());
}

TEST(TcpEndpoint, ConcurrentDenseRendezvous) {
  ParameterServer ps(kDim, 1, 3);
  TcpServer listener(ps, "127.0.0.1", 0);
  std::vector<std::vector<float>> results(3);
  std::vector<std::thread> threads;
  for (std::uint32_t w = 0; w < 3; ++w) {
    threads.emplace_back([&, w] {
      TcpEndpoint ep("127.0.0.1", listener.port());
      results[w] = expect<DenseReduceResp>(ep.request(DenseReduceReq{w, {static_cast<float>(3 * w)}})).values;
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& r : results) EXPECT_EQ(r, (std::vector<float>{3.0F}));
}

TEST(TcpEndpoint, BarrierTimeoutClosesConnection) {
  ParameterServer ps(kDim, 1, 2);
  TcpServer listener(ps, "127.0.0.1", 0, std::chrono::milliseconds(50));
  TcpEndpoint ep("127.0.0.1", listener.port());
  EXPECT_THROW(ep.request(DenseReduceReq{0, {1.0F}}), TransportError);
}

TEST(TcpEndpoint, ProtocolErrorClosesConnection) {
  ParameterServer ps(kDim, 1, 1);
  TcpServer listener(ps, "127.0.0.1", 0);
  TcpEndpoint ep("127.0.0.1", listener.port());
  EXPECT_THROW(ep.request(EvictReq{{EvictRecord{EmbeddingKey{1}, std::vector<float>(3), 1, true}}}),
               TransportError);
}

TEST(TcpEndpoint, RefusedConnection) {
  std::uint16_t port = 0;
  {
    ParameterServer ps(kDim, 1, 1);
    TcpServer listener(ps, "127.0.0.1", 0);
    port = listener.port();
  }
  EXPECT_THROW(TcpEndpoint("127.0.0.1", port), TransportError);
}

}  // namespace
}  // namespace embcache
