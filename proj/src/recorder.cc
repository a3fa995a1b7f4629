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

#include "embcache/recorder.h"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace embcache {

namespace {
constexpr std::size_t kMaxKeptViolations = 100;

std::string clocks_text(ClockValue start, ClockValue current, ClockValue observed) {
  return "c_s=" + std::to_string(start) + " c_c=" + std::to_string(current) + " c_g=" + std::to_string(observed);
}
}  // namespace

std::string_view event_name(EventType type) {
  switch (type) {
    case EventType::kRead: return "read";
    case EventType::kWrite: return "write";
    case EventType::kEvict: return "evict";
    case EventType::kFetch: return "fetch";
    case EventType::kClockCheck: return "clock_check";
  }
  return "unknown";
}

Recorder::Recorder(StalenessBound staleness, bool keep_log) : s_(staleness), keep_log_(keep_log) {}

void Recorder::attach(const GlobalTable* table, std::vector<const CacheTable*> caches) {
  table_ = table;
  caches_ = std::move(caches);
}

void Recorder::record(EventType type, std::uint32_t worker, EmbeddingKey key, ClockValue start, ClockValue current,
                      ClockValue observed) {
  ++tick_;
  if (keep_log_) log_.push_back(RecorderEvent{type, worker, key, start, current, observed, tick_});
}

void Recorder::violation(std::string what) {
  ++violation_count_;
  if (violations_.size() < kMaxKeptViolations) violations_.push_back({tick_, std::move(what)});
}

void Recorder::check_server_clock(EmbeddingKey key, ClockValue start) {
  if (!table_) return;
  const auto global = table_->clock_of(key);
  if (!global) {
    violation("key " + std::to_string(key.id) + " read but absent at the server");
    return;
  }
  if (start > *global) {
    violation("key " + std::to_string(key.id) + " has c_s=" + std::to_string(start) + " above server c_g=" +
              std::to_string(*global));
  }
  auto [it, inserted] = last_global_.try_emplace(key, *global);
  if (!inserted) {
    if (*global < it->second) {
      violation("server clock of key " + std::to_string(key.id) + " went back from " + std::to_string(it->second) +
                " to " + std::to_string(*global));
    }
    it->second = *global;
  }
}

void Recorder::on_read(std::uint32_t worker, EmbeddingKey key, const ReplicaClocks& clocks) {
  record(EventType::kRead, worker, key, clocks.start, clocks.current, clocks.observed_global);
  ++reads_;
  check_server_clock(key, clocks.start);
  if (s_.is_infinite()) return;

  if (clocks.current > s_.add_to(clocks.start)) {
    violation("worker " + std::to_string(worker) + " read key " + std::to_string(key.id) + " with c_c > c_s + s (" +
              clocks_text(clocks.start, clocks.current, clocks.observed_global) + ")");
  }
  if (clocks.observed_global > s_.add_to(clocks.current)) {
    violation("worker " + std::to_string(worker) + " read key " + std::to_string(key.id) + " with c_g > c_c + s (" +
              clocks_text(clocks.start, clocks.current, clocks.observed_global) + ")");
  }

  if (!table_ || worker >= caches_.size() || !caches_[worker]) return;
  const auto global = table_->clock_of(key);
  if (!global) return;
  const auto limit = 2 * s_.value();
  for (std::size_t j = 0; j < caches_.size(); ++j) {
    if (j == worker || !caches_[j]) continue;
    const auto* other = caches_[j]->try_entry(key);
    if (!other || !caches_[j]->check_valid(key, s_, *global)) continue;
    ++pairs_checked_;
    const auto a = clocks.current;
    const auto b = other->current_clock;
    const auto gap = a > b ? a - b : b - a;
    max_gap_ = std::max(max_gap_, gap);
    if (gap > limit) {
      violation("key " + std::to_string(key.id) + ": workers " + std::to_string(worker) + " and " +
                std::to_string(j) + " hold valid replicas at c_c " + std::to_string(a) + " and " +
                std::to_string(b) + ", more than 2s apart");
    }
  }
}

void Recorder::on_write(std::uint32_t worker, EmbeddingKey key, const ReplicaClocks& clocks,
                        std::span<const float> delta) {
  record(EventType::kWrite, worker, key, clocks.start, clocks.current, clocks.observed_global);
  ++writes_;
  auto& sum = delta_sums_[key];
  if (sum.empty()) sum.assign(delta.size(), 0.0);
  for (std::size_t i = 0; i < delta.size() && i < sum.size(); ++i) sum[i] += delta[i];
}

void Recorder::on_fetch(std::uint32_t worker, EmbeddingKey key, ClockValue global) {
  record(EventType::kFetch, worker, key, global, global, global);
}

void Recorder::on_evict(std::uint32_t worker, const EvictRecord& record_in) {
  record(EventType::kEvict, worker, record_in.key, 0, record_in.clock, 0);
}

void Recorder::on_clock_check(std::uint32_t worker, EmbeddingKey key, ClockValue current, ClockValue global) {
  record(EventType::kClockCheck, worker, key, 0, current, global);
}

ConservationResult Recorder::check_conservation(const GlobalTable& table, double tolerance) const {
  ConservationResult out;
  const auto rows = table.snapshot();
  std::size_t with_deltas = 0;
  for (const auto& row : rows) {
    ++out.keys_checked;
    const auto init = init_embedding(row.key, table.dim(), table.init_seed());
    const auto it = delta_sums_.find(row.key);
    if (it != delta_sums_.end()) ++with_deltas;
    bool bad = false;
    for (std::size_t i = 0; i < row.vector.size(); ++i) {
      double expected = init[i];
      if (it != delta_sums_.end()) expected += it->second.at(i);
      const double err = std::abs(static_cast<double>(row.vector[i]) - expected);
      out.max_abs_error = std::max(out.max_abs_error, err);
      if (!(err <= tolerance)) bad = true;
    }
    if (bad) ++out.mismatched_keys;
  }
  // Updates to keys the server never saw.
  out.mismatched_keys += delta_sums_.size() - with_deltas;
  return out;
}

void write_event_log(std::ostream& out, std::span<const RecorderEvent> events) {
  out << "event,worker,key,c_s,c_c,c_g_observed,tick\n";
  for (const auto& e : events) {
    out << event_name(e.type) << ',' << e.worker << ',' << e.key.id << ',' << e.start << ',' << e.current << ','
        << e.observed << ',' << e.tick << '\n';
  }
}

}  // namespace embcache
