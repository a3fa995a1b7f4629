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

#ifndef EMBCACHE_RECORDER_H_
#define EMBCACHE_RECORDER_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "embcache/cache.h"
#include "embcache/client.h"
#include "embcache/server.h"

namespace embcache {

enum class EventType : std::uint8_t { kRead, kWrite, kEvict, kFetch, kClockCheck };

std::string_view event_name(EventType type);

struct RecorderEvent {
  EventType type = EventType::kRead;
  std::uint32_t worker = 0;
  EmbeddingKey key;
  ClockValue start = 0;     // c_s, where known
  ClockValue current = 0;   // c_c
  ClockValue observed = 0;  // c_g the event saw
  std::uint64_t tick = 0;   // position in the total order

  friend bool operator==(const RecorderEvent&, const RecorderEvent&) = default;
};

// CSV: event,worker,key,c_s,c_c,c_g_observed,tick
void write_event_log(std::ostream& out, std::span<const RecorderEvent> events);

struct Violation {
  std::uint64_t tick = 0;
  std::string what;
};

struct ConservationResult {
  std::size_t keys_checked = 0;
  std::size_t mismatched_keys = 0;
  double max_abs_error = 0.0;

  bool ok() const { return mismatched_keys == 0; }
};

// Observes every client of one simulated run and checks the clock
// invariants as events arrive:
//   - at a read, c_c <= c_s + s and c_g_observed <= c_c + s;
//   - c_s never exceeds the server clock, and server clocks never decrease;
//   - at a read of k by worker i, every other worker whose replica of k is
//     valid against the current server clock has |c_c^i - c_c^j| <= 2s.
// It also sums every logged delta per key for the conservation check.
// Single-threaded; simulation backend only.
class Recorder final : public ClientObserver {
 public:
  explicit Recorder(StalenessBound staleness, bool keep_log = true);

  // Server and per-worker caches the cross-replica check inspects. Caches
  // may be null (PS_NoCache mode).
  void attach(const GlobalTable* table, std::vector<const CacheTable*> caches);

  void on_read(std::uint32_t worker, EmbeddingKey key, const ReplicaClocks& clocks) override;
  void on_write(std::uint32_t worker, EmbeddingKey key, const ReplicaClocks& clocks,
                std::span<const float> delta) override;
  void on_fetch(std::uint32_t worker, EmbeddingKey key, ClockValue global) override;
  void on_evict(std::uint32_t worker, const EvictRecord& record) override;
  void on_clock_check(std::uint32_t worker, EmbeddingKey key, ClockValue current, ClockValue global) override;

  std::uint64_t violation_count() const { return violation_count_; }
  // The first violations, capped.
  const std::vector<Violation>& violations() const { return violations_; }
  // Every recorded event of any type.
  std::uint64_t events() const { return tick_; }
  std::uint64_t read_write_events() const { return reads_ + writes_; }
  std::uint64_t reads() const { return reads_; }
  std::uint64_t writes() const { return writes_; }
  std::uint64_t replica_pairs_checked() const { return pairs_checked_; }
  // Largest |c_c^i - c_c^j| seen among valid replica pairs.
  std::uint64_t max_replica_gap() const { return max_gap_; }
  const std::vector<RecorderEvent>& log() const { return log_; }

  // Every row of `table` against init_embedding plus the logged deltas.
  ConservationResult check_conservation(const GlobalTable& table, double tolerance) const;

  void write_log(std::ostream& out) const { write_event_log(out, log_); }

 private:
  void record(EventType type, std::uint32_t worker, EmbeddingKey key, ClockValue start, ClockValue current,
              ClockValue observed);
  void violation(std::string what);
  void check_server_clock(EmbeddingKey key, ClockValue start);

  StalenessBound s_;
  bool keep_log_;
  const GlobalTable* table_ = nullptr;
  std::vector<const CacheTable*> caches_;
  std::vector<RecorderEvent> log_;
  std::vector<Violation> violations_;
  std::uint64_t violation_count_ = 0;
  std::uint64_t tick_ = 0;
  std::uint64_t reads_ = 0;
  std::uint64_t writes_ = 0;
  std::uint64_t pairs_checked_ = 0;
  std::uint64_t max_gap_ = 0;
  std::unordered_map<EmbeddingKey, ClockValue> last_global_;
  std::map<EmbeddingKey, std::vector<double>> delta_sums_;
};

}  // namespace embcache

#endif  // EMBCACHE_RECORDER_H_
