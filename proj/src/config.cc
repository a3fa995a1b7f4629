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

#include "embcache/config.h"

#include <fstream>
#include <set>
#include <string>
#include <type_traits>

#include "embcache/errors.h"

namespace embcache {

using nlohmann::json;

namespace {

// Integer JSON value >= 0, whether stored signed or unsigned.
bool is_count(const json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0); }

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "counts are read as 64-bit integers");

// Reads the fields of one JSON object, rejecting anything left unread.
class Section {
 public:
  Section(const json& value, std::string path) : value_(value), path_(std::move(path)) {
    if (!value_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  const json* find(const char* name) {
    seen_.insert(name);
    const auto it = value_.find(name);
    return it == value_.end() ? nullptr : &*it;
  }

  void read(const char* name, std::uint64_t& out) {
    if (const auto* v = find(name)) {
      if (!is_count(*v)) throw ConfigError(where(name) + " must be a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void read(const char* name, std::uint16_t& out) {
    std::uint64_t tmp = out;
    read(name, tmp);
    if (tmp > 65535) throw ConfigError(where(name) + " must be at most 65535");
    out = static_cast<std::uint16_t>(tmp);
  }
  void read(const char* name, double& out) {
    if (const auto* v = find(name)) {
      if (!v->is_number()) throw ConfigError(where(name) + " must be a number");
      out = v->get<double>();
    }
  }
  void read(const char* name, float& out) {
    double tmp = out;
    read(name, tmp);
    out = static_cast<float>(tmp);
  }
  void read(const char* name, bool& out) {
    if (const auto* v = find(name)) {
      if (!v->is_boolean()) throw ConfigError(where(name) + " must be true or false");
      out = v->get<bool>();
    }
  }
  void read(const char* name, std::string& out) {
    if (const auto* v = find(name)) {
      if (!v->is_string()) throw ConfigError(where(name) + " must be a string");
      out = v->get<std::string>();
    }
  }

  const json* array(const char* name) {
    const auto* v = find(name);
    if (v && !v->is_array()) throw ConfigError(where(name) + " must be an array");
    return v;
  }

  std::string where(const std::string& name) const { return path_ + "." + name; }

  void finish() const {
    for (const auto& [key, unused] : value_.items()) {
      if (!seen_.contains(key)) throw ConfigError("unknown field " + where(key));
    }
  }

 private:
  const json& value_;
  std::string path_;
  std::set<std::string> seen_;
};

void parse_dataset(const json& doc, DatasetSource& out) {
  Section sec(doc, "dataset");
  auto& spec = out.spec;
  sec.read("n_samples", spec.n_samples);
  sec.read("features_per_sample", spec.features_per_sample);
  sec.read("vocab_size", spec.vocab_size);
  sec.read("zipf_alpha", spec.zipf_alpha);
  sec.read("teacher_seed", spec.teacher_seed);
  sec.read("sample_seed", spec.sample_seed);
  sec.read("dim", spec.dim);
  sec.read("teacher_gain", spec.teacher_gain);
  sec.read("holdout_fraction", out.holdout_fraction);
  std::string csv;
  sec.read("csv", csv);
  if (!csv.empty()) out.csv = csv;
  sec.finish();
}

void parse_train(const json& doc, TrainConfig& out) {
  Section sec(doc, "train");
  sec.read("workers", out.workers);
  sec.read("iterations", out.iterations);
  sec.read("batch_size", out.batch_size);
  sec.read("eta", out.eta);
  if (const auto* v = sec.find("staleness")) out.staleness = staleness_from_json(*v);
  sec.read("cache_fraction", out.cache_fraction);
  std::string text(policy_name(out.policy));
  sec.read("policy", text);
  out.policy = parse_policy(text);
  text = schedule_name(out.schedule.kind);
  sec.read("schedule", text);
  out.schedule.kind = parse_schedule(text);
  sec.read("schedule_seed", out.schedule.seed);
  text = mode_name(out.mode);
  sec.read("mode", text);
  out.mode = parse_mode(text);
  sec.read("seed", out.seed);
  sec.read("fused_sync", out.fused_sync);
  sec.read("bound_writeback", out.bound_writeback);
  sec.read("promotion_threshold", out.promotion_threshold);
  sec.read("persistent_frequency", out.persistent_frequency);
  sec.read("prefetch", out.prefetch);
  sec.finish();
}

void parse_transport(const json& doc, TransportConfig& out) {
  Section sec(doc, "transport");
  std::string backend(backend_name(out.backend));
  sec.read("backend", backend);
  out.backend = parse_backend(backend);
  sec.read("host", out.host);
  sec.read("port", out.port);
  sec.read("concurrent", out.concurrent);
  sec.finish();
}

void parse_sweeps(const json& doc, SweepConfig& out) {
  Section sec(doc, "sweeps");
  if (const auto* a = sec.array("cache_sizes")) {
    out.cache_sizes.clear();
    for (const auto& v : *a) {
      if (!v.is_number()) throw ConfigError("sweeps.cache_sizes entries must be numbers");
      out.cache_sizes.push_back(v.get<double>());
    }
  }
  if (const auto* a = sec.array("policies")) {
    out.policies.clear();
    for (const auto& v : *a) {
      if (!v.is_string()) throw ConfigError("sweeps.policies entries must be strings");
      out.policies.push_back(parse_policy(v.get<std::string>()));
    }
  }
  if (const auto* a = sec.array("staleness_values")) {
    out.staleness_values.clear();
    for (const auto& v : *a) out.staleness_values.push_back(staleness_from_json(v));
  }
  if (const auto* a = sec.array("seeds")) {
    out.seeds.clear();
    for (const auto& v : *a) {
      if (!is_count(v)) throw ConfigError("sweeps.seeds entries must be non-negative integers");
      out.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  sec.finish();
}

}  // namespace

json staleness_to_json(StalenessBound s) {
  if (s.is_infinite()) return "inf";
  return s.value();
}

StalenessBound staleness_from_json(const json& value) {
  if (is_count(value)) return StalenessBound(value.get<std::uint64_t>());
  if (value.is_string()) {
    try {
      return StalenessBound::parse(value.get<std::string>());
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    }
  }
  throw ConfigError("staleness must be a non-negative integer or \"inf\"");
}

void ExperimentConfig::validate() const {
  dataset.spec.validate();
  train.validate();
  if (!(dataset.holdout_fraction >= 0.0 && dataset.holdout_fraction < 1.0)) {
    throw ConfigError("dataset.holdout_fraction must lie in [0, 1)");
  }
  if (train.dim != dataset.spec.dim || train.vocab_size != dataset.spec.vocab_size) {
    throw ConfigError("train dimension and vocabulary must match the dataset section");
  }
  if (transport.concurrent) {
    if (transport.backend != Backend::kTcp) throw ConfigError("transport.concurrent needs the tcp backend");
    if (train.schedule.kind != ScheduleKind::kAsyncRandom) {
      throw ConfigError("transport.concurrent needs the async_random schedule");
    }
  }
  if (recorder && transport.backend != Backend::kSim) throw ConfigError("the recorder needs the sim backend");
  for (const double f : sweeps.cache_sizes) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("sweeps.cache_sizes entries must lie in (0, 1]");
  }
  if (sweeps.seeds.empty()) throw ConfigError("sweeps.seeds must not be empty");
  if (output.empty()) throw ConfigError("output must not be empty");
}

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  Section top(doc, "config");
  std::uint64_t version = 0;
  top.read("schema_version", version);
  if (version != static_cast<std::uint64_t>(kSchemaVersion)) {
    throw ConfigError("config.schema_version must be " + std::to_string(kSchemaVersion));
  }
  if (const auto* v = top.find("dataset")) parse_dataset(*v, cfg.dataset);
  if (const auto* v = top.find("train")) parse_train(*v, cfg.train);
  if (const auto* v = top.find("transport")) parse_transport(*v, cfg.transport);
  if (const auto* v = top.find("sweeps")) parse_sweeps(*v, cfg.sweeps);
  top.read("recorder", cfg.recorder);
  std::string output = cfg.output.string();
  top.read("output", output);
  cfg.output = output;
  top.finish();
  cfg.train.dim = cfg.dataset.spec.dim;
  cfg.train.vocab_size = cfg.dataset.spec.vocab_size;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

json config_to_json(const ExperimentConfig& c) {
  const auto& d = c.dataset.spec;
  json dataset = {
      {"n_samples", d.n_samples},
      {"features_per_sample", d.features_per_sample},
      {"vocab_size", d.vocab_size},
      {"zipf_alpha", d.zipf_alpha},
      {"teacher_seed", d.teacher_seed},
      {"sample_seed", d.sample_seed},
      {"dim", d.dim},
      {"teacher_gain", d.teacher_gain},
      {"holdout_fraction", c.dataset.holdout_fraction},
  };
  if (c.dataset.csv) dataset["csv"] = c.dataset.csv->string();
  const auto& t = c.train;
  json train = {
      {"workers", t.workers},
      {"iterations", t.iterations},
      {"batch_size", t.batch_size},
      {"eta", t.eta},
      {"staleness", staleness_to_json(t.staleness)},
      {"cache_fraction", t.cache_fraction},
      {"policy", policy_name(t.policy)},
      {"schedule", schedule_name(t.schedule.kind)},
      {"schedule_seed", t.schedule.seed},
      {"mode", mode_name(t.mode)},
      {"seed", t.seed},
      {"fused_sync", t.fused_sync},
      {"bound_writeback", t.bound_writeback},
      {"promotion_threshold", t.promotion_threshold},
      {"persistent_frequency", t.persistent_frequency},
      {"prefetch", t.prefetch},
  };
  json transport = {
      {"backend", backend_name(c.transport.backend)},
      {"host", c.transport.host},
      {"port", c.transport.port},
      {"concurrent", c.transport.concurrent},
  };
  json policies = json::array();
  for (const auto p : c.sweeps.policies) policies.push_back(policy_name(p));
  json staleness = json::array();
  for (const auto s : c.sweeps.staleness_values) staleness.push_back(staleness_to_json(s));
  json sweeps = {
      {"cache_sizes", c.sweeps.cache_sizes},
      {"policies", policies},
      {"staleness_values", staleness},
      {"seeds", c.sweeps.seeds},
  };
  return json{{"schema_version", kSchemaVersion}, {"dataset", dataset},   {"train", train},
              {"transport", transport},            {"sweeps", sweeps},     {"recorder", c.recorder},
              {"output", c.output.string()}};
}

}  // namespace embcache
