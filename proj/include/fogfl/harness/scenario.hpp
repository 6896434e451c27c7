/*
 * Copyright 2026 The fogfl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Scenario files. The schema is described in docs/scenario.md; every key not
// listed there is rejected.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <toml++/toml.hpp>

#include "fogfl/error.hpp"
#include "fogfl/orchestrator.hpp"
#include "fogfl/selection.hpp"
#include "fogfl/trainer.hpp"

namespace fogfl::harness {

inline constexpr std::int64_t kScenarioSchema = 1;

struct WorkerSpec {
  double cpu_freq_hz = 2.4e9;
  double cpu_avail = 1.0;
  double link_delay_s = 0.002;
  double link_bandwidth_Bps = 12.5e6;  // 100 Mbit/s
};

struct Scenario {
  std::string name = "scenario";
  Mode mode = Mode::Sync;
  std::uint64_t seed = 1;
  std::uint32_t total_rounds = 100;
  std::optional<double> target_accuracy;
  AveragingPolicy policy = AveragingPolicy::SizeWeighted;
  double staleness_lambda = 0.5;
  double quota_fraction = 1.0;
  std::uint32_t local_epochs = 1;
  double aggregation_time_s = 0.05;
  double idle_round_s = 1.0;
  double learning_rate = 0.1;
  double observe_alpha = kDefaultObserveAlpha;
  SelectorConfig selector;
  ServerCalibration calibration;
  PartitionConfig partition;
  TaskSpec task;
  std::vector<WorkerSpec> workers;

  ServerConfig server_config() const {
    ServerConfig c;
    c.mode = mode;
    c.policy = policy;
    c.staleness_lambda = staleness_lambda;
    c.quota_fraction = quota_fraction;
    c.selector = selector;
    c.selector.epochs = local_epochs;
    c.observe_alpha = observe_alpha;
    c.learning_rate = learning_rate;
    c.seed = seed;
    return c;
  }

  /// Throws Error(ValidationError) naming the offending field.
  void validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
      throw Error(Errc::ValidationError, field + ": " + why);
    };
    if (workers.empty()) fail("workers", "at least one worker is required");
    if (partition.batches_per_worker.size() != workers.size()) {
      fail("partition", "lists " + std::to_string(partition.batches_per_worker.size()) +
                            " workers but the scenario has " + std::to_string(workers.size()));
    }
    for (std::size_t i = 0; i < workers.size(); ++i) {
      const auto& w = workers[i];
      const std::string at = "workers[" + std::to_string(i) + "].";
      if (!(w.cpu_freq_hz > 0.0) || !std::isfinite(w.cpu_freq_hz)) fail(at + "cpu_freq_hz", "must be > 0");
      if (!(w.cpu_avail > 0.0 && w.cpu_avail <= 1.0)) fail(at + "cpu_avail", "must lie in (0,1]");
      if (!(w.link_delay_s >= 0.0) || !std::isfinite(w.link_delay_s)) fail(at + "link_delay_s", "must be >= 0");
      if (!(w.link_bandwidth_Bps > 0.0)) fail(at + "link_bandwidth_Bps", "must be > 0");
    }
    if (total_rounds == 0) fail("total_rounds", "must be >= 1");
    if (target_accuracy && !(*target_accuracy >= 0.0 && *target_accuracy <= 1.0)) {
      fail("target_accuracy", "must lie in [0,1]");
    }
    if (!(staleness_lambda > 0.0 && staleness_lambda <= 1.0)) fail("staleness_lambda", "must lie in (0,1]");
    if (!(quota_fraction > 0.0 && quota_fraction <= 1.0)) fail("quota_fraction", "must lie in (0,1]");
    if (local_epochs == 0) fail("local_epochs", "must be >= 1");
    if (!(aggregation_time_s > 0.0)) fail("aggregation_time_s", "must be > 0");
    if (!(idle_round_s > 0.0)) fail("idle_round_s", "must be > 0");
    if (!(learning_rate > 0.0)) fail("learning_rate", "must be > 0");
    if (!(observe_alpha >= 0.0 && observe_alpha <= 1.0)) fail("observe_alpha", "must lie in [0,1]");
    const auto& s = selector;
    if (s.kind == SelectorKind::Random && s.k == 0) fail("selector.k", "must be >= 1");
    if (!(s.rminmax.rmin > 0.0) || !(s.rminmax.rmax >= s.rminmax.rmin)) {
      fail("selector.rmin", "need 0 < rmin <= rmax");
    }
    if (!(s.time_budget.budget >= 0.0)) fail("selector.budget", "must be >= 0");
    if (s.time_budget.r == 0) fail("selector.r", "must be >= 1");
    if (!(s.time_budget.threshold > 0.0)) fail("selector.threshold", "must be > 0");
    if (!(calibration.t_onedata > 0.0)) fail("calibration.t_onedata_s", "must be > 0");
    if (!(calibration.server_cpu_freq > 0.0)) fail("calibration.server_cpu_freq_hz", "must be > 0");
    try {
      PartitionConfig p = partition;
      p.worker_count = static_cast<std::uint32_t>(p.batches_per_worker.size());
      p.validate();
    } catch (const Error& e) {
      fail("partition", e.what());
    }
    try {
      task.validate();
    } catch (const Error& e) {
      fail("task", e.what());
    }
  }
};

namespace detail {

inline void reject_unknown(const toml::table& t, std::string_view where,
                           std::initializer_list<std::string_view> allowed) {
  for (const auto& [k, _] : t) {
    bool ok = false;
    for (auto a : allowed) ok = ok || k.str() == a;
    if (!ok) {
      const std::string prefix = where.empty() ? "" : std::string(where) + ".";
      throw Error(Errc::ValidationError, prefix + std::string(k.str()) + ": unknown key");
    }
  }
}

template <typename T, typename View>
T need(const View& n, const std::string& field) {
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = n.template value<double>()) return *v;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto v = n.as_boolean()) return v->get();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = n.as_string()) return v->get();
  } else {
    if (auto v = n.as_integer()) {
      const auto x = v->get();
      if (x < 0 || static_cast<std::uint64_t>(x) > std::numeric_limits<T>::max()) {
        throw Error(Errc::ValidationError, field + ": out of range");
      }
      return static_cast<T>(x);
    }
  }
  throw Error(Errc::ValidationError, field + ": wrong type");
}

template <typename T, typename Table>
void read_opt(Table& t, std::string_view key, const std::string& field, T& out) {
  if (auto n = t[key]; n) out = need<T>(n, field);
}

}  // namespace detail

inline Scenario parse_scenario(std::string_view text, std::string_view source = "<string>") {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ":" << e.source().begin.line << ": " << e.description();
    throw Error(Errc::ParseError, msg.str());
  }
  using detail::read_opt;
  detail::reject_unknown(root, "",
                         {"schema", "name", "mode", "seed", "total_rounds", "target_accuracy",
                          "aggregation_policy", "staleness_lambda", "quota_fraction",
                          "local_epochs", "aggregation_time_s", "idle_round_s", "learning_rate",
                          "observe_alpha", "selector", "calibration", "partition", "task",
                          "workers"});
  std::int64_t schema = 0;
  if (auto n = root["schema"].as_integer()) schema = n->get();
  if (schema != kScenarioSchema) {
    throw Error(Errc::ValidationError, "schema: expected " + std::to_string(kScenarioSchema));
  }

  Scenario s;
  read_opt(root, "name", "name", s.name);
  std::string mode = "sync";
  read_opt(root, "mode", "mode", mode);
  if (auto m = mode_from_name(mode)) s.mode = *m;
  else throw Error(Errc::ValidationError, "mode: expected sync or async");
  read_opt(root, "seed", "seed", s.seed);
  read_opt(root, "total_rounds", "total_rounds", s.total_rounds);
  if (auto n = root["target_accuracy"]; n) s.target_accuracy = detail::need<double>(n, "target_accuracy");
  std::string policy = "size-weighted";
  read_opt(root, "aggregation_policy", "aggregation_policy", policy);
  if (auto p = policy_from_name(policy)) s.policy = *p;
  else throw Error(Errc::ValidationError, "aggregation_policy: unknown policy " + policy);
  read_opt(root, "staleness_lambda", "staleness_lambda", s.staleness_lambda);
  read_opt(root, "quota_fraction", "quota_fraction", s.quota_fraction);
  read_opt(root, "local_epochs", "local_epochs", s.local_epochs);
  read_opt(root, "aggregation_time_s", "aggregation_time_s", s.aggregation_time_s);
  read_opt(root, "idle_round_s", "idle_round_s", s.idle_round_s);
  read_opt(root, "learning_rate", "learning_rate", s.learning_rate);
  read_opt(root, "observe_alpha", "observe_alpha", s.observe_alpha);

  if (auto sel = root["selector"].as_table()) {
    detail::reject_unknown(*sel, "selector",
                           {"kind", "k", "rmin", "rmax", "literal_eqs", "r", "budget", "threshold"});
    std::string kind = "all";
    read_opt(*sel, "kind", "selector.kind", kind);
    if (auto k = selector_from_name(kind)) s.selector.kind = *k;
    else throw Error(Errc::ValidationError, "selector.kind: unknown selector " + kind);
    read_opt(*sel, "k", "selector.k", s.selector.k);
    read_opt(*sel, "rmin", "selector.rmin", s.selector.rminmax.rmin);
    read_opt(*sel, "rmax", "selector.rmax", s.selector.rminmax.rmax);
    read_opt(*sel, "literal_eqs", "selector.literal_eqs", s.selector.literal_eqs);
    read_opt(*sel, "r", "selector.r", s.selector.time_budget.r);
    read_opt(*sel, "budget", "selector.budget", s.selector.time_budget.budget);
    read_opt(*sel, "threshold", "selector.threshold", s.selector.time_budget.threshold);
  }

  if (auto cal = root["calibration"].as_table()) {
    detail::reject_unknown(*cal, "calibration", {"t_onedata_s", "server_cpu_freq_hz"});
    read_opt(*cal, "t_onedata_s", "calibration.t_onedata_s", s.calibration.t_onedata);
    read_opt(*cal, "server_cpu_freq_hz", "calibration.server_cpu_freq_hz",
             s.calibration.server_cpu_freq);
  }

  if (auto task = root["task"].as_table()) {
    detail::reject_unknown(*task, "task", {"kind", "dim", "classes", "batch_size", "noise", "seed",
                                           "test_examples", "surrogate"});
    std::string kind = "surrogate";
    read_opt(*task, "kind", "task.kind", kind);
    if (kind == "surrogate") s.task.kind = TaskKind::Surrogate;
    else if (kind == "synthetic-classify") s.task.kind = TaskKind::SyntheticClassify;
    else throw Error(Errc::ValidationError, "task.kind: unknown task " + kind);
    read_opt(*task, "dim", "task.dim", s.task.dim);
    read_opt(*task, "classes", "task.classes", s.task.classes);
    read_opt(*task, "batch_size", "task.batch_size", s.task.batch_size);
    read_opt(*task, "noise", "task.noise", s.task.noise);
    read_opt(*task, "seed", "task.seed", s.task.seed);
    read_opt(*task, "test_examples", "task.test_examples", s.task.test_examples);
    if (auto sur = (*task)["surrogate"].as_table()) {
      detail::reject_unknown(*sur, "task.surrogate", {"floor", "asymptote", "work_scale",
                                                      "data_saturation", "staleness_decay"});
      auto& p = s.task.surrogate;
      read_opt(*sur, "floor", "task.surrogate.floor", p.floor);
      read_opt(*sur, "asymptote", "task.surrogate.asymptote", p.asymptote);
      read_opt(*sur, "work_scale", "task.surrogate.work_scale", p.work_scale);
      read_opt(*sur, "data_saturation", "task.surrogate.data_saturation", p.data_saturation);
      read_opt(*sur, "staleness_decay", "task.surrogate.staleness_decay", p.staleness_decay);
    }
  } else {
    s.task.kind = TaskKind::Surrogate;
  }

  if (auto arr = root["workers"].as_array()) {
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string at = "workers[" + std::to_string(i) + "]";
      auto t = arr->get(i)->as_table();
      if (!t) throw Error(Errc::ValidationError, at + ": expected a table");
      detail::reject_unknown(*t, at, {"cpu_freq_hz", "cpu_avail", "link_delay_s", "link_bandwidth_Bps"});
      WorkerSpec w;
      read_opt(*t, "cpu_freq_hz", at + ".cpu_freq_hz", w.cpu_freq_hz);
      read_opt(*t, "cpu_avail", at + ".cpu_avail", w.cpu_avail);
      read_opt(*t, "link_delay_s", at + ".link_delay_s", w.link_delay_s);
      read_opt(*t, "link_bandwidth_Bps", at + ".link_bandwidth_Bps", w.link_bandwidth_Bps);
      s.workers.push_back(w);
    }
  } else if (root.contains("workers")) {
    throw Error(Errc::ValidationError, "workers: expected an array of tables");
  }

  if (auto part = root["partition"].as_table()) {
    detail::reject_unknown(*part, "partition", {"table", "config", "batches_per_worker"});
    if (auto list = (*part)["batches_per_worker"].as_array()) {
      if (part->contains("table") || part->contains("config")) {
        throw Error(Errc::ValidationError, "partition: give either table/config or batches_per_worker");
      }
      for (std::size_t i = 0; i < list->size(); ++i) {
        auto v = list->get(i)->as_integer();
        if (!v || v->get() < 0) {
          throw Error(Errc::ValidationError, "partition.batches_per_worker: non-negative integers only");
        }
        s.partition.batches_per_worker.push_back(static_cast<std::uint32_t>(v->get()));
      }
      s.partition.config_id = 0;
    } else {
      std::uint32_t table = 0, config = 0;
      read_opt(*part, "table", "partition.table", table);
      read_opt(*part, "config", "partition.config", config);
      if (config < 1 || config > 6) throw Error(Errc::ValidationError, "partition.config: must be 1..6");
      if (table == 3) s.partition = table3(config);
      else if (table == 4) s.partition = table4(config);
      else throw Error(Errc::ValidationError, "partition.table: must be 3 or 4");
    }
    s.partition.worker_count = static_cast<std::uint32_t>(s.partition.batches_per_worker.size());
  } else {
    throw Error(Errc::ValidationError, "partition: missing");
  }

  s.validate();
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.string());
}

namespace detail {

inline std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

inline std::string quoted(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

/// Renders a scenario back to TOML; parse_scenario(to_toml(s)) == s.
inline std::string to_toml(const Scenario& s) {
  using detail::fmt_double;
  std::ostringstream o;
  o << "schema = " << kScenarioSchema << "\n"
    << "name = " << detail::quoted(s.name) << "\n"
    << "mode = \"" << mode_name(s.mode) << "\"\n"
    << "seed = " << s.seed << "\n"
    << "total_rounds = " << s.total_rounds << "\n";
  if (s.target_accuracy) o << "target_accuracy = " << fmt_double(*s.target_accuracy) << "\n";
  o << "aggregation_policy = \"" << policy_name(s.policy) << "\"\n"
    << "staleness_lambda = " << fmt_double(s.staleness_lambda) << "\n"
    << "quota_fraction = " << fmt_double(s.quota_fraction) << "\n"
    << "local_epochs = " << s.local_epochs << "\n"
    << "aggregation_time_s = " << fmt_double(s.aggregation_time_s) << "\n"
    << "idle_round_s = " << fmt_double(s.idle_round_s) << "\n"
    << "learning_rate = " << fmt_double(s.learning_rate) << "\n"
    << "observe_alpha = " << fmt_double(s.observe_alpha) << "\n\n";
  const auto& sel = s.selector;
  o << "[selector]\n"
    << "kind = \"" << selector_name(sel.kind) << "\"\n"
    << "k = " << sel.k << "\n"
    << "rmin = " << fmt_double(sel.rminmax.rmin) << "\n"
    << "rmax = " << fmt_double(sel.rminmax.rmax) << "\n"
    << "literal_eqs = " << (sel.literal_eqs ? "true" : "false") << "\n"
    << "r = " << sel.time_budget.r << "\n"
    << "budget = " << fmt_double(sel.time_budget.budget) << "\n"
    << "threshold = " << fmt_double(sel.time_budget.threshold) << "\n\n";
  o << "[calibration]\n"
    << "t_onedata_s = " << fmt_double(s.calibration.t_onedata) << "\n"
    << "server_cpu_freq_hz = " << fmt_double(s.calibration.server_cpu_freq) << "\n\n";
  o << "[partition]\n";
  if (s.partition.config_id != 0 && s.partition.worker_count == 10 &&
      table3(s.partition.config_id).batches_per_worker == s.partition.batches_per_worker) {
    o << "table = 3\nconfig = " << s.partition.config_id << "\n\n";
  } else if (s.partition.config_id != 0 && s.partition.worker_count == 30 &&
             table4(s.partition.config_id).batches_per_worker == s.partition.batches_per_worker) {
    o << "table = 4\nconfig = " << s.partition.config_id << "\n\n";
  } else {
    o << "batches_per_worker = [";
    for (std::size_t i = 0; i < s.partition.batches_per_worker.size(); ++i) {
      o << (i ? ", " : "") << s.partition.batches_per_worker[i];
    }
    o << "]\n\n";
  }
  const auto& t = s.task;
  o << "[task]\n"
    << "kind = \"" << task_kind_name(t.kind) << "\"\n"
    << "dim = " << t.dim << "\n"
    << "classes = " << t.classes << "\n"
    << "batch_size = " << t.batch_size << "\n"
    << "noise = " << fmt_double(t.noise) << "\n"
    << "seed = " << t.seed << "\n"
    << "test_examples = " << t.test_examples << "\n\n"
    << "[task.surrogate]\n"
    << "floor = " << fmt_double(t.surrogate.floor) << "\n"
    << "asymptote = " << fmt_double(t.surrogate.asymptote) << "\n"
    << "work_scale = " << fmt_double(t.surrogate.work_scale) << "\n"
    << "data_saturation = " << fmt_double(t.surrogate.data_saturation) << "\n"
    << "staleness_decay = " << fmt_double(t.surrogate.staleness_decay) << "\n";
  for (const auto& w : s.workers) {
    o << "\n[[workers]]\n"
      << "cpu_freq_hz = " << fmt_double(w.cpu_freq_hz) << "\n"
      << "cpu_avail = " << fmt_double(w.cpu_avail) << "\n"
      << "link_delay_s = " << fmt_double(w.link_delay_s) << "\n"
      << "link_bandwidth_Bps = " << fmt_double(w.link_bandwidth_Bps) << "\n";
  }
  return o.str();
}

}  // namespace fogfl::harness
