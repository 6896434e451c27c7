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

// Worker selection policies and the timing model they run on.
//
// Every policy sees workers through two numbers: t_one (seconds for one epoch
// over the worker's data) and t_transmit (seconds for one weight round trip).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fogfl/core.hpp"
#include "fogfl/error.hpp"

namespace fogfl {

struct ServerCalibration {
  double t_onedata = 0.5;        // seconds for the server to train one batch
  double server_cpu_freq = 2.4e9;

  void validate() const {
    if (!(t_onedata > 0.0) || !(server_cpu_freq > 0.0)) {
      throw Error(Errc::InvalidProfile, "calibration values must be > 0");
    }
  }
};

/// t_onedata * (f_server / (f_worker * avail_worker)) * N_worker
inline double estimate_t_one(const WorkerProfile& p, const ServerCalibration& c) {
  p.validate();
  c.validate();
  return c.t_onedata * (c.server_cpu_freq / (p.cpu_freq * p.cpu_avail)) *
         static_cast<double>(p.data_batches);
}

struct RMinRMaxState {
  double rmin = 5.0;
  double rmax = 5.0;
  friend bool operator==(const RMinRMaxState&, const RMinRMaxState&) = default;
};

struct TimeBudgetState {
  double budget = 0.0;     // seconds
  std::uint32_t r = 1;     // epochs per round
  double threshold = 0.005;
  friend bool operator==(const TimeBudgetState&, const TimeBudgetState&) = default;
};

class AccuracyTrace {
 public:
  void push(std::uint32_t round, double accuracy) {
    if (!history_.empty() && round <= history_.back().first) {
      throw Error(Errc::InvalidArgument, "trace rounds must strictly increase");
    }
    if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
      throw Error(Errc::InvalidAccuracy, "accuracy must lie in [0,1]");
    }
    history_.emplace_back(round, accuracy);
  }

  /// Accuracy of the latest round, 0 before any evaluation.
  double last() const { return history_.empty() ? 0.0 : history_.back().second; }
  bool empty() const { return history_.empty(); }
  const std::vector<std::pair<std::uint32_t, double>>& history() const { return history_; }

 private:
  std::vector<std::pair<std::uint32_t, double>> history_;
};

namespace detail {

inline void check_accuracy(double a) {
  if (!(a >= 0.0 && a <= 1.0)) throw Error(Errc::InvalidAccuracy, "accuracy must lie in [0,1]");
}

inline void check_nonempty(std::span<const WorkerProfile> w) {
  if (w.empty()) throw Error(Errc::EmptyWorkerSet, "no workers to select from");
}

inline std::vector<WorkerId> sorted_ids(std::vector<WorkerId> ids) {
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace detail

struct RMinMaxSelection {
  std::vector<WorkerId> selected;  // ascending id
  double t_minimum = 0.0;
};

/// Band selection. T_min = t_one*rmin + tx, T_max = t_one*rmax + tx,
/// T_minimum = min T_max. Keeps {T_min <= T_minimum}; `literal` flips the
/// comparison to >=.
inline RMinMaxSelection select_rminmax(std::span<const WorkerProfile> workers,
                                       const RMinRMaxState& st, bool literal = false) {
  detail::check_nonempty(workers);
  double t_minimum = std::numeric_limits<double>::infinity();
  for (const auto& w : workers) t_minimum = std::min(t_minimum, w.t_one * st.rmax + w.t_transmit);
  RMinMaxSelection out{{}, t_minimum};
  for (const auto& w : workers) {
    const double t_min = w.t_one * st.rmin + w.t_transmit;
    if (literal ? t_min >= t_minimum : t_min <= t_minimum) out.selected.push_back(w.worker_id);
  }
  out.selected = detail::sorted_ids(std::move(out.selected));
  return out;
}

/// Epochs for a selected worker: as many as fit before T_minimum, kept
/// within [rmin, rmax] rounded to whole epochs and never below 1.
inline std::uint32_t rminmax_epochs(const WorkerProfile& w, const RMinRMaxState& st,
                                    double t_minimum) {
  const double lo = std::max(1.0, std::ceil(st.rmin - 1e-9));
  const double hi = std::max(lo, std::floor(st.rmax + 1e-9));
  double fit = hi;
  if (w.t_one > 0.0) fit = std::floor((t_minimum - w.t_transmit) / w.t_one + 1e-9);
  return static_cast<std::uint32_t>(std::clamp(fit, lo, hi));
}

inline constexpr double kRMinFloor = 1e-6;

/// rmin *= (prev+1)/(cur+1), rmax *= (cur+1)/(prev+1). `literal` swaps the
/// two factors. Afterwards rmin >= 1e-6 and rmin <= rmax.
inline RMinRMaxState update_rminmax(const RMinRMaxState& st, double acc_prev, double acc_cur,
                                    bool literal = false) {
  detail::check_accuracy(acc_prev);
  detail::check_accuracy(acc_cur);
  const double down = (acc_prev + 1.0) / (acc_cur + 1.0);
  const double up = (acc_cur + 1.0) / (acc_prev + 1.0);
  RMinRMaxState next{st.rmin * (literal ? up : down), st.rmax * (literal ? down : up)};
  next.rmin = std::max(next.rmin, kRMinFloor);
  next.rmax = std::max(next.rmax, next.rmin);
  return next;
}

inline double t_total(const WorkerProfile& w, std::uint32_t r) {
  return w.t_one * static_cast<double>(r) + w.t_transmit;
}

/// Keeps workers with t_one*r + tx <= budget. May be empty.
inline std::vector<WorkerId> select_timebased(std::span<const WorkerProfile> workers,
                                              const TimeBudgetState& st) {
  detail::check_nonempty(workers);
  std::vector<WorkerId> out;
  for (const auto& w : workers) {
    if (t_total(w, st.r) <= st.budget) out.push_back(w.worker_id);
  }
  return detail::sorted_ids(std::move(out));
}

/// On a stall (gain below threshold) the budget becomes the smallest T_total
/// among `unselected`, and never shrinks.
inline TimeBudgetState update_time_budget(const TimeBudgetState& st,
                                          std::span<const WorkerProfile> unselected,
                                          double acc_prev, double acc_cur) {
  detail::check_accuracy(acc_prev);
  detail::check_accuracy(acc_cur);
  TimeBudgetState next = st;
  if (acc_cur - acc_prev < st.threshold && !unselected.empty()) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& w : unselected) m = std::min(m, t_total(w, st.r));
    next.budget = std::max(st.budget, m);
  }
  return next;
}

/// Uniform k-subset, reproducible from `seed`.
inline std::vector<WorkerId> select_random(std::span<const WorkerProfile> workers, std::size_t k,
                                           std::uint64_t seed) {
  if (k < 1 || k > workers.size()) throw Error(Errc::InvalidK, "k must lie in [1, |workers|]");
  std::vector<WorkerId> ids;
  ids.reserve(workers.size());
  for (const auto& w : workers) ids.push_back(w.worker_id);
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  std::vector<WorkerId> out;
  std::sample(ids.begin(), ids.end(), std::back_inserter(out), k, rng);
  return out;
}

inline constexpr double kDefaultObserveAlpha = 0.5;

/// Blends measured timings into the profile: new = (1-alpha)*old + alpha*measured.
inline WorkerProfile record_observation(WorkerProfile p, double measured_train,
                                        double measured_transmit,
                                        double alpha = kDefaultObserveAlpha) {
  if (!(measured_train >= 0.0) || !(measured_transmit >= 0.0)) {
    throw Error(Errc::InvalidArgument, "measurements must be >= 0");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::InvalidArgument, "alpha must lie in [0,1]");
  p.t_one = (1.0 - alpha) * p.t_one + alpha * measured_train;
  p.t_transmit = (1.0 - alpha) * p.t_transmit + alpha * measured_transmit;
  p.last_measured_train = measured_train;
  p.last_measured_transmit = measured_transmit;
  return p;
}

// ---- policy front end used by the server ----------------------------------------

enum class SelectorKind { All, Random, RMinMax, TimeBased };

inline constexpr std::string_view selector_name(SelectorKind k) {
  switch (k) {
    case SelectorKind::All: return "all";
    case SelectorKind::Random: return "random";
    case SelectorKind::RMinMax: return "rminmax";
    case SelectorKind::TimeBased: return "timebased";
  }
  return "";
}

inline std::optional<SelectorKind> selector_from_name(std::string_view s) {
  for (auto k : {SelectorKind::All, SelectorKind::Random, SelectorKind::RMinMax,
                 SelectorKind::TimeBased}) {
    if (selector_name(k) == s) return k;
  }
  return std::nullopt;
}

struct SelectorConfig {
  SelectorKind kind = SelectorKind::All;
  std::uint32_t k = 5;
  RMinRMaxState rminmax{};
  bool literal_eqs = false;
  TimeBudgetState time_budget{};
  std::uint32_t epochs = 1;  // per-round epochs for all/random
};

struct Assignment {
  WorkerId worker;
  std::uint32_t epochs = 1;
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// Stateful wrapper owned by the server's control loop.
class Selector {
 public:
  Selector(SelectorConfig cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {}

  const SelectorConfig& config() const noexcept { return cfg_; }
  const RMinRMaxState& rminmax() const noexcept { return cfg_.rminmax; }
  const TimeBudgetState& time_budget() const noexcept { return cfg_.time_budget; }

  /// Picks among `idle` for control round `round`. Result ascending by id.
  std::vector<Assignment> select(std::span<const WorkerProfile> idle, std::uint32_t round) const {
    std::vector<Assignment> out;
    if (idle.empty()) return out;
    switch (cfg_.kind) {
      case SelectorKind::All:
        for (const auto& w : idle) out.push_back({w.worker_id, cfg_.epochs});
        break;
      case SelectorKind::Random: {
        const std::size_t k = std::min<std::size_t>(cfg_.k, idle.size());
        for (auto id : select_random(idle, k, mix(seed_, round))) out.push_back({id, cfg_.epochs});
        break;
      }
      case SelectorKind::RMinMax: {
        const auto sel = select_rminmax(idle, cfg_.rminmax, cfg_.literal_eqs);
        for (auto id : sel.selected) {
          const auto& w = *std::find_if(idle.begin(), idle.end(),
                                        [&](const WorkerProfile& p) { return p.worker_id == id; });
          out.push_back({id, rminmax_epochs(w, cfg_.rminmax, sel.t_minimum)});
        }
        break;
      }
      case SelectorKind::TimeBased:
        for (auto id : select_timebased(idle, cfg_.time_budget)) {
          out.push_back({id, cfg_.time_budget.r});
        }
        break;
    }
    std::sort(out.begin(), out.end(),
              [](const Assignment& a, const Assignment& b) { return a.worker < b.worker; });
    return out;
  }

  /// Feeds one evaluation back. `eligible` is every worker that could ever be picked.
  void update(std::span<const WorkerProfile> eligible, double acc_prev, double acc_cur) {
    if (cfg_.kind == SelectorKind::RMinMax) {
      cfg_.rminmax = update_rminmax(cfg_.rminmax, acc_prev, acc_cur, cfg_.literal_eqs);
    } else if (cfg_.kind == SelectorKind::TimeBased) {
      std::vector<WorkerProfile> outside;
      for (const auto& w : eligible) {
        if (t_total(w, cfg_.time_budget.r) > cfg_.time_budget.budget) outside.push_back(w);
      }
      cfg_.time_budget = update_time_budget(cfg_.time_budget, outside, acc_prev, acc_cur);
    }
  }

  std::string state_string() const {
    char buf[96];
    switch (cfg_.kind) {
      case SelectorKind::All: return "all";
      case SelectorKind::Random:
        std::snprintf(buf, sizeof buf, "k=%u", cfg_.k);
        return buf;
      case SelectorKind::RMinMax:
        std::snprintf(buf, sizeof buf, "rmin=%.6g;rmax=%.6g", cfg_.rminmax.rmin, cfg_.rminmax.rmax);
        return buf;
      case SelectorKind::TimeBased:
        std::snprintf(buf, sizeof buf, "budget=%.6g;r=%u", cfg_.time_budget.budget,
                      cfg_.time_budget.r);
        return buf;
    }
    return "";
  }

 private:
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t round) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (round + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  SelectorConfig cfg_;
  std::uint64_t seed_;
};

}  // namespace fogfl
