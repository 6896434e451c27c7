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

// Aggregation server state machine. It knows nothing about clocks or
// sockets: a driver (the discrete-event simulator or the live socket loop)
// tells it what happened and asks what to do next. Both drivers therefore
// make identical decisions for identical event sequences.
//
// One control round:
//
//   begin_round()             pick idle workers, mark them training
//   on_training_done(w, ...)  classify the response
//   deposit(w, weights)       fetched weights land in the inbox
//   should_aggregate()        barrier reached?
//   begin_aggregation()       freeze the inbox
//   finish_aggregation()      merge, version += 1
//   evaluate_and_update()     score, feed the selector, emit a RoundRecord
//
// Sync rounds close their barrier once `quota` responses were accepted;
// later responses of that round are discarded unread. Async rounds aggregate
// whatever is in the inbox; responses that land while an aggregation runs
// wait for the next one.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fogfl/core.hpp"
#include "fogfl/error.hpp"
#include "fogfl/selection.hpp"
#include "fogfl/trainer.hpp"

namespace fogfl {

enum class Mode { Sync, Async };

inline constexpr std::string_view mode_name(Mode m) { return m == Mode::Sync ? "sync" : "async"; }

inline std::optional<Mode> mode_from_name(std::string_view s) {
  if (s == "sync") return Mode::Sync;
  if (s == "async") return Mode::Async;
  return std::nullopt;
}

inline constexpr std::string_view policy_name(AveragingPolicy p) {
  switch (p) {
    case AveragingPolicy::Uniform: return "uniform";
    case AveragingPolicy::SizeWeighted: return "size-weighted";
    case AveragingPolicy::StalenessDiscounted: return "staleness-discounted";
  }
  return "";
}

inline std::optional<AveragingPolicy> policy_from_name(std::string_view s) {
  for (auto p : {AveragingPolicy::Uniform, AveragingPolicy::SizeWeighted,
                 AveragingPolicy::StalenessDiscounted}) {
    if (policy_name(p) == s) return p;
  }
  return std::nullopt;
}

enum class Verdict { AcceptNow, DiscardStale, BufferNext };

inline constexpr std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::AcceptNow: return "accept-now";
    case Verdict::DiscardStale: return "discard-stale";
    case Verdict::BufferNext: return "buffer-next";
  }
  return "";
}

enum class WorkerStatus { Idle, Training, Reporting };

struct ServerConfig {
  Mode mode = Mode::Sync;
  AveragingPolicy policy = AveragingPolicy::SizeWeighted;
  double staleness_lambda = 0.5;
  double quota_fraction = 1.0;   // share of the dispatched workers a sync round waits for
  SelectorConfig selector;
  double observe_alpha = kDefaultObserveAlpha;
  double learning_rate = 0.1;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(quota_fraction > 0.0 && quota_fraction <= 1.0)) {
      throw Error(Errc::InvalidConfig, "quota_fraction must lie in (0,1]");
    }
    if (!(staleness_lambda > 0.0 && staleness_lambda <= 1.0)) {
      throw Error(Errc::InvalidLambda, "staleness_lambda must lie in (0,1]");
    }
    if (!(observe_alpha >= 0.0 && observe_alpha <= 1.0)) {
      throw Error(Errc::InvalidConfig, "observe_alpha must lie in [0,1]");
    }
    if (!(learning_rate > 0.0)) throw Error(Errc::InvalidConfig, "learning_rate must be > 0");
  }
};

struct RosterEntry {
  RemoteModelRef ref;
  WorkerProfile profile;
  WorkerStatus status = WorkerStatus::Idle;
  std::uint32_t round = 0;   // control round of the current dispatch
  std::uint32_t epochs = 0;
};

/// What one closed control round did.
struct RoundRecord {
  std::uint32_t round = 0;
  std::uint32_t version = 0;  // server version after the round
  double accuracy = 0.0;
  std::uint32_t selected = 0;
  std::uint32_t aggregated = 0;
  std::uint32_t discarded_stale = 0;
  std::string selector_state;
  std::vector<WorkerId> aggregated_ids;  // ascending
};

class AggregationServer {
 public:
  AggregationServer(ServerConfig cfg, const Task& task, WeightVector initial)
      : cfg_(std::move(cfg)),
        task_(task),
        weights_(std::move(initial)),
        selector_(cfg_.selector, cfg_.seed) {
    cfg_.validate();
  }

  // ---- roster -------------------------------------------------------------

  void add_worker(WorkerId id, RemoteModelRef ref, WorkerProfile profile) {
    profile.worker_id = id;
    profile.validate();
    auto [it, fresh] = roster_.try_emplace(id, RosterEntry{std::move(ref), profile});
    if (!fresh) {
      if (it->second.status != WorkerStatus::Idle) {
        throw Error(Errc::Rejected, "worker " + std::to_string(id.value) + " is busy");
      }
      it->second.ref = std::move(ref);
      it->second.profile = profile;
    }
  }

  bool has_worker(WorkerId id) const { return roster_.contains(id); }

  const RosterEntry& worker(WorkerId id) const {
    auto it = roster_.find(id);
    if (it == roster_.end()) throw Error(Errc::UnknownWorker, "worker " + std::to_string(id.value));
    return it->second;
  }

  const std::map<WorkerId, RosterEntry>& roster() const noexcept { return roster_; }

  /// Blends a measurement into the worker's timing profile.
  void observe(WorkerId id, double train_per_epoch, double transmit) {
    auto& e = entry(id);
    e.profile = record_observation(e.profile, train_per_epoch, transmit, cfg_.observe_alpha);
  }

  // ---- state ------------------------------------------------------------------

  const ServerConfig& config() const noexcept { return cfg_; }
  std::uint32_t version() const noexcept { return version_; }
  const WeightVector& weights() const noexcept { return weights_; }
  std::uint32_t round() const noexcept { return round_; }
  bool aggregating() const noexcept { return aggregating_; }
  const Selector& selector() const noexcept { return selector_; }
  const AccuracyTrace& trace() const noexcept { return trace_; }
  std::size_t inbox_size() const noexcept { return inbox_.size(); }
  std::uint32_t quota() const noexcept { return quota_; }

  /// Server weights as handed to a worker at fetch time.
  VersionedWeights snapshot() const { return VersionedWeights{weights_, version_, 0, std::nullopt}; }

  /// Workers that are training or whose weights are on their way back.
  std::size_t in_flight() const {
    std::size_t n = 0;
    for (const auto& [_, e] : roster_) n += e.status == WorkerStatus::Idle ? 0 : 1;
    return n;
  }

  // ---- round control ------------------------------------------------------------

  /// Selects idle workers holding data and marks them training for round().
  std::vector<Assignment> begin_round() {
    std::vector<WorkerProfile> idle;
    for (const auto& [id, e] : roster_) {
      if (e.status == WorkerStatus::Idle && e.profile.data_batches > 0) idle.push_back(e.profile);
    }
    auto picks = selector_.select(idle, round_);
    for (const auto& a : picks) {
      auto& e = entry(a.worker);
      e.status = WorkerStatus::Training;
      e.round = round_;
      e.epochs = a.epochs;
    }
    selected_ += static_cast<std::uint32_t>(picks.size());
    if (cfg_.mode == Mode::Sync) {
      const auto n = static_cast<double>(picks.size());
      quota_ = picks.empty() ? 0 : std::max<std::uint32_t>(
                                       1, static_cast<std::uint32_t>(std::ceil(cfg_.quota_fraction * n - 1e-9)));
      accepted_ = 0;
      barrier_closed_ = false;
    }
    return picks;
  }

  /// Classifies a TrainingDone. Accepted and buffered responses must be
  /// followed by deposit(); discarded ones free the worker immediately.
  Verdict on_training_done(WorkerId id, std::uint32_t base_version, std::uint32_t local_epochs) {
    auto& e = entry(id);
    if (e.status != WorkerStatus::Training) {
      throw Error(Errc::InvalidArgument, "worker " + std::to_string(id.value) + " is not training");
    }
    if (base_version > version_) {
      throw Error(Errc::InvalidArgument, "response claims a future server version");
    }
    (void)local_epochs;
    if (cfg_.mode == Mode::Sync) {
      if (e.round == round_ && !barrier_closed_) {
        e.status = WorkerStatus::Reporting;
        ++pending_fetches_;
        if (++accepted_ >= quota_) barrier_closed_ = true;
        return Verdict::AcceptNow;
      }
      e.status = WorkerStatus::Idle;
      ++discarded_;
      ++discarded_total_;
      return Verdict::DiscardStale;
    }
    e.status = WorkerStatus::Reporting;
    ++pending_fetches_;
    return aggregating_ ? Verdict::BufferNext : Verdict::AcceptNow;
  }

  /// A dispatched request failed (rejected, unreachable or timed out). The
  /// worker goes back to idle; a sync round stops waiting for it.
  void abandon(WorkerId id) {
    auto& e = entry(id);
    if (e.status == WorkerStatus::Idle) return;
    const bool reporting = e.status == WorkerStatus::Reporting;
    if (reporting) --pending_fetches_;
    const bool counted = cfg_.mode == Mode::Sync && e.round == round_ && (reporting || !barrier_closed_);
    e.status = WorkerStatus::Idle;
    if (counted && quota_ > 0) {
      --quota_;
      if (reporting) --accepted_;
      if (accepted_ >= quota_ && accepted_ > 0) barrier_closed_ = true;
    }
  }

  /// Fetched worker weights arrive. While an aggregation runs they wait for
  /// the next one.
  void deposit(WorkerId id, VersionedWeights vw) {
    auto& e = entry(id);
    if (e.status != WorkerStatus::Reporting) {
      throw Error(Errc::InvalidArgument, "worker " + std::to_string(id.value) + " has no pending fetch");
    }
    if (vw.weights.dim() != weights_.dim()) {
      throw Error(Errc::DimensionMismatch, "worker weights have the wrong dim");
    }
    vw.owner = id;
    e.status = WorkerStatus::Idle;
    --pending_fetches_;
    inbox_.push_back(Pending{id, std::move(vw), e.profile.data_batches});
  }

  bool should_aggregate() const {
    if (aggregating_ || inbox_.empty()) return false;
    if (cfg_.mode == Mode::Sync) return barrier_closed_ && pending_fetches_ == 0;
    return true;
  }

  void begin_aggregation() {
    if (aggregating_) throw Error(Errc::InvalidArgument, "aggregation already running");
    if (cfg_.mode == Mode::Sync && inbox_.size() < quota_) {
      throw Error(Errc::InsufficientResponses, std::to_string(inbox_.size()) + " of " +
                                                   std::to_string(quota_) + " responses");
    }
    if (inbox_.empty()) throw Error(Errc::InsufficientResponses, "inbox is empty");
    aggregating_ = true;
    merging_ = std::move(inbox_);
    inbox_.clear();
  }

  /// Merges the frozen inbox into the server weights. Returns the new version.
  std::uint32_t finish_aggregation() {
    if (!aggregating_) throw Error(Errc::InvalidArgument, "no aggregation running");
    std::sort(merging_.begin(), merging_.end(),
              [](const Pending& a, const Pending& b) { return a.source < b.source; });
    std::vector<AggregationEntry> entries;
    std::vector<std::uint32_t> batches;
    entries.reserve(merging_.size());
    for (auto& p : merging_) {
      entries.push_back(AggregationEntry{p.source, std::move(p.weights), avg_weight(p)});
      batches.push_back(p.batches);
      aggregated_ids_.push_back(p.source);
    }
    weights_ = task_.merge(weights_, entries, MergeContext{version_, batches});
    merging_.clear();
    aggregating_ = false;
    ++version_;
    return version_;
  }

  /// Scores the server weights, feeds the selector and closes the round.
  RoundRecord evaluate_and_update() {
    const double acc_prev = trace_.last();
    const double acc = task_.accuracy(weights_);
    trace_.push(round_, acc);
    selector_.update(eligible_profiles(), acc_prev, acc);
    RoundRecord r;
    r.round = round_;
    r.version = version_;
    r.accuracy = acc;
    r.selected = selected_;
    r.aggregated = static_cast<std::uint32_t>(aggregated_ids_.size());
    r.discarded_stale = discarded_;
    r.selector_state = selector_.state_string();
    std::sort(aggregated_ids_.begin(), aggregated_ids_.end());
    r.aggregated_ids = std::move(aggregated_ids_);
    aggregated_ids_.clear();
    selected_ = 0;
    discarded_ = 0;
    ++round_;
    return r;
  }

  std::uint64_t discarded_total() const noexcept { return discarded_total_; }

 private:
  struct Pending {
    WorkerId source;
    VersionedWeights weights;
    std::uint32_t batches;
  };

  RosterEntry& entry(WorkerId id) {
    auto it = roster_.find(id);
    if (it == roster_.end()) throw Error(Errc::UnknownWorker, "worker " + std::to_string(id.value));
    return it->second;
  }

  std::vector<WorkerProfile> eligible_profiles() const {
    std::vector<WorkerProfile> out;
    for (const auto& [_, e] : roster_) {
      if (e.profile.data_batches > 0) out.push_back(e.profile);
    }
    return out;
  }

  // Discounting uses the version the entry is merged into, not the one it
  // arrived at.
  double avg_weight(const Pending& p) const {
    switch (cfg_.policy) {
      case AveragingPolicy::Uniform: return 1.0;
      case AveragingPolicy::SizeWeighted: return static_cast<double>(p.batches);
      case AveragingPolicy::StalenessDiscounted:
        return static_cast<double>(p.batches) *
               staleness_discount(version_ - p.weights.base_version, cfg_.staleness_lambda);
    }
    return 1.0;
  }

  ServerConfig cfg_;
  const Task& task_;
  WeightVector weights_;
  Selector selector_;
  AccuracyTrace trace_;
  std::map<WorkerId, RosterEntry> roster_;

  std::uint32_t version_ = 0;
  std::uint32_t round_ = 1;
  std::uint32_t quota_ = 0;
  std::uint32_t accepted_ = 0;
  bool barrier_closed_ = false;
  bool aggregating_ = false;
  std::uint32_t pending_fetches_ = 0;
  std::vector<Pending> inbox_;
  std::vector<Pending> merging_;

  std::uint32_t selected_ = 0;
  std::uint32_t discarded_ = 0;
  std::uint64_t discarded_total_ = 0;
  std::vector<WorkerId> aggregated_ids_;
};

}  // namespace fogfl
