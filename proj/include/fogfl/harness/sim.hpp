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

// Discrete-event simulation of a scenario on a virtual clock.
//
// Timeline of one dispatch of worker w for e epochs at time t
// (d = link delay, x = blob bytes / bandwidth + d, one-way weight transfer):
//
//   t                  StartTraining leaves the server
//   t + d              worker asks for weights; server snapshot taken
//   t + d + x          weights arrive, training starts
//   ... + t_one*e + d  TrainingDone reaches the server, verdict
//   ... + x            worker weights fetched (accepted or buffered only)
//
// so an accepted response lands 2d + 2x + t_one*e after dispatch, and
// 2x is the worker's t_transmit.
//
// Events are totally ordered by (time, worker key, kind, sequence number).
// Server-side events use worker key -1 and so run before worker events that
// share their timestamp.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <vector>

#include "fogfl/core.hpp"
#include "fogfl/harness/scenario.hpp"
#include "fogfl/harness/trace.hpp"
#include "fogfl/orchestrator.hpp"
#include "fogfl/selection.hpp"
#include "fogfl/trainer.hpp"
#include "fogfl/transfer.hpp"

namespace fogfl::harness {

struct SimOptions {
  /// When set, events get random sequence numbers and dispatch lists are
  /// shuffled before scheduling. The total order must make this invisible.
  std::optional<std::uint64_t> shuffle_seed;
};

struct VerdictEvent {
  double time = 0.0;
  WorkerId worker;
  std::uint32_t base_version = 0;
  Verdict verdict = Verdict::AcceptNow;
};

struct SimResult {
  std::vector<TraceRow> rows;
  std::vector<std::vector<WorkerId>> aggregated_ids;  // parallel to rows
  std::vector<double> aggregation_start;             // parallel to rows, NaN on idle rounds
  std::vector<double> max_arrival;                   // latest deposit merged, NaN on idle rounds
  std::vector<VerdictEvent> verdicts;
  std::optional<WeightVector> final_weights;
  std::uint32_t final_version = 0;
};

/// Derived per-worker timing: what the server estimates and what the
/// simulator then charges.
struct WorkerTiming {
  WorkerProfile profile;
  double one_way = 0.0;  // seconds to move one weight blob
  double delay = 0.0;    // control message latency
};

inline std::vector<WorkerTiming> worker_timings(const Scenario& s) {
  const double blob_bytes = static_cast<double>(kBlobHeaderBytes + 12 + 8 * std::size_t{s.task.dim});
  std::vector<WorkerTiming> out;
  for (std::size_t i = 0; i < s.workers.size(); ++i) {
    const auto& w = s.workers[i];
    WorkerTiming t;
    t.profile.worker_id = WorkerId{static_cast<std::uint32_t>(i + 1)};
    t.profile.cpu_freq = w.cpu_freq_hz;
    t.profile.cpu_avail = w.cpu_avail;
    t.profile.data_batches = s.partition.batches_per_worker[i];
    t.profile.t_one = estimate_t_one(t.profile, s.calibration);
    t.one_way = blob_bytes / w.link_bandwidth_Bps + w.link_delay_s;
    t.profile.t_transmit = 2.0 * t.one_way;  // probe round trip at startup
    t.delay = w.link_delay_s;
    out.push_back(t);
  }
  return out;
}

namespace detail {

enum class EventKind : std::uint8_t { Snapshot, Done, Deposit, AggregationDone, IdleRoundEnd };

struct Event {
  double time;
  std::int64_t worker_key;
  EventKind kind;
  std::uint64_t seq;
  std::uint32_t worker;

  bool operator>(const Event& o) const {
    if (time != o.time) return time > o.time;
    if (worker_key != o.worker_key) return worker_key > o.worker_key;
    if (kind != o.kind) return kind > o.kind;
    return seq > o.seq;
  }
};

class Simulator {
 public:
  Simulator(const Scenario& s, const SimOptions& opt)
      : s_(s),
        task_(make_task(s.task)),
        shards_(partition(s.partition, s.task)),
        timings_(worker_timings(s)),
        server_(s.server_config(), *task_, task_->initial_weights(s.seed)),
        pending_(s.workers.size()) {
    if (opt.shuffle_seed) shuffle_.emplace(*opt.shuffle_seed);
    for (const auto& t : timings_) {
      const auto id = t.profile.worker_id;
      server_.add_worker(id, RemoteModelRef{Endpoint{"sim", static_cast<std::uint16_t>(id.value)},
                                            "w" + std::to_string(id.value)},
                         t.profile);
    }
  }

  SimResult run() {
    dispatch(0.0);
    while (!queue_.empty() && !stopped_) {
      const Event e = queue_.top();
      queue_.pop();
      if (e.time < now_) throw Error(Errc::InvalidArgument, "virtual clock went backwards");
      now_ = e.time;
      handle(e);
    }
    result_.final_weights = server_.weights();
    result_.final_version = server_.version();
    return std::move(result_);
  }

 private:
  struct InFlight {
    VersionedWeights trained{WeightVector{0.0}, 0, 0, {}};
    std::uint32_t epochs = 0;
  };

  const WorkerTiming& timing(std::uint32_t w) const { return timings_[w - 1]; }

  void push(double time, std::int64_t key, EventKind kind, std::uint32_t worker = 0) {
    const std::uint64_t seq = shuffle_ ? (*shuffle_)() : next_seq_++;
    queue_.push(Event{time, key, kind, seq, worker});
  }

  void dispatch(double t) {
    auto picks = server_.begin_round();
    if (shuffle_) std::shuffle(picks.begin(), picks.end(), *shuffle_);
    for (const auto& a : picks) {
      pending_[a.worker.value - 1].epochs = a.epochs;
      push(t + timing(a.worker.value).delay, a.worker.value, EventKind::Snapshot, a.worker.value);
    }
    if (picks.empty() && !server_.aggregating() &&
        (s_.mode == Mode::Sync || (server_.in_flight() == 0 && server_.inbox_size() == 0))) {
      push(t + s_.idle_round_s, -1, EventKind::IdleRoundEnd);
    }
  }

  void handle(const Event& e) {
    switch (e.kind) {
      case EventKind::Snapshot: {
        const auto& tm = timing(e.worker);
        auto& p = pending_[e.worker - 1];
        const VersionedWeights snap = server_.snapshot();
        const auto& shard = shards_[e.worker - 1];
        p.trained = VersionedWeights{task_->train(snap.weights, shard, p.epochs, s_.learning_rate),
                                     snap.base_version, p.epochs, WorkerId{e.worker}};
        const double train = tm.profile.t_one * p.epochs;
        push(e.time + tm.one_way + train + tm.delay, e.worker, EventKind::Done, e.worker);
        break;
      }
      case EventKind::Done: {
        auto& p = pending_[e.worker - 1];
        const Verdict v =
            server_.on_training_done(WorkerId{e.worker}, p.trained.base_version, p.epochs);
        result_.verdicts.push_back({e.time, WorkerId{e.worker}, p.trained.base_version, v});
        if (v != Verdict::DiscardStale) {
          push(e.time + timing(e.worker).one_way, e.worker, EventKind::Deposit, e.worker);
        }
        break;
      }
      case EventKind::Deposit: {
        const auto& tm = timing(e.worker);
        server_.observe(WorkerId{e.worker}, tm.profile.t_one, 2.0 * tm.one_way);
        server_.deposit(WorkerId{e.worker}, std::move(pending_[e.worker - 1].trained));
        merge_arrival_ = std::max(merge_arrival_, e.time);
        try_aggregate(e.time);
        break;
      }
      case EventKind::AggregationDone: {
        server_.finish_aggregation();
        close_round(e.time, agg_start_, last_merge_arrival_);
        if (stopped_) return;
        if (s_.mode == Mode::Async) try_aggregate(e.time);
        dispatch(e.time);
        break;
      }
      case EventKind::IdleRoundEnd: {
        close_round(e.time, std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN());
        if (stopped_) return;
        dispatch(e.time);
        break;
      }
    }
  }

  void try_aggregate(double t) {
    if (!server_.should_aggregate()) return;
    server_.begin_aggregation();
    agg_start_ = t;
    last_merge_arrival_ = merge_arrival_;
    merge_arrival_ = -std::numeric_limits<double>::infinity();
    push(t + s_.aggregation_time_s, -1, EventKind::AggregationDone);
  }

  void close_round(double t, double agg_start, double max_arrival) {
    RoundRecord r = server_.evaluate_and_update();
    result_.rows.push_back(TraceRow{r.round, t, r.accuracy, r.selected, r.aggregated,
                                    r.discarded_stale, r.selector_state});
    result_.aggregated_ids.push_back(std::move(r.aggregated_ids));
    result_.aggregation_start.push_back(agg_start);
    result_.max_arrival.push_back(max_arrival);
    if (result_.rows.size() >= s_.total_rounds ||
        (s_.target_accuracy && r.accuracy >= *s_.target_accuracy)) {
      stopped_ = true;
    }
  }

  const Scenario& s_;
  std::unique_ptr<Task> task_;
  std::vector<Shard> shards_;
  std::vector<WorkerTiming> timings_;
  AggregationServer server_;
  std::vector<InFlight> pending_;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
  std::optional<std::mt19937_64> shuffle_;
  std::uint64_t next_seq_ = 0;
  double now_ = 0.0;
  double agg_start_ = 0.0;
  double merge_arrival_ = -std::numeric_limits<double>::infinity();
  double last_merge_arrival_ = 0.0;
  bool stopped_ = false;
  SimResult result_;
};

}  // namespace detail

inline SimResult run_sim(const Scenario& s, const SimOptions& opt = {}) {
  s.validate();
  return detail::Simulator(s, opt).run();
}

}  // namespace fogfl::harness
