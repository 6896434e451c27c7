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

// Socket deployment of the protocol: a worker agent and an aggregation
// server, each with a control listener and a blob service.
//
// Adding a worker:
//   server -> InviteWorker(server ref)
//   worker -> WorkerReady(worker ref, server ref, data batches)
//
// One training request:
//   server -> StartTraining(epochs)                 request id r
//   worker -> FetchWeights(target = server model)
//   server -> WeightsCredential                     worker redeems it
//   worker    trains, then -> TrainingDone(r, base version, epochs)
//   server    verdict; unless discarded -> FetchWeights(target = worker model)
//   worker -> WeightsCredential                     server redeems it

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "fogfl/core.hpp"
#include "fogfl/error.hpp"
#include "fogfl/log.hpp"
#include "fogfl/orchestrator.hpp"
#include "fogfl/trainer.hpp"
#include "fogfl/transfer.hpp"
#include "fogfl/warehouse.hpp"
#include "fogfl/wire/dispatch.hpp"
#include "fogfl/wire/message.hpp"
#include "fogfl/wire/net.hpp"

namespace fogfl {

using namespace std::chrono_literals;

/// Request-id keyed waiters for replies.
class PendingReplies {
 public:
  std::future<wire::Message> expect(std::uint64_t request_id) {
    std::lock_guard lock(mu_);
    return waiters_[request_id].get_future();
  }

  /// True if someone was waiting for this reply.
  bool fulfil(const wire::Message& m) {
    std::promise<wire::Message> p;
    {
      std::lock_guard lock(mu_);
      auto it = waiters_.find(m.request_id());
      if (it == waiters_.end()) return false;
      p = std::move(it->second);
      waiters_.erase(it);
    }
    p.set_value(m);
    return true;
  }

  void forget(std::uint64_t request_id) {
    std::lock_guard lock(mu_);
    waiters_.erase(request_id);
  }

 private:
  std::mutex mu_;
  std::map<std::uint64_t, std::promise<wire::Message>> waiters_;
};

namespace detail {

inline wire::Message await_reply(PendingReplies& pending, std::uint64_t rid,
                                 std::future<wire::Message>& fut,
                                 std::chrono::milliseconds timeout, Errc on_timeout) {
  if (fut.wait_for(timeout) != std::future_status::ready) {
    pending.forget(rid);
    throw Error(on_timeout, "no reply to request " + std::to_string(rid));
  }
  return fut.get();
}

[[noreturn]] inline void throw_reject(const wire::Reject& r) {
  const Errc code = r.reason == wire::RejectReason::Busy ? Errc::WorkerBusy : Errc::Rejected;
  throw Error(code, std::string(wire::reason_name(r.reason)) +
                        (r.detail.empty() ? "" : ": " + r.detail));
}

/// Joins finished helper threads; joins the rest on destruction.
class ThreadSet {
 public:
  ~ThreadSet() { join_all(); }

  void spawn(std::function<void()> fn) {
    std::lock_guard lock(mu_);
    reap_locked();
    auto done = std::make_shared<std::atomic<bool>>(false);
    threads_.push_back({std::thread([fn = std::move(fn), done] {
                          try {
                            fn();
                          } catch (const std::exception& e) {
                            log::warn("background task: ", e.what());
                          }
                          done->store(true);
                        }),
                        done});
  }

  void join_all() {
    std::list<Item> items;
    {
      std::lock_guard lock(mu_);
      items.swap(threads_);
    }
    for (auto& i : items) {
      if (i.thread.joinable()) i.thread.join();
    }
  }

 private:
  struct Item {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };

  void reap_locked() {
    for (auto it = threads_.begin(); it != threads_.end();) {
      if (it->done->load()) {
        it->thread.join();
        it = threads_.erase(it);
      } else {
        ++it;
      }
    }
  }

  std::mutex mu_;
  std::list<Item> threads_;
};

}  // namespace detail

// ---- worker --------------------------------------------------------------------

struct WorkerAgentConfig {
  Endpoint listen{"127.0.0.1", 0};
  Endpoint blob_listen{"127.0.0.1", 0};
  double train_delay_per_epoch_s = 0.0;  // injected sleep on top of real compute
  double learning_rate = 0.1;
  std::uint64_t seed = 1;
  std::chrono::milliseconds request_timeout = 10s;
};

enum class AgentStatus { Idle, Training, Reporting };

/// A worker node: control listener, blob service, one shard, one model.
class WorkerAgent {
 public:
  WorkerAgent(WorkerAgentConfig cfg, const Task& task, Shard shard)
      : cfg_(std::move(cfg)),
        task_(task),
        shard_(std::move(shard)),
        transfer_(warehouse_, Endpoint{}),
        blob_server_(cfg_.blob_listen, transfer_),
        current_{task_.initial_weights(cfg_.seed), 0, 0, std::nullopt} {
    transfer_.set_endpoint(blob_server_.endpoint());
    model_id_ = warehouse_.put(encode_weight_blob(current_), kMemoryBackend).hex();
    wire::HandlerTable table;
    table.relationship = [this](const wire::Message& m) { on_relationship(m); };
    table.training = [this](const wire::Message& m) { on_training(m); };
    table.transmission = [this](const wire::Message& m) { on_transmission(m); };
    table.pending_replies = [this](const wire::Message& m) { pending_.fulfil(m); };
    control_ = wire::serve(cfg_.listen, std::move(table));
  }

  ~WorkerAgent() { stop(); }

  void stop() {
    stopping_.store(true);
    if (control_) control_->stop();
    jobs_.join_all();
    blob_server_.stop();
  }

  const Endpoint& endpoint() const { return control_->endpoint(); }
  RemoteModelRef model_ref() const { return {endpoint(), model_id_}; }

  std::optional<RemoteModelRef> server_ref() const {
    std::lock_guard lock(mu_);
    return server_ref_;
  }

  AgentStatus status() const {
    std::lock_guard lock(mu_);
    return status_;
  }

  bool shutdown_requested() const { return shutdown_.load(); }

  void wait_for_shutdown() const {
    while (!shutdown_.load() && !stopping_.load()) std::this_thread::sleep_for(20ms);
  }

  /// Weights the worker currently holds.
  VersionedWeights current() const {
    std::lock_guard lock(mu_);
    return current_;
  }

 private:
  void reply(const wire::Message& to, wire::Payload p) {
    wire::send_message(to.sender, wire::Message{endpoint(), std::move(p)});
  }

  void on_relationship(const wire::Message& m) {
    if (std::holds_alternative<wire::Shutdown>(m.payload)) {
      shutdown_.store(true);
      return;
    }
    if (!std::holds_alternative<wire::InviteWorker>(m.payload)) return;
    const auto& invite = std::get<wire::InviteWorker>(m.payload);
    {
      std::lock_guard lock(mu_);
      if (status_ == AgentStatus::Training) {
        reply(m, wire::Reject{invite.request_id, wire::RejectReason::Busy, "training"});
        return;
      }
      server_ref_ = invite.server_ref;
    }
    reply(m, wire::WorkerReady{invite.request_id, model_ref(), invite.server_ref, shard_.batches});
  }

  void on_training(const wire::Message& m) {
    if (!std::holds_alternative<wire::StartTraining>(m.payload)) return;
    const auto req = std::get<wire::StartTraining>(m.payload);
    {
      std::lock_guard lock(mu_);
      if (!server_ref_ || !(*server_ref_ == req.server_ref)) {
        reply(m, wire::Reject{req.request_id, wire::RejectReason::UnrecognizedServer, ""});
        return;
      }
      if (status_ == AgentStatus::Training) {
        reply(m, wire::Reject{req.request_id, wire::RejectReason::Busy, "training"});
        return;
      }
      status_ = AgentStatus::Training;
    }
    jobs_.spawn([this, m, req] { train_job(m, req); });
  }

  void train_job(const wire::Message& m, const wire::StartTraining& req) {
    try {
      const std::uint64_t rid = next_id_++;
      auto fut = pending_.expect(rid);
      wire::send_message(req.server_ref.address,
                         wire::Message{endpoint(), wire::FetchWeights{rid, req.server_ref, model_ref()}});
      const auto answer = detail::await_reply(pending_, rid, fut, cfg_.request_timeout, Errc::Timeout);
      if (auto* r = std::get_if<wire::Reject>(&answer.payload)) detail::throw_reject(*r);
      const auto& cred = std::get<wire::WeightsCredential>(answer.payload).credential;
      VersionedWeights base = fetch_weights(cred, std::nullopt, cfg_.request_timeout);
      {
        std::lock_guard lock(mu_);
        current_ = base;  // local weights are replaced by the server's
      }
      WeightVector trained = task_.train(base.weights, shard_, req.epochs, cfg_.learning_rate);
      if (cfg_.train_delay_per_epoch_s > 0.0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(cfg_.train_delay_per_epoch_s * req.epochs));
      }
      {
        std::lock_guard lock(mu_);
        current_ = VersionedWeights{std::move(trained), base.base_version, req.epochs, std::nullopt};
        status_ = AgentStatus::Reporting;
      }
      wire::send_message(req.server_ref.address,
                         wire::Message{endpoint(), wire::TrainingDone{req.request_id, model_ref(),
                                                                      req.server_ref, base.base_version,
                                                                      req.epochs}});
    } catch (const Error& e) {
      {
        std::lock_guard lock(mu_);
        status_ = AgentStatus::Idle;
      }
      log::warn("training request ", req.request_id, " failed: ", e.what());
      try {
        reply(m, wire::Reject{req.request_id, wire::RejectReason::Denied, e.what()});
      } catch (const Error&) {
      }
    }
  }

  void on_transmission(const wire::Message& m) {
    if (std::holds_alternative<wire::WeightsCredential>(m.payload)) {
      pending_.fulfil(m);
      return;
    }
    const auto& req = std::get<wire::FetchWeights>(m.payload);
    VersionedWeights out{WeightVector{0.0}, 0, 0, std::nullopt};
    {
      std::lock_guard lock(mu_);
      const bool known = server_ref_ && req.requester == *server_ref_;
      if (req.target.model_id != model_id_ || !known || status_ == AgentStatus::Training) {
        reply(m, wire::Reject{req.request_id, wire::RejectReason::Denied, "not available"});
        return;
      }
      out = current_;
      status_ = AgentStatus::Idle;
    }
    reply(m, wire::WeightsCredential{req.request_id, transfer_.export_weights(out)});
  }

  WorkerAgentConfig cfg_;
  const Task& task_;
  Shard shard_;
  Warehouse warehouse_;
  TransferService transfer_;
  BlobServer blob_server_;
  std::string model_id_;
  PendingReplies pending_;
  std::unique_ptr<wire::MessageServer> control_;
  detail::ThreadSet jobs_;

  mutable std::mutex mu_;
  std::optional<RemoteModelRef> server_ref_;
  AgentStatus status_ = AgentStatus::Idle;
  VersionedWeights current_;

  std::atomic<std::uint64_t> next_id_{1};
  std::atomic<bool> shutdown_{false};
  std::atomic<bool> stopping_{false};
};

// ---- server -----------------------------------------------------------------------

struct LiveServerConfig {
  Endpoint listen{"127.0.0.1", 0};
  Endpoint blob_listen{"127.0.0.1", 0};
  double aggregation_time_s = 0.05;  // wall seconds
  double idle_round_s = 1.0;          // wall seconds
  double time_scale = 1.0;            // wall seconds per estimate second, for observations
  std::chrono::milliseconds request_timeout = 10s;
};

/// One closed round plus the wall-clock time it closed at.
struct LiveRound {
  RoundRecord record;
  double wall_time_s = 0.0;
};

class LiveServer {
 public:
  LiveServer(LiveServerConfig cfg, ServerConfig server_cfg, const Task& task)
      : cfg_(std::move(cfg)),
        state_(server_cfg, task, task.initial_weights(server_cfg.seed)),
        transfer_(warehouse_, Endpoint{}),
        blob_server_(cfg_.blob_listen, transfer_) {
    transfer_.set_endpoint(blob_server_.endpoint());
    model_id_ = warehouse_.put(encode_weight_blob(state_.snapshot()), kMemoryBackend).hex();
    wire::HandlerTable table;
    table.relationship = [this](const wire::Message& m) { pending_.fulfil(m); };
    table.training = [this](const wire::Message& m) {
      if (!pending_.fulfil(m)) post(m);
    };
    table.transmission = [this](const wire::Message& m) { on_transmission(m); };
    table.pending_replies = [this](const wire::Message& m) {
      if (!pending_.fulfil(m)) post(m);
    };
    control_ = wire::serve(cfg_.listen, std::move(table));
  }

  ~LiveServer() { stop(); }

  void stop() {
    if (control_) control_->stop();
    helpers_.join_all();
    blob_server_.stop();
  }

  const Endpoint& endpoint() const { return control_->endpoint(); }
  RemoteModelRef model_ref() const { return {endpoint(), model_id_}; }

  /// Invites the worker at `ep` and adds it to the roster. `hint` supplies
  /// the timing estimates; its data size is replaced by what the worker reports.
  WorkerId add_worker(const Endpoint& ep, WorkerProfile hint) {
    const std::uint64_t rid = next_id_++;
    auto fut = pending_.expect(rid);
    try {
      wire::send_message(ep, wire::Message{endpoint(), wire::InviteWorker{rid, model_ref()}},
                         cfg_.request_timeout);
    } catch (const Error&) {
      pending_.forget(rid);
      throw;
    }
    const auto answer =
        detail::await_reply(pending_, rid, fut, cfg_.request_timeout, Errc::HandshakeTimeout);
    if (auto* r = std::get_if<wire::Reject>(&answer.payload)) {
      throw Error(Errc::Rejected, std::string(wire::reason_name(r->reason)));
    }
    const auto& ready = std::get<wire::WorkerReady>(answer.payload);
    std::lock_guard lock(mu_);
    WorkerId id = id_for(ready.worker_ref.address, hint.worker_id);
    hint.data_batches = ready.data_batches;
    state_.add_worker(id, ready.worker_ref, hint);
    return id;
  }

  /// Puts a worker on the roster without a handshake.
  WorkerId adopt_worker(const RemoteModelRef& ref, WorkerProfile profile) {
    std::lock_guard lock(mu_);
    WorkerId id = id_for(ref.address, profile.worker_id);
    state_.add_worker(id, ref, profile);
    return id;
  }

  std::size_t roster_size() const {
    std::lock_guard lock(mu_);
    return state_.roster().size();
  }

  std::uint32_t version() const {
    std::lock_guard lock(mu_);
    return state_.version();
  }

  WeightVector weights() const {
    std::lock_guard lock(mu_);
    return state_.weights();
  }

  /// Sends one StartTraining outside the round loop and waits for the
  /// worker's TrainingDone. Does not aggregate.
  wire::TrainingDone request_training(WorkerId id, std::uint32_t epochs) {
    RemoteModelRef ref;
    {
      std::lock_guard lock(mu_);
      const auto& e = state_.worker(id);
      if (e.status != WorkerStatus::Idle || busy_.contains(id)) {
        throw Error(Errc::WorkerBusy, "worker " + std::to_string(id.value) + " is busy");
      }
      busy_.insert(id);
      ref = e.ref;
    }
    struct Release {
      LiveServer* self;
      WorkerId id;
      ~Release() {
        std::lock_guard lock(self->mu_);
        self->busy_.erase(id);
      }
    } release{this, id};
    const std::uint64_t rid = next_id_++;
    auto fut = pending_.expect(rid);
    wire::send_message(ref.address,
                       wire::Message{endpoint(), wire::StartTraining{rid, model_ref(), ref, epochs}},
                       cfg_.request_timeout);
    const auto answer = detail::await_reply(pending_, rid, fut, cfg_.request_timeout, Errc::Timeout);
    if (auto* r = std::get_if<wire::Reject>(&answer.payload)) detail::throw_reject(*r);
    return std::get<wire::TrainingDone>(answer.payload);
  }

  /// Runs control rounds until `total_rounds` closed or `target` reached.
  std::vector<LiveRound> run(std::uint32_t total_rounds, std::optional<double> target = {}) {
    start_ = Clock::now();
    rounds_.clear();
    total_rounds_ = total_rounds;
    target_ = target;
    done_ = false;
    {
      std::lock_guard lock(mu_);
      dispatch_locked();
    }
    while (!done_) {
      Item item;
      {
        std::unique_lock lock(qmu_);
        auto ready = [&] { return !queue_.empty(); };
        if (timer_) {
          if (!qcv_.wait_until(lock, timer_->at, ready)) {
            const auto kind = timer_->kind;
            timer_.reset();
            lock.unlock();
            on_timer(kind);
            continue;
          }
        } else if (!qcv_.wait_for(lock, cfg_.request_timeout * 3, ready)) {
          throw Error(Errc::Timeout, "control loop starved");
        }
        item = std::move(queue_.front());
        queue_.pop_front();
      }
      handle(item);
    }
    return rounds_;
  }

  /// Asks every rostered worker to exit.
  void shutdown_workers() {
    std::vector<Endpoint> eps;
    {
      std::lock_guard lock(mu_);
      for (const auto& [_, e] : state_.roster()) eps.push_back(e.ref.address);
    }
    for (const auto& ep : eps) {
      try {
        wire::send_message(ep, wire::Message{endpoint(), wire::Shutdown{next_id_++}});
      } catch (const Error& e) {
        log::warn("shutdown of ", ep.to_string(), ": ", e.what());
      }
    }
  }

 private:
  using Clock = std::chrono::steady_clock;

  enum class TimerKind { AggregationDone, IdleRoundEnd };
  struct Timer {
    Clock::time_point at;
    TimerKind kind;
  };

  // Queue items: an inbound message, or a fetched deposit.
  struct Deposit {
    WorkerId worker;
    std::optional<VersionedWeights> weights;  // nullopt when the fetch failed
    double transmit_s = 0.0;
  };
  using Item = std::variant<wire::Message, Deposit>;

  struct Outstanding {
    WorkerId worker;
    std::uint32_t epochs;
    Clock::time_point sent;
  };

  void post(Item item) {
    {
      std::lock_guard lock(qmu_);
      queue_.push_back(std::move(item));
    }
    qcv_.notify_one();
  }

  void set_timer(double seconds, TimerKind kind) {
    std::lock_guard lock(qmu_);
    timer_ = Timer{Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                      std::chrono::duration<double>(seconds)),
                   kind};
  }

  WorkerId id_for(const Endpoint& ep, WorkerId hint) {
    for (const auto& [id, e] : state_.roster()) {
      if (e.ref.address == ep) return id;
    }
    if (hint.value != 0 && !state_.has_worker(hint)) return hint;
    std::uint32_t next = 1;
    while (state_.has_worker(WorkerId{next})) ++next;
    return WorkerId{next};
  }

  void on_transmission(const wire::Message& m) {
    if (std::holds_alternative<wire::WeightsCredential>(m.payload)) {
      pending_.fulfil(m);
      return;
    }
    const auto& req = std::get<wire::FetchWeights>(m.payload);
    VersionedWeights snap{WeightVector{0.0}, 0, 0, std::nullopt};
    {
      std::lock_guard lock(mu_);
      if (req.target.model_id != model_id_) {
        wire::send_message(m.sender, wire::Message{endpoint(), wire::Reject{req.request_id,
                                                                            wire::RejectReason::Denied,
                                                                            "unknown model"}});
        return;
      }
      snap = state_.snapshot();
    }
    wire::send_message(m.sender, wire::Message{endpoint(), wire::WeightsCredential{
                                                               req.request_id,
                                                               transfer_.export_weights(snap)}});
  }

  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  void dispatch_locked() {
    const auto picks = state_.begin_round();
    for (const auto& a : picks) {
      const auto ref = state_.worker(a.worker).ref;
      const std::uint64_t rid = next_id_++;
      outstanding_[rid] = Outstanding{a.worker, a.epochs, Clock::now()};
      try {
        wire::send_message(ref.address,
                           wire::Message{endpoint(), wire::StartTraining{rid, model_ref(), ref, a.epochs}},
                           cfg_.request_timeout);
      } catch (const Error& e) {
        log::warn("dispatch to worker ", a.worker.value, ": ", e.what());
        outstanding_.erase(rid);
        state_.abandon(a.worker);
      }
    }
    maybe_idle_locked();
  }

  // An empty sync round, or an async server with nothing in flight, waits
  // one idle period and then re-evaluates.
  void maybe_idle_locked() {
    if (state_.aggregating() || state_.should_aggregate()) return;
    const bool nothing_moving = state_.in_flight() == 0 && state_.inbox_size() == 0;
    const bool empty_sync = state_.config().mode == Mode::Sync && state_.quota() == 0;
    if (nothing_moving || empty_sync) set_timer(cfg_.idle_round_s, TimerKind::IdleRoundEnd);
  }

  void handle(const Item& item) {
    if (auto* d = std::get_if<Deposit>(&item)) {
      std::lock_guard lock(mu_);
      if (d->weights) {
        state_.deposit(d->worker, *d->weights);
      } else {
        state_.abandon(d->worker);
      }
      try_aggregate_locked();
      if (!d->weights) maybe_idle_locked();
      return;
    }
    const auto& m = std::get<wire::Message>(item);
    auto it = outstanding_.find(m.request_id());
    if (it == outstanding_.end()) {
      log::warn("unexpected ", wire::kind_name(m.kind()), " from ", m.sender.to_string());
      return;
    }
    const Outstanding req = it->second;
    outstanding_.erase(it);
    std::lock_guard lock(mu_);
    if (auto* r = std::get_if<wire::Reject>(&m.payload)) {
      log::warn("worker ", req.worker.value, " rejected training: ", wire::reason_name(r->reason));
      state_.abandon(req.worker);
      try_aggregate_locked();
      maybe_idle_locked();
      return;
    }
    const auto& done = std::get<wire::TrainingDone>(m.payload);
    const Verdict v = state_.on_training_done(req.worker, done.base_version, done.local_epochs);
    if (v == Verdict::DiscardStale) {
      try_aggregate_locked();
      return;
    }
    const double turnaround = std::chrono::duration<double>(Clock::now() - req.sent).count();
    const auto worker_ref = done.worker_ref;
    const WorkerId wid = req.worker;
    const std::uint32_t epochs = std::max<std::uint32_t>(1, done.local_epochs);
    helpers_.spawn([this, worker_ref, wid, turnaround, epochs] {
      fetch_from_worker(worker_ref, wid, turnaround, epochs);
    });
  }

  void fetch_from_worker(const RemoteModelRef& worker_ref, WorkerId wid, double turnaround,
                         std::uint32_t epochs) {
    Deposit d{wid, std::nullopt, 0.0};
    const auto t0 = Clock::now();
    try {
      const std::uint64_t rid = next_id_++;
      auto fut = pending_.expect(rid);
      wire::send_message(worker_ref.address,
                         wire::Message{endpoint(), wire::FetchWeights{rid, worker_ref, model_ref()}},
                         cfg_.request_timeout);
      const auto answer = detail::await_reply(pending_, rid, fut, cfg_.request_timeout, Errc::Timeout);
      if (auto* r = std::get_if<wire::Reject>(&answer.payload)) detail::throw_reject(*r);
      d.weights = fetch_weights(std::get<wire::WeightsCredential>(answer.payload).credential, wid,
                                cfg_.request_timeout);
      d.transmit_s = 2.0 * std::chrono::duration<double>(Clock::now() - t0).count();
      const double train = std::max(0.0, turnaround - d.transmit_s / 2.0) / epochs;
      std::lock_guard lock(mu_);
      state_.observe(wid, train / cfg_.time_scale, d.transmit_s / cfg_.time_scale);
    } catch (const Error& e) {
      log::warn("fetch from worker ", wid.value, ": ", e.what());
    }
    post(std::move(d));
  }

  void try_aggregate_locked() {
    if (!state_.should_aggregate()) return;
    state_.begin_aggregation();
    set_timer(cfg_.aggregation_time_s, TimerKind::AggregationDone);
  }

  void on_timer(TimerKind kind) {
    std::lock_guard lock(mu_);
    if (kind == TimerKind::AggregationDone) state_.finish_aggregation();
    rounds_.push_back(LiveRound{state_.evaluate_and_update(), elapsed()});
    if (rounds_.size() >= total_rounds_ ||
        (target_ && rounds_.back().record.accuracy >= *target_)) {
      done_ = true;
      return;
    }
    if (state_.config().mode == Mode::Async) try_aggregate_locked();
    dispatch_locked();
  }

  LiveServerConfig cfg_;
  AggregationServer state_;
  Warehouse warehouse_;
  TransferService transfer_;
  BlobServer blob_server_;
  std::string model_id_;
  PendingReplies pending_;
  std::unique_ptr<wire::MessageServer> control_;
  detail::ThreadSet helpers_;

  mutable std::mutex mu_;  // guards state_ and busy_
  std::set<WorkerId> busy_;
  std::map<std::uint64_t, Outstanding> outstanding_;  // control loop only

  std::mutex qmu_;
  std::condition_variable qcv_;
  std::deque<Item> queue_;
  std::optional<Timer> timer_;

  std::atomic<std::uint64_t> next_id_{1};
  Clock::time_point start_;
  std::vector<LiveRound> rounds_;
  std::uint32_t total_rounds_ = 0;
  std::optional<double> target_;
  bool done_ = false;
};

}  // namespace fogfl
