#include <gtest/gtest.h>

#include <vector>

#include "fogfl/orchestrator.hpp"

namespace fogfl {
namespace {

// Weights pass through training untouched; accuracy follows a script.
class ScriptedTask final : public Task {
 public:
  explicit ScriptedTask(std::vector<double> acc = {}) : acc_(std::move(acc)) { spec_.dim = 2; }
  const TaskSpec& spec() const override { return spec_; }
  WeightVector initial_weights(std::uint64_t) const override { return WeightVector{0, 0}; }
  WeightVector train(const WeightVector& w, const Shard&, std::uint32_t, double) const override { return w; }
  double accuracy(const WeightVector&) const override {
    if (acc_.empty()) return 0.5;
    const double a = acc_[std::min(next_, acc_.size() - 1)];
    ++next_;
    return a;
  }

 private:
  TaskSpec spec_;
  std::vector<double> acc_;
  mutable std::size_t next_ = 0;
};

WorkerProfile profile(std::uint32_t batches, double t_one = 1.0, double tx = 0.1) {
  WorkerProfile p;
  p.data_batches = batches;
  p.t_one = t_one;
  p.t_transmit = tx;
  return p;
}

RemoteModelRef ref(std::uint16_t port) { return {Endpoint{"127.0.0.1", port}, "m"}; }

VersionedWeights vw(double a, double b, std::uint32_t base) {
  return VersionedWeights{WeightVector{a, b}, base, 1, std::nullopt};
}

AggregationServer make(ScriptedTask& task, ServerConfig cfg, std::uint32_t n, std::uint32_t batches = 1) {
  AggregationServer s(cfg, task, task.initial_weights(1));
  for (std::uint32_t i = 1; i <= n; ++i) s.add_worker(WorkerId{i}, ref(static_cast<std::uint16_t>(i)), profile(batches));
  return s;
}

ServerConfig sync_cfg() { return ServerConfig{}; }
ServerConfig async_cfg() {
  ServerConfig c;
  c.mode = Mode::Async;
  return c;
}

TEST(Roster, AddAndReAdd) {
  ScriptedTask task;
  auto s = make(task, sync_cfg(), 2);
  EXPECT_EQ(s.roster().size(), 2u);
  s.add_worker(WorkerId{1}, ref(9), profile(3));
  EXPECT_EQ(s.roster().size(), 2u);
  EXPECT_EQ(s.worker(WorkerId{1}).profile.data_batches, 3u);
  s.begin_round();
  EXPECT_THROW(s.add_worker(WorkerId{1}, ref(9), profile(3)), Error);
  EXPECT_THROW(s.worker(WorkerId{7}), Error);
}

TEST(SyncVerdicts, AcceptThenDiscardNoFetch) {
  ScriptedTask task;
  auto cfg = sync_cfg();
  cfg.quota_fraction = 0.5;
  auto s = make(task, cfg, 2);
  ASSERT_EQ(s.begin_round().size(), 2u);
  EXPECT_EQ(s.quota(), 1u);
  EXPECT_EQ(s.on_training_done(WorkerId{1}, 0, 1), Verdict::AcceptNow);
  s.deposit(WorkerId{1}, vw(1, 1, 0));
  ASSERT_TRUE(s.should_aggregate());
  s.begin_aggregation();
  EXPECT_EQ(s.on_training_done(WorkerId{2}, 0, 1), Verdict::DiscardStale);
  EXPECT_EQ(s.worker(WorkerId{2}).status, WorkerStatus::Idle);
  EXPECT_THROW(s.deposit(WorkerId{2}, vw(5, 5, 0)), Error);
  EXPECT_EQ(s.finish_aggregation(), 1u);
  const auto r = s.evaluate_and_update();
  EXPECT_EQ(r.discarded_stale, 1u);
  EXPECT_EQ(r.aggregated_ids, std::vector<WorkerId>{WorkerId{1}});
}

TEST(SyncVerdicts, StragglerFromOlderRoundDiscarded) {
  ScriptedTask task;
  auto cfg = sync_cfg();
  cfg.quota_fraction = 0.5;
  auto s = make(task, cfg, 2);
  s.begin_round();
  s.on_training_done(WorkerId{1}, 0, 1);
  s.deposit(WorkerId{1}, vw(1, 1, 0));
  s.begin_aggregation();
  s.finish_aggregation();
  s.evaluate_and_update();
  const auto picks = s.begin_round();  // worker 2 still training
  ASSERT_EQ(picks.size(), 1u);
  EXPECT_EQ(s.on_training_done(WorkerId{2}, 0, 1), Verdict::DiscardStale);
}

TEST(SyncAggregate, InsufficientResponses) {
  ScriptedTask task;
  auto s = make(task, sync_cfg(), 3);
  s.begin_round();
  EXPECT_EQ(s.quota(), 3u);
  for (std::uint32_t i = 1; i <= 2; ++i) {
    EXPECT_EQ(s.on_training_done(WorkerId{i}, 0, 1), Verdict::AcceptNow);
    s.deposit(WorkerId{i}, vw(i, i, 0));
  }
  EXPECT_FALSE(s.should_aggregate());
  try {
    s.begin_aggregation();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InsufficientResponses);
  }
  EXPECT_EQ(s.version(), 0u);
}

TEST(SyncAggregate, WaitsForPendingFetches) {
  ScriptedTask task;
  auto s = make(task, sync_cfg(), 2);
  s.begin_round();
  s.on_training_done(WorkerId{1}, 0, 1);
  s.on_training_done(WorkerId{2}, 0, 1);
  s.deposit(WorkerId{2}, vw(1, 1, 0));
  EXPECT_FALSE(s.should_aggregate());
  s.deposit(WorkerId{1}, vw(3, 3, 0));
  EXPECT_TRUE(s.should_aggregate());
}

TEST(AsyncAggregate, OneResponseAggregates) {
  ScriptedTask task;
  auto s = make(task, async_cfg(), 3);
  s.begin_round();
  EXPECT_EQ(s.on_training_done(WorkerId{2}, 0, 1), Verdict::AcceptNow);
  s.deposit(WorkerId{2}, vw(4, 2, 0));
  ASSERT_TRUE(s.should_aggregate());
  s.begin_aggregation();
  EXPECT_EQ(s.finish_aggregation(), 1u);
  EXPECT_EQ(s.weights(), (WeightVector{4, 2}));
}

TEST(AsyncAggregate, MidAggregationBuffersForNextRound) {
  ScriptedTask task;
  auto s = make(task, async_cfg(), 2);
  s.begin_round();
  s.on_training_done(WorkerId{1}, 0, 1);
  s.deposit(WorkerId{1}, vw(2, 2, 0));
  s.begin_aggregation();
  EXPECT_EQ(s.on_training_done(WorkerId{2}, 0, 1), Verdict::BufferNext);
  s.deposit(WorkerId{2}, vw(6, 6, 0));
  EXPECT_FALSE(s.should_aggregate());
  s.finish_aggregation();
  const auto r1 = s.evaluate_and_update();
  EXPECT_EQ(r1.aggregated_ids, std::vector<WorkerId>{WorkerId{1}});
  ASSERT_TRUE(s.should_aggregate());
  s.begin_aggregation();
  s.finish_aggregation();
  const auto r2 = s.evaluate_and_update();
  EXPECT_EQ(r2.aggregated_ids, std::vector<WorkerId>{WorkerId{2}});
}

TEST(Policies, UniformMeanOfEqualWorkers) {
  ScriptedTask task;
  auto cfg = sync_cfg();
  cfg.policy = AveragingPolicy::Uniform;
  auto s = make(task, cfg, 2);
  s.begin_round();
  s.on_training_done(WorkerId{1}, 0, 1);
  s.on_training_done(WorkerId{2}, 0, 1);
  s.deposit(WorkerId{2}, vw(4, 8, 0));
  s.deposit(WorkerId{1}, vw(2, 4, 0));
  s.begin_aggregation();
  s.finish_aggregation();
  EXPECT_EQ(s.weights(), (WeightVector{3, 6}));
}

TEST(Policies, SizeWeighted) {
  ScriptedTask task;
  AggregationServer s(sync_cfg(), task, task.initial_weights(1));
  s.add_worker(WorkerId{1}, ref(1), profile(3));
  s.add_worker(WorkerId{2}, ref(2), profile(1));
  s.begin_round();
  s.on_training_done(WorkerId{1}, 0, 1);
  s.on_training_done(WorkerId{2}, 0, 1);
  s.deposit(WorkerId{1}, vw(1, 1, 0));
  s.deposit(WorkerId{2}, vw(5, 5, 0));
  s.begin_aggregation();
  s.finish_aggregation();
  EXPECT_EQ(s.weights(), (WeightVector{2, 2}));
}

TEST(Policies, StalenessDiscountAtMergeTime) {
  ScriptedTask task;
  auto cfg = async_cfg();
  cfg.policy = AveragingPolicy::StalenessDiscounted;
  cfg.staleness_lambda = 0.5;
  auto s = make(task, cfg, 2);
  s.begin_round();
  // Worker 1 lands twice while worker 2 still trains on version 0.
  for (int i = 0; i < 2; ++i) {
    s.on_training_done(WorkerId{1}, s.version(), 1);
    s.deposit(WorkerId{1}, vw(0, 0, s.version()));
    s.begin_aggregation();
    s.finish_aggregation();
    s.evaluate_and_update();
    s.begin_round();
  }
  ASSERT_EQ(s.version(), 2u);
  s.on_training_done(WorkerId{1}, 2, 1);
  s.deposit(WorkerId{1}, vw(0, 0, 2));
  s.on_training_done(WorkerId{2}, 0, 1);
  s.deposit(WorkerId{2}, vw(5, 5, 0));
  s.begin_aggregation();
  s.finish_aggregation();
  // weights 1 and 0.25: (0*1 + 5*0.25) / 1.25 = 1
  EXPECT_DOUBLE_EQ(s.weights()[0], 1.0);
}

TEST(Evaluate, FirstRoundUsesZeroPrevious) {
  ScriptedTask task({0.5});
  auto cfg = sync_cfg();
  cfg.selector.kind = SelectorKind::RMinMax;
  cfg.selector.rminmax = RMinRMaxState{4, 4};
  auto s = make(task, cfg, 1);
  s.evaluate_and_update();
  EXPECT_DOUBLE_EQ(s.selector().rminmax().rmin, 4.0 * 1.0 / 1.5);
  EXPECT_DOUBLE_EQ(s.selector().rminmax().rmax, 4.0 * 1.5 / 1.0);
}

TEST(Evaluate, StallGrowsTimeBudget) {
  ScriptedTask task({0.3, 0.301});
  auto cfg = sync_cfg();
  cfg.selector.kind = SelectorKind::TimeBased;
  cfg.selector.time_budget = TimeBudgetState{0.0, 2, 0.01};
  AggregationServer s(cfg, task, task.initial_weights(1));
  s.add_worker(WorkerId{1}, ref(1), profile(1, 1.0, 0.5));  // T_total 2.5
  s.add_worker(WorkerId{2}, ref(2), profile(1, 3.0, 0.5));  // T_total 6.5
  EXPECT_TRUE(s.begin_round().empty());
  s.evaluate_and_update();  // 0 -> 0.3: no stall
  EXPECT_EQ(s.selector().time_budget().budget, 0.0);
  EXPECT_TRUE(s.begin_round().empty());
  s.evaluate_and_update();  // 0.3 -> 0.301: stall
  EXPECT_EQ(s.selector().time_budget().budget, 2.5);
  const auto picks = s.begin_round();
  ASSERT_EQ(picks.size(), 1u);
  EXPECT_EQ(picks[0].worker, WorkerId{1});
  EXPECT_EQ(picks[0].epochs, 2u);
}

TEST(Evaluate, RisingAccuracyWidensRBand) {
  ScriptedTask task({0.2, 0.4});
  auto cfg = sync_cfg();
  cfg.selector.kind = SelectorKind::RMinMax;
  auto s = make(task, cfg, 1);
  s.evaluate_and_update();
  const auto before = s.selector().rminmax();
  s.evaluate_and_update();
  EXPECT_LT(s.selector().rminmax().rmin, before.rmin);
  EXPECT_GT(s.selector().rminmax().rmax, before.rmax);
}

TEST(Rounds, SelectAllSyncQuotaIsEveryone) {
  ScriptedTask task;
  auto s = make(task, sync_cfg(), 10);
  EXPECT_EQ(s.begin_round().size(), 10u);
  EXPECT_EQ(s.quota(), 10u);
}

TEST(Rounds, WorkersWithoutDataNeverSelected) {
  ScriptedTask task;
  AggregationServer s(sync_cfg(), task, task.initial_weights(1));
  s.add_worker(WorkerId{1}, ref(1), profile(10));
  s.add_worker(WorkerId{2}, ref(2), profile(0));
  const auto picks = s.begin_round();
  ASSERT_EQ(picks.size(), 1u);
  EXPECT_EQ(picks[0].worker, WorkerId{1});
}

TEST(Rounds, FutureBaseVersionRejected) {
  ScriptedTask task;
  auto s = make(task, sync_cfg(), 1);
  s.begin_round();
  EXPECT_THROW(s.on_training_done(WorkerId{1}, 5, 1), Error);
  EXPECT_THROW(s.on_training_done(WorkerId{9}, 0, 1), Error);
}

TEST(Abandon, ShrinksSyncQuota) {
  ScriptedTask task;
  auto s = make(task, sync_cfg(), 3);
  s.begin_round();
  s.on_training_done(WorkerId{1}, 0, 1);
  s.deposit(WorkerId{1}, vw(1, 1, 0));
  s.on_training_done(WorkerId{2}, 0, 1);
  s.abandon(WorkerId{2});  // fetch failed
  EXPECT_FALSE(s.should_aggregate());
  s.abandon(WorkerId{3});  // never answered
  EXPECT_EQ(s.quota(), 1u);
  ASSERT_TRUE(s.should_aggregate());
  s.begin_aggregation();
  s.finish_aggregation();
  EXPECT_EQ(s.in_flight(), 0u);
}

TEST(ServerConfigTest, Validate) {
  ServerConfig c;
  c.quota_fraction = 0;
  EXPECT_THROW(c.validate(), Error);
  c = ServerConfig{};
  c.staleness_lambda = 2;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_EQ(policy_from_name("staleness-discounted"), AveragingPolicy::StalenessDiscounted);
  EXPECT_FALSE(policy_from_name("median"));
}

}  // namespace
}  // namespace fogfl
