#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "fogfl/selection.hpp"

namespace fogfl {
namespace {

std::vector<WorkerProfile> workers(std::vector<double> t_one, std::vector<double> tx) {
  std::vector<WorkerProfile> out;
  for (std::size_t i = 0; i < t_one.size(); ++i) {
    WorkerProfile p;
    p.worker_id = WorkerId{static_cast<std::uint32_t>(i + 1)};
    p.t_one = t_one[i];
    p.t_transmit = tx[i];
    p.data_batches = 1;
    out.push_back(p);
  }
  return out;
}

std::vector<WorkerId> ids(std::initializer_list<std::uint32_t> v) {
  std::vector<WorkerId> out;
  for (auto x : v) out.push_back(WorkerId{x});
  return out;
}

TEST(EstimateTOne, Values) {
  WorkerProfile p;
  p.cpu_freq = 2e9;
  p.data_batches = 1;
  const ServerCalibration same{0.7, 2e9};
  EXPECT_DOUBLE_EQ(estimate_t_one(p, same), 0.7);
  const double base = estimate_t_one(p, same);
  p.cpu_freq = 4e9;
  EXPECT_DOUBLE_EQ(estimate_t_one(p, same), base / 2);
  WorkerProfile q;
  q.cpu_freq = 1.5e9;
  q.cpu_avail = 0.5;
  q.data_batches = 10;
  EXPECT_NEAR(estimate_t_one(q, ServerCalibration{0.01, 3e9}), 0.4, 1e-15);
}

TEST(RMinMax, HandTrace) {
  const auto w = workers({1, 2, 10}, {1, 1, 1});
  const auto sel = select_rminmax(w, RMinRMaxState{2, 5});
  EXPECT_EQ(sel.t_minimum, 6.0);
  EXPECT_EQ(sel.selected, ids({1, 2}));
}

TEST(RMinMax, Homogeneous) {
  const auto w = workers({3, 3, 3, 3}, {1, 1, 1, 1});
  EXPECT_EQ(select_rminmax(w, RMinRMaxState{2, 5}).selected, ids({1, 2, 3, 4}));
}

TEST(RMinMax, DegenerateBandFastestOnly) {
  const auto w = workers({1, 2, 10, 1}, {1, 1, 1, 1});
  EXPECT_EQ(select_rminmax(w, RMinRMaxState{5, 5}).selected, ids({1, 4}));
}

TEST(RMinMax, NeverEmpty) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> t(0.1, 50), r(0.1, 10);
  for (int i = 0; i < 200; ++i) {
    const auto w = workers({t(rng), t(rng), t(rng)}, {t(rng), t(rng), t(rng)});
    const double a = r(rng), b = r(rng);
    EXPECT_FALSE(select_rminmax(w, RMinRMaxState{std::min(a, b), std::max(a, b)}).selected.empty());
  }
}

TEST(RMinMax, LiteralComparisonFlag) {
  const auto w = workers({1, 2, 10}, {1, 1, 1});
  // T_min = {3,5,21} against T_minimum 6 with >=
  EXPECT_EQ(select_rminmax(w, RMinRMaxState{2, 5}, true).selected, ids({3}));
}

TEST(RMinMax, Epochs) {
  const auto w = workers({1, 2, 10}, {1, 1, 1});
  const RMinRMaxState st{2, 5};
  EXPECT_EQ(rminmax_epochs(w[0], st, 6.0), 5u);
  EXPECT_EQ(rminmax_epochs(w[1], st, 6.0), 2u);
  EXPECT_EQ(rminmax_epochs(w[2], st, 6.0), 2u);
}

TEST(UpdateRMinMax, HandComputations) {
  const RMinRMaxState st{3, 7};
  const auto same = update_rminmax(st, 0.4, 0.4);
  EXPECT_EQ(same.rmin, 3.0);
  EXPECT_EQ(same.rmax, 7.0);
  const auto up = update_rminmax(RMinRMaxState{4, 4}, 0.0, 1.0);
  EXPECT_EQ(up.rmin, 2.0);
  EXPECT_EQ(up.rmax, 8.0);
  const auto down = update_rminmax(RMinRMaxState{2, 8}, 0.5, 0.4);
  EXPECT_DOUBLE_EQ(down.rmin, 2.0 * 1.5 / 1.4);
  EXPECT_DOUBLE_EQ(down.rmax, 8.0 * 1.4 / 1.5);
  const auto crossed = update_rminmax(RMinRMaxState{4, 4}, 0.5, 0.4);
  EXPECT_EQ(crossed.rmax, crossed.rmin);
}

TEST(UpdateRMinMax, LiteralSwapsFactors) {
  const auto lit = update_rminmax(RMinRMaxState{4, 8}, 0.0, 1.0, true);
  EXPECT_EQ(lit.rmin, 8.0);
  EXPECT_EQ(lit.rmax, 8.0);
  EXPECT_THROW(update_rminmax(RMinRMaxState{}, -0.1, 0.5), Error);
  EXPECT_THROW(update_rminmax(RMinRMaxState{}, 0.1, 1.5), Error);
}

TEST(TimeBased, HandTraces) {
  const auto w = workers({1, 2, 10}, {1, 1, 1});
  EXPECT_TRUE(select_timebased(w, TimeBudgetState{0.0, 3, 0.01}).empty());
  EXPECT_EQ(select_timebased(w, TimeBudgetState{7.0, 3, 0.01}), ids({1, 2}));
  EXPECT_EQ(select_timebased(w, TimeBudgetState{std::numeric_limits<double>::infinity(), 3, 0.01}),
            ids({1, 2, 3}));
}

TEST(UpdateTimeBudget, HandTraces) {
  const TimeBudgetState st{7.0, 3, 0.01};
  EXPECT_EQ(update_time_budget(st, workers({2, 10}, {3, 1}), 0.3, 0.5).budget, 7.0);
  EXPECT_EQ(update_time_budget(st, workers({2, 10}, {3, 1}), 0.5, 0.5).budget, 9.0);
  EXPECT_EQ(update_time_budget(st, {}, 0.5, 0.5).budget, 7.0);
}

TEST(Random, AllAndDeterminism) {
  const auto w = workers({1, 1, 1, 1, 1}, {1, 1, 1, 1, 1});
  EXPECT_EQ(select_random(w, 5, 3), ids({1, 2, 3, 4, 5}));
  EXPECT_EQ(select_random(w, 2, 77), select_random(w, 2, 77));
  EXPECT_THROW(select_random(w, 0, 1), Error);
  EXPECT_THROW(select_random(w, 6, 1), Error);
}

TEST(Random, UniformChiSquare) {
  const auto w = workers({1, 1, 1, 1, 1}, {1, 1, 1, 1, 1});
  std::map<std::uint32_t, int> counts;
  const int n = 10000;
  for (int s = 0; s < n; ++s) ++counts[select_random(w, 1, static_cast<std::uint64_t>(s))[0].value];
  double chi2 = 0;
  for (std::uint32_t i = 1; i <= 5; ++i) {
    const double d = counts[i] - n / 5.0;
    chi2 += d * d / (n / 5.0);
  }
  EXPECT_LT(chi2, 18.47);  // 4 dof, p = 0.001
}

TEST(RecordObservation, Blend) {
  WorkerProfile p;
  p.t_one = 4.0;
  p.t_transmit = 1.0;
  const auto same = record_observation(p, 4.0, 1.0);
  EXPECT_EQ(same.t_one, 4.0);
  EXPECT_EQ(same.t_transmit, 1.0);
  EXPECT_EQ(record_observation(p, 2.0, 1.0, 0.5).t_one, 3.0);
  auto q = p;
  for (int i = 0; i < 60; ++i) q = record_observation(q, 1.0, 1.0, 0.5);
  EXPECT_NEAR(q.t_one, 1.0, 1e-15);
  EXPECT_THROW(record_observation(p, -1.0, 0.0), Error);
}

TEST(SelectorTest, StateStrings) {
  SelectorConfig cfg;
  EXPECT_EQ(Selector(cfg, 1).state_string(), "all");
  cfg.kind = SelectorKind::Random;
  cfg.k = 3;
  EXPECT_EQ(Selector(cfg, 1).state_string(), "k=3");
  cfg.kind = SelectorKind::RMinMax;
  EXPECT_EQ(Selector(cfg, 1).state_string(), "rmin=5;rmax=5");
  cfg.kind = SelectorKind::TimeBased;
  EXPECT_EQ(Selector(cfg, 1).state_string(), "budget=0;r=1");
}

TEST(SelectorTest, RMinMaxAssignsEpochs) {
  SelectorConfig cfg;
  cfg.kind = SelectorKind::RMinMax;
  cfg.rminmax = RMinRMaxState{2, 5};
  Selector s(cfg, 1);
  const auto a = s.select(workers({1, 2, 10}, {1, 1, 1}), 1);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].worker, WorkerId{1});
  EXPECT_EQ(a[0].epochs, 5u);
  EXPECT_EQ(a[1].epochs, 2u);
}

TEST(SelectorTest, RisingAccuracyWidensBand) {
  SelectorConfig cfg;
  cfg.kind = SelectorKind::RMinMax;
  Selector s(cfg, 1);
  const auto w = workers({1, 2}, {1, 1});
  s.update(w, 0.0, 0.5);
  EXPECT_LT(s.config().rminmax.rmin, 5.0);
  EXPECT_GT(s.config().rminmax.rmax, 5.0);
}

}  // namespace
}  // namespace fogfl
