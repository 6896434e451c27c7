#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "fogfl/trainer.hpp"

namespace fogfl {
namespace {

TaskSpec small_task() {
  TaskSpec t;
  t.dim = 12;  // 3 classes, 3 features
  t.classes = 3;
  t.batch_size = 16;
  t.test_examples = 256;
  return t;
}

TEST(Partition, Table3Rows) {
  EXPECT_EQ(table3(2).batches_per_worker, std::vector<std::uint32_t>(10, 1));
  EXPECT_EQ(table3(3).batches_per_worker, (std::vector<std::uint32_t>{1, 0, 0, 3, 0, 0, 0, 2, 2, 2}));
  EXPECT_EQ(table3(1).batches_per_worker, (std::vector<std::uint32_t>{10, 0, 0, 0, 0, 0, 0, 0, 0, 0}));
  EXPECT_EQ(table3(6).batches_per_worker,
            (std::vector<std::uint32_t>{10, 0, 0, 30, 0, 0, 0, 20, 20, 20}));
  EXPECT_THROW(table3(0), Error);
  EXPECT_THROW(table4(7), Error);
}

TEST(Partition, Table4Rows) {
  const auto c3 = table4(3).batches_per_worker;
  ASSERT_EQ(c3.size(), 30u);
  EXPECT_EQ(c3[0], 4u);
  EXPECT_EQ(c3[10], 8u);
  for (int i = 21; i < 30; ++i) EXPECT_EQ(c3[i], 2u);
  EXPECT_EQ(std::count(c3.begin(), c3.end(), 0u), 19);  // W2-W10, W12-W20, W21
}

// Totals: the sequential row of each dataset equals the distributed rows.
TEST(Partition, TotalsConserved) {
  for (auto make : {table3, table4}) {
    EXPECT_EQ(make(1).total(), make(2).total());
    EXPECT_EQ(make(1).total(), make(3).total());
    EXPECT_EQ(make(4).total(), make(5).total());
    EXPECT_EQ(make(4).total(), make(6).total());
  }
}

TEST(Partition, ShardsDisjointAndSized) {
  const auto t = small_task();
  const auto shards = partition(table3(3), t);
  ASSERT_EQ(shards.size(), 10u);
  std::set<std::vector<double>> rows;
  std::size_t n = 0;
  for (const auto& s : shards) {
    EXPECT_EQ(s.examples.size(), std::size_t{s.batches} * t.batch_size);
    EXPECT_EQ(s.batches, (s.examples.size() + t.batch_size - 1) / t.batch_size);
    for (std::size_t i = 0; i < s.examples.size(); ++i) {
      const auto r = s.examples.row(i);
      rows.insert(std::vector<double>(r.begin(), r.end()));
      ++n;
    }
  }
  EXPECT_EQ(rows.size(), n);
  EXPECT_EQ(shards[0].worker_id, WorkerId{1});
}

TEST(InitWeights, Deterministic) {
  const auto t = small_task();
  EXPECT_EQ(init_weights(t, 5), init_weights(t, 5));
  EXPECT_GT(l2_diff(init_weights(t, 5), init_weights(t, 6)), 0.0);
  TaskSpec t10 = t;
  t10.dim = 10;
  EXPECT_EQ(init_weights(t10, 1).dim(), 10u);
}

TEST(Logistic, GradientMatchesFiniteDifferences) {
  const auto t = small_task();
  const auto data = generate_samples(t, 64, 7);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n(0.0, 0.5);
  const double h = 1e-5;
  for (int point = 0; point < 20; ++point) {
    std::vector<double> w(t.dim);
    for (auto& v : w) v = n(rng);
    const auto g = logistic::gradient(w, data);
    for (std::size_t k = 0; k < w.size(); ++k) {
      auto wp = w, wm = w;
      wp[k] += h;
      wm[k] -= h;
      const double fd = (logistic::loss(WeightVector(wp), data) - logistic::loss(WeightVector(wm), data)) / (2 * h);
      const double scale = std::max({std::abs(fd), std::abs(g[k]), 1e-3});
      EXPECT_LE(std::abs(fd - g[k]) / scale, 1e-5) << "point " << point << " k " << k;
    }
  }
}

TEST(LocalTrain, LossDecreases) {
  const auto t = small_task();
  const auto shards = partition(table3(2), t);
  const auto w0 = init_weights(t, 1);
  const auto w1 = local_train(w0, shards[0], 3, 0.05, t.batch_size);
  EXPECT_LE(logistic::loss(w1, shards[0].examples), logistic::loss(w0, shards[0].examples));
}

TEST(LocalTrain, Preconditions) {
  const auto t = small_task();
  const auto shards = partition(table3(3), t);
  const auto w0 = init_weights(t, 1);
  EXPECT_THROW(local_train(w0, shards[0], 1, 0.0), Error);
  EXPECT_THROW(local_train(w0, shards[0], 0, 0.1), Error);
  try {
    local_train(w0, shards[1], 1, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyShard);
  }
  const auto tiny = local_train(w0, shards[0], 1, 1e-12, t.batch_size);
  EXPECT_LT(l2_diff(tiny, w0), 1e-9);
}

TEST(Evaluate, SeparableOracle) {
  SampleSet s;
  s.features = 1;
  for (int i = 0; i < 100; ++i) {
    const double x = (i % 2 == 0 ? 1.0 : -1.0) * (1 + i);
    s.x.push_back(x);
    s.labels.push_back(x > 0 ? 1u : 0u);
  }
  EXPECT_EQ(evaluate(WeightVector{-1, 0, 1, 0}, s), 1.0);
  EXPECT_EQ(evaluate(WeightVector{-1, 0, 1, 0}, s), evaluate(WeightVector{-1, 0, 1, 0}, s));
  EXPECT_THROW(evaluate(WeightVector{-1, 0, 1, 0}, SampleSet{}), Error);
}

TEST(Evaluate, PermutedLabelsNearChance) {
  TaskSpec t;
  t.dim = 6;
  t.classes = 2;
  const auto data = generate_samples(t, 20000, 3);
  SampleSet shuffled = data;
  std::mt19937_64 rng(4);
  std::shuffle(shuffled.labels.begin(), shuffled.labels.end(), rng);
  // trained on the real labels, scored against noise
  Shard shard{WorkerId{1}, 1, data.slice(0, 2000)};
  const auto w = local_train(init_weights(t, 1), shard, 5, 0.1, 64);
  EXPECT_NEAR(evaluate(w, shuffled), 0.5, 0.05);
  EXPECT_GT(evaluate(w, data), 0.6);
}

TEST(Surrogate, SaturationLaw) {
  SurrogateParams p;
  EXPECT_EQ(surrogate_accuracy(p, 0.0), p.floor);
  EXPECT_NEAR(surrogate_accuracy(p, 1e6), p.asymptote, 1e-12);
  double prev = 0.0;
  for (double work = 0.5; work < 1e4; work *= 2) {
    const double a = surrogate_accuracy(p, work);
    EXPECT_GE(a, prev);
    prev = a;
  }
  SurrogateState s;
  s = surrogate_step(p, s, 2.0, 4.0);
  EXPECT_DOUBLE_EQ(s.work, 2.0 * 4.0 / 2.0);
  EXPECT_DOUBLE_EQ(s.accuracy, surrogate_accuracy(p, 4.0));
}

TEST(Surrogate, TaskMergeCreditsWork) {
  TaskSpec spec;
  spec.kind = TaskKind::Surrogate;
  SurrogateTask task(spec);
  const auto w0 = task.initial_weights(1);
  EXPECT_EQ(task.accuracy(w0), spec.surrogate.floor);
  const std::vector<AggregationEntry> es{
      {WorkerId{1}, VersionedWeights{w0, 3, 2, WorkerId{1}}, 1.0},
      {WorkerId{2}, VersionedWeights{w0, 1, 1, WorkerId{2}}, 1.0}};
  const std::vector<std::uint32_t> batches{1, 3};
  const auto w1 = task.merge(w0, es, MergeContext{3, batches});
  const double e = 0.5 * 2 + 0.5 * 1 * 0.9 * 0.9;
  EXPECT_DOUBLE_EQ(w1[0], e * 4.0 / 2.0);
  EXPECT_GT(task.accuracy(w1), task.accuracy(w0));
}

TEST(SampleExport, WritesRows) {
  const auto path = std::filesystem::temp_directory_path() / "fogfl-samples.csv";
  const auto data = generate_samples(small_task(), 5, 1);
  export_csv(data, path.string());
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 5);
  std::filesystem::remove(path);
}

TEST(TaskSpecTest, Validate) {
  TaskSpec t;
  t.dim = 7;
  EXPECT_THROW(t.validate(), Error);
  t.kind = TaskKind::Surrogate;
  t.surrogate.floor = 0.95;
  EXPECT_THROW(t.validate(), Error);
}

}  // namespace
}  // namespace fogfl
