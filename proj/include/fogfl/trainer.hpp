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

// Local training. Two built-in tasks share one interface:
//
//  * synthetic-classify: multinomial logistic regression on a seeded Gaussian
//    mixture. Weights are laid out class-major, each class holding its F
//    feature weights followed by its bias, so dim = classes * (F + 1).
//  * surrogate: no data at all. Accuracy is a saturating function of the
//    cumulative effective work the server has absorbed; it exists so that
//    long discrete-event runs cost microseconds.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fogfl/core.hpp"
#include "fogfl/error.hpp"

namespace fogfl {

enum class TaskKind { SyntheticClassify, Surrogate };

inline constexpr std::string_view task_kind_name(TaskKind k) {
  return k == TaskKind::SyntheticClassify ? "synthetic-classify" : "surrogate";
}

/// Parameters of the surrogate accuracy curve.
struct SurrogateParams {
  double floor = 0.1;            // accuracy with zero work
  double asymptote = 0.9;        // accuracy as work -> infinity
  double work_scale = 30.0;      // e-folding work
  double data_saturation = 4.0;  // batches at which one aggregation's gain halves per batch
  double staleness_decay = 0.9;  // per-version discount on a stale response's work
};

struct TaskSpec {
  TaskKind kind = TaskKind::SyntheticClassify;
  std::uint32_t dim = 68;        // classes * (features + 1)
  std::uint32_t classes = 4;
  std::uint32_t batch_size = 64;
  double noise = 1.5;            // within-class standard deviation
  std::uint64_t seed = 1;
  std::uint32_t test_examples = 2048;
  SurrogateParams surrogate;

  std::uint32_t features() const { return dim / classes - 1; }

  void validate() const {
    if (dim == 0) throw Error(Errc::InvalidConfig, "task dim must be > 0");
    if (batch_size == 0) throw Error(Errc::InvalidConfig, "batch_size must be > 0");
    if (kind == TaskKind::SyntheticClassify) {
      if (classes < 2) throw Error(Errc::InvalidConfig, "classes must be >= 2");
      if (dim % classes != 0 || dim / classes < 2) {
        throw Error(Errc::InvalidConfig, "dim must equal classes * (features + 1), features >= 1");
      }
      if (!(noise > 0.0)) throw Error(Errc::InvalidConfig, "noise must be > 0");
      if (test_examples == 0) throw Error(Errc::InvalidConfig, "test_examples must be > 0");
    } else {
      const auto& s = surrogate;
      if (!(s.floor >= 0.0 && s.floor <= s.asymptote && s.asymptote <= 1.0)) {
        throw Error(Errc::InvalidConfig, "surrogate needs 0 <= floor <= asymptote <= 1");
      }
      if (!(s.work_scale > 0.0) || !(s.data_saturation > 0.0)) {
        throw Error(Errc::InvalidConfig, "surrogate scales must be > 0");
      }
      if (!(s.staleness_decay > 0.0 && s.staleness_decay <= 1.0)) {
        throw Error(Errc::InvalidConfig, "surrogate staleness_decay must lie in (0,1]");
      }
    }
  }
};

/// Row-major feature matrix plus labels.
struct SampleSet {
  std::uint32_t features = 0;
  std::vector<double> x;
  std::vector<std::uint32_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * features, features}; }

  SampleSet slice(std::size_t begin, std::size_t end) const {
    SampleSet s;
    s.features = features;
    s.x.assign(x.begin() + static_cast<std::ptrdiff_t>(begin * features),
               x.begin() + static_cast<std::ptrdiff_t>(end * features));
    s.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    labels.begin() + static_cast<std::ptrdiff_t>(end));
    return s;
  }
};

/// Writes `features...,label` rows.
inline void export_csv(const SampleSet& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot open " + path);
  out.precision(17);
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (double v : s.row(i)) out << v << ',';
    out << s.labels[i] << '\n';
  }
  if (!out) throw Error(Errc::IoError, "write failed: " + path);
}

struct Shard {
  WorkerId worker_id;
  std::uint32_t batches = 0;
  SampleSet examples;  // empty for the surrogate task
};

/// Batches held by each worker for one experiment configuration.
struct PartitionConfig {
  std::uint32_t config_id = 0;  // 1..6 for the built-in tables, 0 for custom
  std::uint32_t worker_count = 0;
  std::vector<std::uint32_t> batches_per_worker;

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto b : batches_per_worker) t += b;
    return t;
  }

  void validate() const {
    if (worker_count == 0 || batches_per_worker.size() != worker_count) {
      throw Error(Errc::InvalidConfig, "batches_per_worker must list every worker");
    }
    if (config_id > 6) throw Error(Errc::InvalidConfig, "config_id must lie in 0..6");
    if (total() == 0) throw Error(Errc::InvalidConfig, "partition holds no data");
  }
};

namespace detail {

// Spreads a compact row ({W1, W2/W3, W4, ...}) over its column groups.
inline std::vector<std::uint32_t> expand(std::initializer_list<std::uint32_t> group_sizes,
                                         std::initializer_list<std::uint32_t> values) {
  std::vector<std::uint32_t> out;
  auto v = values.begin();
  for (auto n : group_sizes) {
    out.insert(out.end(), n, *v);
    ++v;
  }
  return out;
}

}  // namespace detail

/// Ten-worker allocations. Columns: W1, W2-W3, W4, W5-W6, W7, W8-W10.
inline PartitionConfig table3(std::uint32_t config_id) {
  static constexpr std::uint32_t kRows[6][6] = {
      {10, 0, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 1},     {1, 0, 3, 0, 0, 2},
      {100, 0, 0, 0, 0, 0}, {10, 10, 10, 10, 10, 10}, {10, 0, 30, 0, 0, 20},
  };
  if (config_id < 1 || config_id > 6) throw Error(Errc::InvalidConfig, "config must be 1..6");
  const auto& r = kRows[config_id - 1];
  return {config_id, 10, detail::expand({1, 2, 1, 2, 1, 3}, {r[0], r[1], r[2], r[3], r[4], r[5]})};
}

/// Thirty-worker allocations. Columns: W1, W2-W10, W11, W12-W20, W21, W22-W30.
inline PartitionConfig table4(std::uint32_t config_id) {
  static constexpr std::uint32_t kRows[6][6] = {
      {30, 0, 0, 0, 0, 0},  {1, 1, 1, 1, 1, 1},       {4, 0, 8, 0, 0, 2},
      {300, 0, 0, 0, 0, 0}, {10, 10, 10, 10, 10, 10}, {40, 0, 80, 0, 0, 20},
  };
  if (config_id < 1 || config_id > 6) throw Error(Errc::InvalidConfig, "config must be 1..6");
  const auto& r = kRows[config_id - 1];
  return {config_id, 30, detail::expand({1, 9, 1, 9, 1, 9}, {r[0], r[1], r[2], r[3], r[4], r[5]})};
}

// ---- data generation ------------------------------------------------------

namespace detail {

inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

inline constexpr std::uint64_t kMeansStream = 0x6d65616e;
inline constexpr std::uint64_t kTrainStream = 1;
inline constexpr std::uint64_t kTestStream = 2;

}  // namespace detail

/// Class centres, one row of `features` per class, drawn from N(0, 1).
inline std::vector<double> class_means(const TaskSpec& t) {
  auto rng = detail::stream_rng(t.seed, detail::kMeansStream);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<double> means(std::size_t{t.classes} * t.features());
  for (double& m : means) m = n01(rng);
  return means;
}

/// `count` labelled samples: label uniform over classes, x ~ N(mean_label, noise^2 I).
inline SampleSet generate_samples(const TaskSpec& t, std::size_t count, std::uint64_t stream) {
  const auto means = class_means(t);
  const std::uint32_t F = t.features();
  auto rng = detail::stream_rng(t.seed, stream);
  std::uniform_int_distribution<std::uint32_t> pick(0, t.classes - 1);
  std::normal_distribution<double> n01(0.0, 1.0);
  SampleSet s;
  s.features = F;
  s.x.resize(count * F);
  s.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto y = pick(rng);
    s.labels[i] = y;
    for (std::uint32_t f = 0; f < F; ++f) s.x[i * F + f] = means[y * F + f] + t.noise * n01(rng);
  }
  return s;
}

inline SampleSet make_test_set(const TaskSpec& t) {
  t.validate();
  if (t.kind == TaskKind::Surrogate) return {};
  return generate_samples(t, t.test_examples, detail::kTestStream);
}

/// Worker w gets the next batches_per_worker[w] * batch_size samples of one
/// seeded stream, so shards are disjoint by construction.
inline std::vector<Shard> partition(const PartitionConfig& p, const TaskSpec& t) {
  p.validate();
  t.validate();
  std::vector<Shard> shards(p.worker_count);
  SampleSet pool;
  if (t.kind == TaskKind::SyntheticClassify) {
    pool = generate_samples(t, p.total() * t.batch_size, detail::kTrainStream);
  }
  std::size_t cursor = 0;
  for (std::uint32_t w = 0; w < p.worker_count; ++w) {
    shards[w].worker_id = WorkerId{w + 1};
    shards[w].batches = p.batches_per_worker[w];
    const std::size_t n = std::size_t{p.batches_per_worker[w]} * t.batch_size;
    if (t.kind == TaskKind::SyntheticClassify) {
      shards[w].examples = pool.slice(cursor, cursor + n);
    }
    cursor += n;
  }
  return shards;
}

/// Elements drawn from N(0, 0.01^2).
inline WeightVector init_weights(const TaskSpec& t, std::uint64_t seed) {
  if (t.dim == 0) throw Error(Errc::InvalidConfig, "task dim must be > 0");
  auto rng = detail::stream_rng(seed, 0x696e6974);
  std::normal_distribution<double> n(0.0, 0.01);
  std::vector<double> w(t.dim);
  for (double& v : w) v = n(rng);
  return WeightVector(std::move(w));
}

// ---- multinomial logistic regression -----------------------------------------

namespace logistic {

// Softmax probabilities for one sample, written into p (size classes).
inline void probabilities(std::span<const double> w, std::span<const double> x,
                          std::uint32_t classes, std::span<double> p) {
  const std::size_t F = x.size();
  double zmax = -INFINITY;
  for (std::uint32_t c = 0; c < classes; ++c) {
    const double* wc = w.data() + c * (F + 1);
    double z = wc[F];
    for (std::size_t f = 0; f < F; ++f) z += wc[f] * x[f];
    p[c] = z;
    zmax = std::max(zmax, z);
  }
  double sum = 0.0;
  for (std::uint32_t c = 0; c < classes; ++c) {
    p[c] = std::exp(p[c] - zmax);
    sum += p[c];
  }
  for (std::uint32_t c = 0; c < classes; ++c) p[c] /= sum;
}

inline std::uint32_t classes_of(std::span<const double> w, std::uint32_t features) {
  return static_cast<std::uint32_t>(w.size() / (features + 1));
}

/// Mean cross-entropy over samples [begin, end).
inline double loss(const WeightVector& w, const SampleSet& s, std::size_t begin = 0,
                   std::size_t end = SIZE_MAX) {
  end = std::min(end, s.size());
  if (begin >= end) throw Error(Errc::EmptyTestSet, "loss over no samples");
  const auto classes = classes_of(w.values(), s.features);
  std::vector<double> p(classes);
  double total = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    probabilities(w.values(), s.row(i), classes, p);
    total -= std::log(std::max(p[s.labels[i]], 1e-300));
  }
  return total / static_cast<double>(end - begin);
}

/// Gradient of `loss` over samples [begin, end):
///   dL/dW[c][f] = mean_i (p_ic - [y_i == c]) x_if,   dL/db[c] = mean_i (p_ic - [y_i == c]).
inline std::vector<double> gradient(std::span<const double> w, const SampleSet& s,
                                    std::size_t begin = 0, std::size_t end = SIZE_MAX) {
  end = std::min(end, s.size());
  const std::size_t F = s.features;
  const auto classes = classes_of(w, s.features);
  std::vector<double> g(w.size(), 0.0);
  std::vector<double> p(classes);
  for (std::size_t i = begin; i < end; ++i) {
    const auto x = s.row(i);
    probabilities(w, x, classes, p);
    for (std::uint32_t c = 0; c < classes; ++c) {
      const double r = p[c] - (s.labels[i] == c ? 1.0 : 0.0);
      double* gc = g.data() + c * (F + 1);
      for (std::size_t f = 0; f < F; ++f) gc[f] += r * x[f];
      gc[F] += r;
    }
  }
  const double inv = 1.0 / static_cast<double>(end - begin);
  for (double& v : g) v *= inv;
  return g;
}

}  // namespace logistic

/// `epochs` in-order passes of mini-batch gradient descent over the shard.
inline WeightVector local_train(const WeightVector& w, const Shard& s, std::uint32_t epochs,
                                double lr, std::uint32_t batch_size = 64) {
  if (s.examples.empty()) throw Error(Errc::EmptyShard, "shard has no examples");
  if (epochs < 1) throw Error(Errc::InvalidArgument, "epochs must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(Errc::InvalidArgument, "lr must be > 0");
  if (w.dim() % (s.examples.features + 1) != 0) {
    throw Error(Errc::DimensionMismatch, "weights do not match shard features");
  }
  std::vector<double> cur(w.values().begin(), w.values().end());
  const std::size_t n = s.examples.size();
  for (std::uint32_t e = 0; e < epochs; ++e) {
    for (std::size_t b = 0; b < n; b += batch_size) {
      const auto g = logistic::gradient(cur, s.examples, b, std::min(n, b + batch_size));
      for (std::size_t k = 0; k < cur.size(); ++k) cur[k] -= lr * g[k];
    }
  }
  return WeightVector(std::move(cur));
}

/// Fraction of argmax-correct predictions; ties go to the lowest class.
inline double evaluate(const WeightVector& w, const SampleSet& test) {
  if (test.empty()) throw Error(Errc::EmptyTestSet, "test set is empty");
  const auto classes = logistic::classes_of(w.values(), test.features);
  std::vector<double> p(classes);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    logistic::probabilities(w.values(), test.row(i), classes, p);
    const auto best = static_cast<std::uint32_t>(std::max_element(p.begin(), p.end()) - p.begin());
    correct += best == test.labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

// ---- surrogate -------------------------------------------------------------------

struct SurrogateState {
  double work = 0.0;
  double accuracy = 0.0;
};

inline double surrogate_accuracy(const SurrogateParams& p, double work) {
  return p.floor + (p.asymptote - p.floor) * (1.0 - std::exp(-work / p.work_scale));
}

/// Gain of one aggregation that merged `batches` of data trained for
/// `epochs` effective epochs: epochs * batches / (1 + batches / saturation).
inline double surrogate_gain(const SurrogateParams& p, double epochs, double batches) {
  return epochs * batches / (1.0 + batches / p.data_saturation);
}

inline SurrogateState surrogate_step(const SurrogateParams& p, SurrogateState s, double epochs,
                                     double batches) {
  s.work += surrogate_gain(p, epochs, batches);
  s.accuracy = surrogate_accuracy(p, s.work);
  return s;
}

// ---- task plug-in interface --------------------------------------------------------

/// Extra facts the server knows about a batch of entries when merging them.
struct MergeContext {
  std::uint32_t server_version = 0;
  std::span<const std::uint32_t> data_batches;  // parallel to the entries
};

/// What a model has to provide to take part in training.
class Task {
 public:
  virtual ~Task() = default;
  virtual const TaskSpec& spec() const = 0;
  virtual WeightVector initial_weights(std::uint64_t seed) const { return init_weights(spec(), seed); }
  virtual WeightVector train(const WeightVector& w, const Shard& s, std::uint32_t epochs,
                             double lr) const = 0;
  virtual double accuracy(const WeightVector& w) const = 0;
  /// New server weights from the current ones and a batch of responses.
  virtual WeightVector merge(const WeightVector& /*current*/,
                             std::span<const AggregationEntry> entries,
                             const MergeContext& /*ctx*/) const {
    return weighted_average(entries);
  }
};

class SyntheticClassifyTask final : public Task {
 public:
  explicit SyntheticClassifyTask(TaskSpec spec) : spec_(std::move(spec)) {
    spec_.kind = TaskKind::SyntheticClassify;
    test_ = make_test_set(spec_);
  }

  const TaskSpec& spec() const override { return spec_; }
  const SampleSet& test_set() const { return test_; }

  WeightVector train(const WeightVector& w, const Shard& s, std::uint32_t epochs,
                     double lr) const override {
    return local_train(w, s, epochs, lr, spec_.batch_size);
  }

  double accuracy(const WeightVector& w) const override { return evaluate(w, test_); }

 private:
  TaskSpec spec_;
  SampleSet test_;
};

/// Weight element 0 carries the cumulative work absorbed by the server; workers
/// return their weights untouched and the work is credited at merge time from
/// the entries' epochs, data sizes and staleness.
class SurrogateTask final : public Task {
 public:
  explicit SurrogateTask(TaskSpec spec) : spec_(std::move(spec)) {
    spec_.kind = TaskKind::Surrogate;
    spec_.validate();
  }

  const TaskSpec& spec() const override { return spec_; }

  WeightVector initial_weights(std::uint64_t) const override {
    return WeightVector(std::vector<double>(spec_.dim, 0.0));
  }

  WeightVector train(const WeightVector& w, const Shard& s, std::uint32_t epochs,
                     double) const override {
    if (s.batches == 0) throw Error(Errc::EmptyShard, "shard has no batches");
    if (epochs < 1) throw Error(Errc::InvalidArgument, "epochs must be >= 1");
    return w;
  }

  double accuracy(const WeightVector& w) const override {
    return surrogate_accuracy(spec_.surrogate, w[0]);
  }

  /// work' = work + E * D / (1 + D / saturation), where E is the
  /// avg_weight-weighted mean of epochs * decay^gap and D the merged batches.
  WeightVector merge(const WeightVector& current, std::span<const AggregationEntry> entries,
                     const MergeContext& ctx) const override {
    if (entries.empty()) throw Error(Errc::InvalidArgument, "merge needs entries");
    if (ctx.data_batches.size() != entries.size()) {
      throw Error(Errc::InvalidArgument, "merge context does not match entries");
    }
    double total = 0.0;
    for (const auto& e : entries) total += e.avg_weight;
    if (!(total > 0.0)) throw Error(Errc::ZeroTotalWeight, "sum of avg_weight is zero");
    double epochs = 0.0;
    double batches = 0.0;
    for (std::size_t x = 0; x < entries.size(); ++x) {
      const auto& e = entries[x];
      const auto gap = ctx.server_version - std::min(ctx.server_version, e.weights.base_version);
      epochs += (e.avg_weight / total) * e.weights.local_epochs *
                std::pow(spec_.surrogate.staleness_decay, static_cast<double>(gap));
      batches += ctx.data_batches[x];
    }
    std::vector<double> out(current.values().begin(), current.values().end());
    out[0] += surrogate_gain(spec_.surrogate, epochs, batches);
    return WeightVector(std::move(out));
  }

 private:
  TaskSpec spec_;
};

inline std::unique_ptr<Task> make_task(const TaskSpec& spec) {
  if (spec.kind == TaskKind::Surrogate) return std::make_unique<SurrogateTask>(spec);
  return std::make_unique<SyntheticClassifyTask>(spec);
}

}  // namespace fogfl
