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

#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fogfl/error.hpp"

namespace fogfl {

/// Dense model parameters. Every model crossing the aggregation or transfer
/// boundary is flattened into one of these.
class WeightVector {
 public:
  explicit WeightVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) {
      throw Error(Errc::InvalidArgument, "weight vector must have dim > 0");
    }
    for (double v : values_) {
      if (!std::isfinite(v)) {
        throw Error(Errc::NonFiniteInput, "weight vector contains NaN/Inf");
      }
    }
  }

  WeightVector(std::initializer_list<double> values)
      : WeightVector(std::vector<double>(values)) {}

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }

  /// Releases the storage; the vector is not usable afterwards.
  std::vector<double> take() && { return std::move(values_); }

  friend bool operator==(const WeightVector&, const WeightVector&) = default;

 private:
  std::vector<double> values_;
};

struct WorkerId {
  std::uint32_t value = 0;
  friend auto operator<=>(const WorkerId&, const WorkerId&) = default;
};

/// Who produced a set of weights; nullopt means the aggregation server.
using Owner = std::optional<WorkerId>;

struct VersionedWeights {
  WeightVector weights;
  std::uint32_t base_version = 0;
  std::uint32_t local_epochs = 0;
  Owner owner;

  friend bool operator==(const VersionedWeights&, const VersionedWeights&) = default;
};

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;

  std::string to_string() const { return host + ":" + std::to_string(port); }
  friend bool operator==(const Endpoint&, const Endpoint&) = default;
  friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

/// Names one model on one node: the node's address plus the warehouse id of
/// the model there.
struct RemoteModelRef {
  Endpoint address;
  std::string model_id;

  friend bool operator==(const RemoteModelRef&, const RemoteModelRef&) = default;
};

struct WorkerProfile {
  WorkerId worker_id;
  double cpu_freq = 1.0;       // Hz
  double cpu_avail = 1.0;      // fraction of the CPU this worker gets, (0,1]
  std::uint32_t data_batches = 0;
  double t_one = 0.0;          // seconds for one local epoch over all local data
  double t_transmit = 0.0;     // seconds for one weight round trip
  std::optional<double> last_measured_train;
  std::optional<double> last_measured_transmit;

  void validate() const {
    if (!(cpu_freq > 0.0) || !std::isfinite(cpu_freq)) {
      throw Error(Errc::InvalidProfile, "cpu_freq must be > 0");
    }
    if (!(cpu_avail > 0.0 && cpu_avail <= 1.0)) {
      throw Error(Errc::InvalidProfile, "cpu_avail must lie in (0,1]");
    }
    if (!(t_one >= 0.0) || !(t_transmit >= 0.0)) {
      throw Error(Errc::InvalidProfile, "timings must be >= 0");
    }
  }
};

struct AggregationEntry {
  WorkerId source;
  VersionedWeights weights;
  double avg_weight = 1.0;
};

/// Per-entry weight assignment used when merging worker responses.
enum class AveragingPolicy {
  Uniform,               // every entry counts once
  SizeWeighted,          // weight = data_batches
  StalenessDiscounted,   // weight = data_batches * lambda^(version - base_version)
};

/// Weighted mean of the entries' weights. Coefficients are normalized before
/// accumulation so that a single entry is reproduced bit for bit.
inline WeightVector weighted_average(std::span<const AggregationEntry> entries) {
  if (entries.empty()) {
    throw Error(Errc::InvalidArgument, "weighted_average needs at least one entry");
  }
  const std::size_t dim = entries.front().weights.weights.dim();
  double total = 0.0;
  for (const auto& e : entries) {
    if (e.weights.weights.dim() != dim) {
      throw Error(Errc::DimensionMismatch,
                  "entry dim " + std::to_string(e.weights.weights.dim()) +
                      " != " + std::to_string(dim));
    }
    if (!std::isfinite(e.avg_weight)) {
      throw Error(Errc::NonFiniteInput, "avg_weight is not finite");
    }
    if (e.avg_weight < 0.0) {
      throw Error(Errc::InvalidArgument, "avg_weight must be >= 0");
    }
    total += e.avg_weight;
  }
  if (!(total > 0.0)) {
    throw Error(Errc::ZeroTotalWeight, "sum of avg_weight is zero");
  }

  // Seed with the first contributing entry instead of zeros so that a lone
  // entry keeps its signed zeros.
  std::vector<double> out;
  for (const auto& e : entries) {
    const double c = e.avg_weight / total;
    if (c == 0.0) continue;
    const auto w = e.weights.weights.values();
    if (out.empty()) {
      out.resize(dim);
      for (std::size_t k = 0; k < dim; ++k) out[k] = c * w[k];
    } else {
      for (std::size_t k = 0; k < dim; ++k) out[k] += c * w[k];
    }
  }
  return WeightVector(std::move(out));
}

/// lambda^gap, the multiplier applied to a response that trained on a server
/// model `gap` versions old.
inline double staleness_discount(std::uint64_t gap, double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw Error(Errc::InvalidLambda, "lambda must lie in (0,1]");
  }
  if (gap == 0) return 1.0;
  return std::pow(lambda, static_cast<double>(gap));
}

inline double l2_diff(const WeightVector& a, const WeightVector& b) {
  if (a.dim() != b.dim()) {
    throw Error(Errc::DimensionMismatch, "l2_diff on vectors of different dim");
  }
  // Scaled accumulation so huge components do not overflow the square.
  double scale = 0.0;
  double ssq = 1.0;
  for (std::size_t k = 0; k < a.dim(); ++k) {
    const double d = std::abs(a[k] - b[k]);
    if (d == 0.0) continue;
    if (scale < d) {
      ssq = 1.0 + ssq * (scale / d) * (scale / d);
      scale = d;
    } else {
      ssq += (d / scale) * (d / scale);
    }
  }
  return scale * std::sqrt(ssq);
}

}  // namespace fogfl
