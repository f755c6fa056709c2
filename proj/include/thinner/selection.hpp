// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "thinner/model_io.hpp"
#include "thinner/sampling.hpp"

namespace thinner {

struct SelectionResult {
  std::vector<int> kept;     // ascending channel ids
  std::vector<int> removed;  // in removal order
  /// Objective sum_i (sum_{j in T} xhat_ij)^2 after each greedy addition.
  std::vector<double> objective_trace;
  double rate = 1.0;
};

/// round(channels * rate), halves away from zero, at least 1. Throws
/// ConfigError unless 0 < rate <= 1.
int kept_count(int channels, double rate);

/// Running state of the removal-set objective. Caches per-row partial sums
/// over the removed set so one candidate evaluation is O(rows).
class GreedyState {
 public:
  explicit GreedyState(const SampleSet& samples);

  double objective() const { return objective_; }
  bool removed(int channel) const { return in_removed_[channel] != 0; }
  const std::vector<int>& removed_order() const { return order_; }

  /// Objective if `candidate` were added. Throws if already removed.
  double incremental_objective(int candidate) const;
  void add(int candidate);

 private:
  const SampleSet* samples_;
  std::vector<double> partial_;
  std::vector<char> in_removed_;
  std::vector<int> order_;
  double objective_ = 0.0;
};

/// Greedy removal: repeatedly moves the channel with the smallest
/// resulting objective into the removed set (lowest id on ties) until
/// channels - kept_count(channels, rate) are removed.
SelectionResult greedy_select(const SampleSet& samples, double rate);

/// Exhaustive search over all removal sets of the required size; the
/// lexicographically first optimum wins. Limited to 20 channels.
SelectionResult brute_force_select(const SampleSet& samples, double rate);

/// Removal-set objective sum_i (sum_{j in removed} xhat_ij)^2 evaluated
/// from scratch.
double removal_objective(const SampleSet& samples, std::span<const int> removed);

/// Sum of |w| over each filter of conv `layer`.
std::vector<double> criterion_weight_sum(const ModelGraph& model, std::string_view layer);

/// Fraction of exact zeros per output channel of the ReLU following conv
/// `layer`, over every image of `data`.
std::vector<double> criterion_apoz(const ModelGraph& model, const Dataset& data,
                                   std::string_view layer);

/// Uniform random kept set of the required size.
SelectionResult criterion_random(int channels, double rate, std::uint64_t seed);
SelectionResult criterion_random(const ModelGraph& model, std::string_view layer,
                                 double rate, std::uint64_t seed);

/// Keeps the kept_count highest scores (lower id on ties); removal order
/// is ascending score.
SelectionResult keep_highest(std::span<const double> scores, double rate);
/// Keeps the kept_count lowest scores (lower id on ties); removal order is
/// descending score.
SelectionResult keep_lowest(std::span<const double> scores, double rate);

nlohmann::json to_json(const SelectionResult& r);

}  // namespace thinner
