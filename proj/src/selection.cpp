// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "thinner/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "thinner/error.hpp"
#include "thinner/random.hpp"

namespace thinner {
namespace {

constexpr int kBruteForceLimit = 20;

SelectionResult from_removed(int channels, std::vector<int> removed, double rate) {
  SelectionResult r;
  r.rate = rate;
  std::vector<char> gone(channels, 0);
  for (int c : removed) gone[c] = 1;
  for (int c = 0; c < channels; ++c)
    if (!gone[c]) r.kept.push_back(c);
  r.removed = std::move(removed);
  return r;
}

int conv_filters(const ModelGraph& model, std::string_view layer) {
  const LayerSpec& spec = model.layer(layer);
  if (spec.kind != LayerKind::conv) {
    throw ConfigError("layer '" + std::string(layer) + "' is not a conv layer");
  }
  return spec.out_channels;
}

}  // namespace

int kept_count(int channels, double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw ConfigError("compression rate " + std::to_string(rate) + " is outside (0, 1]");
  }
  const int k = static_cast<int>(std::round(channels * rate));
  return std::clamp(k, 1, channels);
}

GreedyState::GreedyState(const SampleSet& samples)
    : samples_(&samples),
      partial_(samples.rows, 0.0),
      in_removed_(samples.channels, 0) {}

double GreedyState::incremental_objective(int candidate) const {
  if (candidate < 0 || candidate >= samples_->channels) {
    throw ConfigError("channel " + std::to_string(candidate) + " out of range");
  }
  if (in_removed_[candidate]) {
    throw ConfigError("channel " + std::to_string(candidate) + " is already removed");
  }
  double total = 0.0;
  for (int i = 0; i < samples_->rows; ++i) {
    const double v = partial_[i] + samples_->x(i, candidate);
    total += v * v;
  }
  return total;
}

void GreedyState::add(int candidate) {
  objective_ = incremental_objective(candidate);
  for (int i = 0; i < samples_->rows; ++i) partial_[i] += samples_->x(i, candidate);
  in_removed_[candidate] = 1;
  order_.push_back(candidate);
}

double removal_objective(const SampleSet& samples, std::span<const int> removed) {
  double total = 0.0;
  for (int i = 0; i < samples.rows; ++i) {
    double v = 0.0;
    for (int c : removed) v += samples.x(i, c);
    total += v * v;
  }
  return total;
}

SelectionResult greedy_select(const SampleSet& samples, double rate) {
  const int channels = samples.channels;
  const int to_remove = channels - kept_count(channels, rate);
  GreedyState state(samples);
  std::vector<double> trace;
  for (int step = 0; step < to_remove; ++step) {
    int best = -1;
    double best_value = 0.0;
    for (int c = 0; c < channels; ++c) {
      if (state.removed(c)) continue;
      const double value = state.incremental_objective(c);
      if (best < 0 || value < best_value) {
        best = c;
        best_value = value;
      }
    }
    state.add(best);
    trace.push_back(state.objective());
  }
  SelectionResult r = from_removed(channels, state.removed_order(), rate);
  r.objective_trace = std::move(trace);
  return r;
}

SelectionResult brute_force_select(const SampleSet& samples, double rate) {
  const int channels = samples.channels;
  if (channels > kBruteForceLimit) {
    throw ConfigError("brute-force selection supports at most " +
                      std::to_string(kBruteForceLimit) + " channels, got " +
                      std::to_string(channels));
  }
  const int to_remove = channels - kept_count(channels, rate);
  // Objective of a removal set T is sum_{j,k in T} G_jk with G = X^T X.
  std::vector<double> gram(static_cast<std::size_t>(channels) * channels, 0.0);
  for (int i = 0; i < samples.rows; ++i) {
    const auto row = samples.row(i);
    for (int a = 0; a < channels; ++a)
      for (int b = 0; b < channels; ++b) gram[a * channels + b] += row[a] * row[b];
  }
  auto value_of = [&](const std::vector<int>& set) {
    double v = 0.0;
    for (int a : set)
      for (int b : set) v += gram[a * channels + b];
    return v;
  };

  std::vector<int> combo(to_remove);
  std::iota(combo.begin(), combo.end(), 0);
  std::vector<int> best = combo;
  double best_value = value_of(combo);
  // Lexicographic enumeration of to_remove-subsets; strict improvement
  // keeps the first optimum.
  while (to_remove > 0) {
    int i = to_remove - 1;
    while (i >= 0 && combo[i] == channels - to_remove + i) --i;
    if (i < 0) break;
    ++combo[i];
    for (int j = i + 1; j < to_remove; ++j) combo[j] = combo[j - 1] + 1;
    const double v = value_of(combo);
    if (v < best_value) {
      best_value = v;
      best = combo;
    }
  }
  SelectionResult r = from_removed(channels, best, rate);
  if (to_remove > 0) r.objective_trace.push_back(removal_objective(samples, best));
  return r;
}

std::vector<double> criterion_weight_sum(const ModelGraph& model, std::string_view layer) {
  const int filters = conv_filters(model, layer);
  const Tensor& w = model.params_of(layer).weight;
  const std::size_t per = w.shape().sample_size();
  std::vector<double> scores(filters, 0.0);
  for (int d = 0; d < filters; ++d) {
    const float* f = w.sample(d);
    double s = 0.0;
    for (std::size_t j = 0; j < per; ++j) s += std::abs(static_cast<double>(f[j]));
    scores[d] = s;
  }
  return scores;
}

std::vector<double> criterion_apoz(const ModelGraph& model, const Dataset& data,
                                   std::string_view layer) {
  const int filters = conv_filters(model, layer);
  // Find the ReLU on the single-consumer path (bn_affine may sit between).
  std::string cur(layer);
  int relu_index = -1;
  for (;;) {
    const auto consumers = model.consumers(cur);
    if (consumers.size() != 1) break;
    const LayerSpec& next = model.layers[consumers[0]];
    if (next.kind == LayerKind::relu) {
      relu_index = consumers[0];
      break;
    }
    if (next.kind != LayerKind::bn_affine) break;
    cur = next.id;
  }
  if (relu_index < 0) {
    throw ConfigError("APoZ needs a ReLU after '" + std::string(layer) + "'");
  }
  std::vector<std::int64_t> zeros(filters, 0);
  std::int64_t per_channel = 0;
  constexpr int kChunk = 32;
  for (int first = 0; first < data.size(); first += kChunk) {
    const int count = std::min(kChunk, data.size() - first);
    const auto acts = forward_all(model, data.images.slice_samples(first, count), {}, relu_index);
    const Tensor& a = acts[relu_index];
    const std::size_t plane = a.shape().plane();
    for (int n = 0; n < count; ++n)
      for (int c = 0; c < filters; ++c) {
        const float* p = a.sample(n) + c * plane;
        for (std::size_t i = 0; i < plane; ++i) zeros[c] += (p[i] == 0.0f);
      }
    per_channel += static_cast<std::int64_t>(count) * plane;
  }
  std::vector<double> scores(filters);
  for (int c = 0; c < filters; ++c) scores[c] = static_cast<double>(zeros[c]) / per_channel;
  return scores;
}

SelectionResult criterion_random(int channels, double rate, std::uint64_t seed) {
  const int keep = kept_count(channels, rate);
  Rng rng = make_rng(seed, "selection");
  std::vector<int> order = sample_without_replacement(rng, channels, channels);
  std::vector<int> removed(order.begin() + keep, order.end());
  return from_removed(channels, std::move(removed), rate);
}

SelectionResult criterion_random(const ModelGraph& model, std::string_view layer, double rate,
                                 std::uint64_t seed) {
  return criterion_random(conv_filters(model, layer), rate, seed);
}

SelectionResult keep_highest(std::span<const double> scores, double rate) {
  const int channels = static_cast<int>(scores.size());
  const int keep = kept_count(channels, rate);
  std::vector<int> order(channels);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  std::vector<int> removed(order.begin() + keep, order.end());
  std::reverse(removed.begin(), removed.end());
  return from_removed(channels, std::move(removed), rate);
}

SelectionResult keep_lowest(std::span<const double> scores, double rate) {
  const int channels = static_cast<int>(scores.size());
  const int keep = kept_count(channels, rate);
  std::vector<int> order(channels);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] < scores[b]; });
  std::vector<int> removed(order.begin() + keep, order.end());
  std::reverse(removed.begin(), removed.end());
  return from_removed(channels, std::move(removed), rate);
}

nlohmann::json to_json(const SelectionResult& r) {
  return {{"kept", r.kept},
          {"removed", r.removed},
          {"objective_trace", r.objective_trace},
          {"rate", r.rate}};
}

}  // namespace thinner
