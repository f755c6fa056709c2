// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "thinner/error.hpp"
#include "thinner/model.hpp"
#include "thinner/model_io.hpp"

namespace thinner {

struct TrainConfig {
  int epochs = 1;
  double learning_rate = 1e-2;
  /// (first epoch, learning rate) steps overriding learning_rate from that
  /// epoch on. Epochs are 0-based.
  std::vector<std::pair<int, double>> lr_steps;
  int batch_size = 32;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;

  double lr_at(int epoch) const;
  void validate() const;

  /// batch 32, lr 1e-2 dropped 10x at 2/3 of the epochs, momentum 0.9,
  /// decay 1e-4.
  static TrainConfig desk_default(int epochs, std::uint64_t seed = 0);
  /// Brief per-layer fine-tune: one epoch at 1e-3, otherwise desk defaults.
  static TrainConfig per_site_default(std::uint64_t seed = 0);
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  ModelGraph model;
  std::vector<EpochMetrics> history;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(int epoch, const std::string& what) : Error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

/// Mini-batch SGD with momentum and weight decay on softmax cross-entropy.
/// Shuffling is seeded, so runs are reproducible.
TrainResult train(ModelGraph model, const Dataset& data, const TrainConfig& config);

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
};

/// Top-1 accuracy under argmax of the final layer and mean cross-entropy.
EvalResult evaluate(const ModelGraph& model, const Dataset& data);

/// Index of the layer holding pre-softmax scores (the layer before a final
/// softmax, else the last layer).
int logits_layer(const ModelGraph& model);

/// Velocity buffers keyed like ModelGraph::params.
using Velocity = std::map<std::string, LayerParams>;

/// One update: v = momentum * v + g + decay * w (decay on weights only);
/// w -= lr * v. Fixed zero biases of bias-free convs are never updated.
void sgd_step(ModelGraph& model, const std::map<std::string, LayerParams>& grads,
              Velocity& velocity, double lr, double momentum, double weight_decay);

/// Mean softmax cross-entropy of `logits` against labels and its gradient
/// w.r.t. the logits. Per-sample losses are written to `losses`.
Tensor cross_entropy_grad(const Tensor& logits, std::span<const int> labels,
                          std::vector<double>& losses);

void write_history_csv(const std::vector<EpochMetrics>& history, std::ostream& os);

}  // namespace thinner
