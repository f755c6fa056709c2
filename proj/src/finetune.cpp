// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "thinner/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>

#include "thinner/random.hpp"

namespace thinner {

double TrainConfig::lr_at(int epoch) const {
  double lr = learning_rate;
  for (const auto& [start, value] : lr_steps)
    if (epoch >= start) lr = value;
  return lr;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (learning_rate < 0.0 || momentum < 0.0 || momentum >= 1.0 || weight_decay < 0.0) {
    throw ConfigError("learning rate, momentum and weight decay must be non-negative (momentum < 1)");
  }
  for (const auto& [start, value] : lr_steps)
    if (start < 0 || value < 0.0) throw ConfigError("invalid learning-rate step");
}

TrainConfig TrainConfig::desk_default(int epochs, std::uint64_t seed) {
  TrainConfig c;
  c.epochs = epochs;
  c.seed = seed;
  const int drop = (2 * epochs + 2) / 3;
  if (drop < epochs) c.lr_steps.push_back({drop, c.learning_rate / 10.0});
  return c;
}

TrainConfig TrainConfig::per_site_default(std::uint64_t seed) {
  TrainConfig c;
  c.epochs = 1;
  c.learning_rate = 1e-3;
  c.seed = seed;
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& [e, lr] : c.lr_steps) steps.push_back({{"epoch", e}, {"lr", lr}});
  return {{"epochs", c.epochs},          {"learning_rate", c.learning_rate},
          {"lr_steps", steps},           {"batch_size", c.batch_size},
          {"momentum", c.momentum},      {"weight_decay", c.weight_decay},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.momentum = j.value("momentum", c.momentum);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.seed = j.value("seed", c.seed);
  if (j.contains("lr_steps"))
    for (const auto& s : j.at("lr_steps")) c.lr_steps.push_back({s.at("epoch").get<int>(), s.at("lr").get<double>()});
  c.validate();
  return c;
}

int logits_layer(const ModelGraph& model) {
  const int last = static_cast<int>(model.layers.size()) - 1;
  if (model.layers[last].kind == LayerKind::softmax) {
    const auto& in = model.layers[last].inputs;
    return in.empty() ? last : model.index_of(in[0]);
  }
  return last;
}

Tensor cross_entropy_grad(const Tensor& logits, std::span<const int> labels,
                          std::vector<double>& losses) {
  const Shape& s = logits.shape();
  const std::size_t classes = s.sample_size();
  if (static_cast<int>(labels.size()) != s.n) throw ShapeError("label count does not match batch");
  Tensor grad(s);
  losses.assign(s.n, 0.0);
  for (int n = 0; n < s.n; ++n) {
    const float* z = logits.sample(n);
    const double peak = *std::max_element(z, z + classes);
    double total = 0.0;
    for (std::size_t k = 0; k < classes; ++k) total += std::exp(z[k] - peak);
    const double log_total = std::log(total);
    const auto label = static_cast<std::size_t>(labels[n]);
    if (label >= classes) throw ConfigError("label " + std::to_string(labels[n]) + " out of range");
    losses[n] = -(z[label] - peak - log_total);
    float* g = grad.sample(n);
    for (std::size_t k = 0; k < classes; ++k) {
      const double p = std::exp(z[k] - peak - log_total);
      g[k] = static_cast<float>((p - (k == label ? 1.0 : 0.0)) / s.n);
    }
  }
  return grad;
}

void sgd_step(ModelGraph& model, const std::map<std::string, LayerParams>& grads,
              Velocity& velocity, double lr, double momentum, double weight_decay) {
  for (const auto& spec : model.layers) {
    if (!has_params(spec.kind)) continue;
    auto git = grads.find(spec.id);
    if (git == grads.end()) continue;
    auto& p = model.params_of(spec.id);
    auto [vit, fresh] = velocity.try_emplace(spec.id);
    if (fresh) vit->second = {Tensor(p.weight.shape()), std::vector<float>(p.bias.size())};
    auto& v = vit->second;

    auto w = p.weight.data();
    auto gw = git->second.weight.data();
    auto vw = v.weight.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double step = momentum * vw[i] + gw[i] + weight_decay * w[i];
      vw[i] = static_cast<float>(step);
      w[i] = static_cast<float>(static_cast<double>(w[i]) - lr * step);
    }
    if (spec.kind == LayerKind::conv && !spec.bias) continue;
    for (std::size_t i = 0; i < p.bias.size(); ++i) {
      const double step = momentum * v.bias[i] + git->second.bias[i];
      v.bias[i] = static_cast<float>(step);
      p.bias[i] = static_cast<float>(static_cast<double>(p.bias[i]) - lr * step);
    }
  }
}

TrainResult train(ModelGraph model, const Dataset& data, const TrainConfig& config) {
  config.validate();
  data.validate(model.classes);
  const int logits = logits_layer(model);
  const int count = data.size();
  Rng rng = make_rng(config.seed, "shuffle");
  Velocity velocity;
  std::vector<int> order(count);
  std::iota(order.begin(), order.end(), 0);

  TrainResult result{std::move(model), {}};
  ModelGraph& m = result.model;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = config.lr_at(epoch);
    std::vector<double> sample_loss(count, 0.0);
    std::vector<char> sample_correct(count, 0);
    for (int first = 0; first < count; first += config.batch_size) {
      const int size = std::min(config.batch_size, count - first);
      const std::span<const int> idx(order.data() + first, size);
      const Dataset batch = data.subset(idx);
      const auto acts = forward_all(m, batch.images, {}, logits);
      std::vector<double> losses;
      const Tensor grad = cross_entropy_grad(acts[logits], batch.labels, losses);
      const std::size_t classes = acts[logits].shape().sample_size();
      for (int b = 0; b < size; ++b) {
        if (!std::isfinite(losses[b])) {
          throw TrainingDiverged(epoch, "training diverged in epoch " + std::to_string(epoch) +
                                            ": loss is not finite");
        }
        sample_loss[idx[b]] = losses[b];
        const float* z = acts[logits].sample(b);
        sample_correct[idx[b]] =
            static_cast<int>(std::max_element(z, z + classes) - z) == batch.labels[b];
      }
      const GraphGrads g = backward(m, batch.images, acts, grad, logits);
      sgd_step(m, g.params, velocity, lr, config.momentum, config.weight_decay);
    }
    // Index-ordered sums keep the epoch metrics independent of shuffling.
    double loss = 0.0;
    int correct = 0;
    for (int i = 0; i < count; ++i) {
      loss += sample_loss[i];
      correct += sample_correct[i];
    }
    result.history.push_back({epoch, loss / count, static_cast<double>(correct) / count});
    for (const auto& [id, p] : m.params)
      for (float v : p.weight.data())
        if (!std::isfinite(v)) {
          throw TrainingDiverged(epoch, "training diverged in epoch " + std::to_string(epoch) +
                                            ": parameters of '" + id + "' are not finite");
        }
  }
  return result;
}

EvalResult evaluate(const ModelGraph& model, const Dataset& data) {
  data.validate(model.classes);
  const int last = static_cast<int>(model.layers.size()) - 1;
  const int logits = logits_layer(model);
  double loss = 0.0;
  int correct = 0;
  constexpr int kChunk = 64;
  for (int first = 0; first < data.size(); first += kChunk) {
    const int size = std::min(kChunk, data.size() - first);
    const auto acts = forward_all(model, data.images.slice_samples(first, size));
    std::vector<double> losses;
    const std::span<const int> labels(data.labels.data() + first, size);
    cross_entropy_grad(acts[logits], labels, losses);
    const std::size_t classes = acts[last].shape().sample_size();
    for (int b = 0; b < size; ++b) {
      loss += losses[b];
      const float* y = acts[last].sample(b);
      correct += static_cast<int>(std::max_element(y, y + classes) - y) == labels[b];
    }
  }
  return {static_cast<double>(correct) / data.size(), loss / data.size()};
}

void write_history_csv(const std::vector<EpochMetrics>& history, std::ostream& os) {
  os << "epoch,loss,accuracy\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& h : history) os << h.epoch << ',' << h.loss << ',' << h.accuracy << '\n';
}

}  // namespace thinner
