// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "thinner/lsq_prune.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

#include "thinner/error.hpp"

namespace thinner {
namespace {

constexpr double kConditionLimit = 1e12;
constexpr double kRidgeFactor = 1e-6;

// In-place Cholesky of a dense SPD matrix (lower triangle). Returns the
// squared ratio of extreme pivots as a condition estimate, or nullopt when
// a pivot is not positive.
std::optional<double> cholesky(std::vector<double>& a, int n) {
  double lo = 0.0, hi = 0.0;
  for (int j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (int k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0)) return std::nullopt;
    const double l = std::sqrt(d);
    a[j * n + j] = l;
    lo = j == 0 ? l : std::min(lo, l);
    hi = std::max(hi, l);
    for (int i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (int k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / l;
    }
  }
  return (hi / lo) * (hi / lo);
}

std::vector<double> cholesky_solve(const std::vector<double>& l, int n, std::vector<double> b) {
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < i; ++k) b[i] -= l[i * n + k] * b[k];
    b[i] /= l[i * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    for (int k = i + 1; k < n; ++k) b[i] -= l[k * n + i] * b[k];
    b[i] /= l[i * n + i];
  }
  return b;
}

void check_kept(std::span<const int> kept, int channels) {
  if (kept.empty()) throw ConfigError("kept channel set is empty");
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (kept[i] < 0 || kept[i] >= channels) {
      throw ConfigError("kept channel " + std::to_string(kept[i]) + " out of range for " +
                        std::to_string(channels) + " channels");
    }
    if (i > 0 && kept[i] <= kept[i - 1]) {
      throw ConfigError("kept channels must be strictly ascending");
    }
  }
}

// Filters of a conv weight tensor restricted to the listed input channels.
Tensor slice_in_channels(const Tensor& w, std::span<const int> kept) {
  const Shape& s = w.shape();
  Tensor out({s.n, static_cast<int>(kept.size()), s.h, s.w});
  const std::size_t plane = s.plane();
  for (int d = 0; d < s.n; ++d)
    for (std::size_t j = 0; j < kept.size(); ++j)
      std::copy_n(w.sample(d) + kept[j] * plane, plane, out.sample(d) + j * plane);
  return out;
}

}  // namespace

std::vector<double> least_squares_weights(const SampleSet& samples, std::span<const int> kept) {
  check_kept(kept, samples.channels);
  const int k = static_cast<int>(kept.size());
  if (samples.rows < k) {
    throw ConfigError("least squares is underdetermined: " + std::to_string(samples.rows) +
                      " samples for " + std::to_string(k) + " channels");
  }
  std::vector<double> gram(static_cast<std::size_t>(k) * k, 0.0);
  std::vector<double> rhs(k, 0.0);
  for (int i = 0; i < samples.rows; ++i) {
    const auto row = samples.row(i);
    for (int a = 0; a < k; ++a) {
      const double xa = row[kept[a]];
      rhs[a] += xa * samples.yhat[i];
      for (int b = 0; b <= a; ++b) gram[a * k + b] += xa * row[kept[b]];
    }
  }
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b) gram[a * k + b] = gram[b * k + a];

  double trace = 0.0;
  for (int a = 0; a < k; ++a) trace += gram[a * k + a];
  if (!(trace > 0.0)) return std::vector<double>(k, 1.0);  // all kept columns are zero

  std::vector<double> factor = gram;
  const auto cond = cholesky(factor, k);
  if (!cond || *cond > kConditionLimit) {
    factor = gram;
    const double ridge = kRidgeFactor * trace / k;
    for (int a = 0; a < k; ++a) factor[a * k + a] += ridge;
    if (!cholesky(factor, k)) throw Error("least squares: ridge-regularized Gram matrix is not positive definite");
  }
  return cholesky_solve(factor, k, std::move(rhs));
}

ModelGraph fold_scaling(ModelGraph model, const PruneSite& site, std::span<const int> kept,
                        std::span<const double> w) {
  if (kept.size() != w.size()) {
    throw ConfigError("scaling vector length " + std::to_string(w.size()) +
                      " does not match kept channel count " + std::to_string(kept.size()));
  }
  Tensor& weights = model.params_of(site.next).weight;
  const Shape& s = weights.shape();
  check_kept(kept, s.c);
  const std::size_t plane = s.plane();
  for (int d = 0; d < s.n; ++d)
    for (std::size_t j = 0; j < kept.size(); ++j) {
      float* p = weights.sample(d) + kept[j] * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] = static_cast<float>(p[i] * w[j]);
    }
  return model;
}

ModelGraph prune_layer_pair(ModelGraph model, const PruneSite& site, std::span<const int> kept) {
  const PruneSite resolved = resolve_site(model, site.layer);
  if (!(resolved == site)) {
    throw ConfigError("prune site '" + site.layer + "' -> '" + site.next +
                      "' does not match the model topology");
  }
  LayerSpec& spec = model.layer(site.layer);
  check_kept(kept, spec.out_channels);
  const int keep = static_cast<int>(kept.size());

  LayerParams& p = model.params_of(site.layer);
  p.weight = gather_samples(p.weight, kept);
  std::vector<float> bias(keep);
  for (int j = 0; j < keep; ++j) bias[j] = p.bias[kept[j]];
  p.bias = std::move(bias);
  spec.out_channels = keep;

  for (const auto& id : site.path) {
    if (model.layer(id).kind != LayerKind::bn_affine) continue;
    LayerParams& bn = model.params_of(id);
    Tensor scale({1, keep, 1, 1});
    std::vector<float> shift(keep);
    for (int j = 0; j < keep; ++j) {
      scale.at(0, j, 0, 0) = bn.weight.at(0, kept[j], 0, 0);
      shift[j] = bn.bias[kept[j]];
    }
    bn.weight = std::move(scale);
    bn.bias = std::move(shift);
  }

  LayerParams& next = model.params_of(site.next);
  next.weight = slice_in_channels(next.weight, kept);
  model.validate();
  return model;
}

std::vector<PruneSite> resnet_block_sites(const ModelGraph& model) {
  std::vector<PruneSite> sites;
  for (const auto& junction : model.layers) {
    if (junction.kind != LayerKind::add_junction) continue;
    for (const auto& input : junction.inputs) {
      // Walk the branch back to the fork that feeds both branches.
      std::vector<std::string> convs;
      std::string cur = input;
      bool projection = false;
      while (!cur.empty() && model.consumers(cur).size() == 1) {
        const LayerSpec& l = model.layer(cur);
        if (l.kind == LayerKind::add_junction || l.inputs.size() != 1) break;
        if (l.kind == LayerKind::conv) {
          projection = projection || l.projection;
          convs.push_back(l.id);
        }
        cur = l.inputs[0];
      }
      if (projection || convs.size() < 2) continue;
      std::reverse(convs.begin(), convs.end());
      // Layers 1..n-1 of the branch; the block-final conv keeps its width.
      const std::size_t last = std::min<std::size_t>(2, convs.size() - 1);
      for (std::size_t i = 0; i < last; ++i) sites.push_back(resolve_site(model, convs[i]));
    }
  }
  return sites;
}

std::vector<PruneSite> prunable_sites(const ModelGraph& model) {
  const bool residual = std::any_of(model.layers.begin(), model.layers.end(), [](const LayerSpec& l) {
    return l.kind == LayerKind::add_junction;
  });
  if (residual) return resnet_block_sites(model);
  std::vector<PruneSite> sites;
  for (const auto& l : model.layers) {
    if (l.kind != LayerKind::conv || l.projection) continue;
    try {
      sites.push_back(resolve_site(model, l.id));
    } catch (const ConfigError&) {
    }
  }
  return sites;
}

}  // namespace thinner
