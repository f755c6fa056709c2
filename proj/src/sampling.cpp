// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "thinner/sampling.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>

#include "thinner/error.hpp"
#include "thinner/parallel.hpp"
#include "thinner/random.hpp"

namespace thinner {

PruneSite resolve_site(const ModelGraph& model, std::string_view layer) {
  const LayerSpec& first = model.layer(layer);
  if (first.kind != LayerKind::conv) {
    throw ConfigError("prune site '" + std::string(layer) + "' is not a conv layer");
  }
  PruneSite site{std::string(layer), {}, {}};
  std::string cur(layer);
  for (;;) {
    const auto consumers = model.consumers(cur);
    if (consumers.empty()) {
      throw ConfigError("no conv layer follows '" + std::string(layer) + "'");
    }
    if (consumers.size() > 1) {
      throw ConfigError("output of '" + cur + "' feeds " + std::to_string(consumers.size()) +
                        " layers; '" + std::string(layer) + "' cannot be pruned");
    }
    const LayerSpec& next = model.layers[consumers[0]];
    switch (next.kind) {
      case LayerKind::conv:
        site.next = next.id;
        return site;
      case LayerKind::relu:
      case LayerKind::maxpool:
      case LayerKind::bn_affine:
        site.path.push_back(next.id);
        cur = next.id;
        break;
      case LayerKind::add_junction:
        throw ConfigError("pruning '" + std::string(layer) +
                          "' would change the channel count entering add_junction '" +
                          next.id + "'");
      default:
        throw ConfigError("no conv layer follows '" + std::string(layer) + "' (reached " +
                          std::string(to_string(next.kind)) + " '" + next.id + "')");
    }
  }
}

SampleSet collect_samples(const ModelGraph& model, const Dataset& data,
                          const PruneSite& site, int images,
                          int locations_per_image, std::uint64_t seed) {
  if (images < 1 || locations_per_image < 1) {
    throw ConfigError("sample counts must be positive");
  }
  if (images > data.size()) {
    throw ConfigError("requested " + std::to_string(images) + " images but dataset has " +
                      std::to_string(data.size()));
  }
  const int next_index = model.index_of(site.next);
  const int source_index = model.index_of(site.window_source());
  if (next_index < 0 || source_index < 0) throw ConfigError("prune site refers to unknown layers");
  const LayerSpec& next = model.layers[next_index];
  if (next.kind != LayerKind::conv) throw ConfigError("site.next '" + site.next + "' is not a conv");

  const auto shapes = infer_shapes(model, 1);
  const Shape in = shapes[source_index];
  const Shape out = shapes[next_index];
  const int channels = in.c;
  const int k = next.kernel;
  if (channels < 2) {
    throw ConfigError("site '" + site.layer + "' has a single channel; nothing to select");
  }
  if (in.h + 2 * next.pad < k || in.w + 2 * next.pad < k) {
    throw ShapeError("spatial extent of " + in.str() + " is smaller than the " +
                     std::to_string(k) + "x" + std::to_string(k) + " kernel of '" + site.next + "'");
  }
  const int positions = out.c * out.h * out.w;
  if (locations_per_image > positions) {
    throw ConfigError("cannot draw " + std::to_string(locations_per_image) +
                      " distinct locations from " + std::to_string(positions));
  }

  Rng rng = make_rng(seed, "sampling");
  const std::vector<int> picked = sample_without_replacement(rng, data.size(), images);
  std::vector<std::vector<int>> locations(images);
  for (auto& loc : locations) loc = sample_without_replacement(rng, positions, locations_per_image);

  SampleSet s;
  s.rows = images * locations_per_image;
  s.channels = channels;
  s.xhat.assign(static_cast<std::size_t>(s.rows) * channels, 0.0);
  s.yhat.assign(s.rows, 0.0);
  s.site = site;
  s.seed = seed;

  const auto& p = model.params_of(site.next);
  const float* w = p.weight.data().data();
  constexpr int kChunk = 16;
  for (int first = 0; first < images; first += kChunk) {
    const int count = std::min(kChunk, images - first);
    const Tensor batch = gather_samples(
        data.images, std::span<const int>(picked).subspan(first, count));
    const auto acts = forward_all(model, batch, {}, next_index);
    const Tensor& x = acts[source_index];
    const Tensor& y = acts[next_index];
    parallel_for(count, [&](int b) {
      const int img = first + b;
      for (int j = 0; j < locations_per_image; ++j) {
        const int pos = locations[img][j];
        const int d = pos / (out.h * out.w);
        const int oy = (pos / out.w) % out.h;
        const int ox = pos % out.w;
        const std::size_t row = static_cast<std::size_t>(img) * locations_per_image + j;
        double* xr = s.xhat.data() + row * channels;
        for (int c = 0; c < channels; ++c) {
          const float* wk = w + ((static_cast<std::size_t>(d) * channels + c) * k) * k;
          double acc = 0.0;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * next.stride - next.pad + ky;
            if (iy < 0 || iy >= in.h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * next.stride - next.pad + kx;
              if (ix < 0 || ix >= in.w) continue;
              acc += static_cast<double>(wk[ky * k + kx]) * x.at(b, c, iy, ix);
            }
          }
          xr[c] = acc;
        }
        s.yhat[row] = static_cast<double>(y.at(b, d, oy, ox)) - static_cast<double>(p.bias[d]);
      }
    });
  }
  return s;
}

double reconstruction_error(const SampleSet& samples, std::span<const int> keep,
                            std::span<const double> w) {
  if (!w.empty() && w.size() != keep.size()) {
    throw ConfigError("weight vector length " + std::to_string(w.size()) +
                      " does not match kept channel count " + std::to_string(keep.size()));
  }
  for (int c : keep)
    if (c < 0 || c >= samples.channels) {
      throw ConfigError("channel " + std::to_string(c) + " out of range");
    }
  double total = 0.0;
  for (int i = 0; i < samples.rows; ++i) {
    const auto row = samples.row(i);
    double approx = 0.0;
    for (std::size_t j = 0; j < keep.size(); ++j) approx += (w.empty() ? 1.0 : w[j]) * row[keep[j]];
    const double r = samples.yhat[i] - approx;
    total += r * r;
  }
  return total;
}

void write_samples_csv(const SampleSet& samples, std::ostream& os) {
  for (int c = 0; c < samples.channels; ++c) os << c << ',';
  os << "yhat\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (int i = 0; i < samples.rows; ++i) {
    for (double v : samples.row(i)) os << v << ',';
    os << samples.yhat[i] << '\n';
  }
}

}  // namespace thinner
