// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "thinner/model.hpp"
#include "thinner/model_io.hpp"

namespace thinner {

/// A conv layer whose filters get pruned, the conv that reads its
/// (activated, possibly pooled) output, and the single-consumer chain of
/// relu/maxpool/bn_affine layers between them.
struct PruneSite {
  std::string layer;
  std::string next;
  std::vector<std::string> path;

  /// Layer whose output is the input window of `next`.
  const std::string& window_source() const { return path.empty() ? layer : path.back(); }
  bool operator==(const PruneSite&) const = default;
};

/// Walks forward from conv `layer` to the next conv. Throws ConfigError if
/// the output fans out, hits an add_junction (naming it) or never reaches a
/// conv.
PruneSite resolve_site(const ModelGraph& model, std::string_view layer);

/// Per-channel contributions of sampled output scalars of `site.next`:
/// row i holds xhat(i, c) for every input channel c and yhat(i) is the
/// output value minus its bias, so each row sums to yhat.
struct SampleSet {
  int rows = 0;
  int channels = 0;
  std::vector<double> xhat;  // rows x channels, row-major
  std::vector<double> yhat;
  PruneSite site;
  std::uint64_t seed = 0;

  double x(int row, int channel) const {
    return xhat[static_cast<std::size_t>(row) * channels + channel];
  }
  std::span<const double> row(int i) const {
    return {xhat.data() + static_cast<std::size_t>(i) * channels,
            static_cast<std::size_t>(channels)};
  }
};

/// Draws `images` dataset images and, per image, `locations_per_image`
/// distinct (filter, row, col) positions of site.next's pre-activation
/// output. Rows are ordered by (image draw, location draw).
SampleSet collect_samples(const ModelGraph& model, const Dataset& data,
                          const PruneSite& site, int images,
                          int locations_per_image, std::uint64_t seed);

/// Sum over rows of (yhat - sum_{j in keep} w_j * xhat_j)^2 with w
/// defaulting to ones. An empty keep set yields sum yhat^2.
double reconstruction_error(const SampleSet& samples, std::span<const int> keep,
                            std::span<const double> w = {});

/// Header: channel ids then "yhat".
void write_samples_csv(const SampleSet& samples, std::ostream& os);

}  // namespace thinner
