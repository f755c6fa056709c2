// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <span>
#include <vector>

#include "thinner/model.hpp"
#include "thinner/sampling.hpp"

namespace thinner {

/// Least-squares channel weights: argmin_w sum_i (yhat_i - w^T xhat*_i)^2
/// where xhat* keeps only the `kept` columns (result ordered like `kept`).
/// Solved through the normal equations by Cholesky; a ridge term of
/// 1e-6 * trace / |kept| is added when the Gram matrix is singular or its
/// condition estimate exceeds 1e12.
std::vector<double> least_squares_weights(const SampleSet& samples,
                                          std::span<const int> kept);

/// Multiplies input channel kept[j] of every filter of site.next by w[j].
ModelGraph fold_scaling(ModelGraph model, const PruneSite& site,
                        std::span<const int> kept, std::span<const double> w);

/// Keeps only filters `kept` of site.layer (and their biases), the matching
/// channels of bn_affine layers on the path and the matching input
/// channels of site.next.
ModelGraph prune_layer_pair(ModelGraph model, const PruneSite& site,
                            std::span<const int> kept);

/// Sites for the first two convs of every residual branch; block-final
/// convs and projection shortcuts are never returned.
std::vector<PruneSite> resnet_block_sites(const ModelGraph& model);

/// Every conv that can be pruned as layer i: residual-block rule when the
/// model has add_junctions, otherwise every conv followed by another conv.
std::vector<PruneSite> prunable_sites(const ModelGraph& model);

}  // namespace thinner
