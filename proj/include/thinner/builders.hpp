// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <vector>

#include "thinner/model.hpp"

namespace thinner {

struct BuildOptions {
  std::uint64_t seed = 0;
  /// When false, blobs are allocated but left at zero (structural use).
  bool init_weights = true;
};

/// VGG-16 (configuration D) for 3x224x224 inputs, three FC layers.
ModelGraph build_vgg16(int classes, BuildOptions opts = {});
/// VGG-16 conv stack with the FC layers replaced by GAP + one FC.
ModelGraph build_vgg16_gap(int classes, BuildOptions opts = {});
/// ResNet-50 with bottleneck blocks (stride on the first 1x1 conv),
/// bias-free convs followed by bn_affine, projection shortcuts tagged.
ModelGraph build_resnet50(int classes, BuildOptions opts = {});

/// Small plain chain: per entry of `widths`, conv3x3(pad 1) -> relu, with a
/// 2x2 maxpool after every conv except the last; then GAP -> FC -> softmax.
ModelGraph build_plain_cnn(Shape chw, const std::vector<int>& widths,
                           int classes, BuildOptions opts = {});

/// Stem conv followed by `blocks` bottleneck residual blocks (conv1x1 ->
/// bn -> relu -> conv3x3 -> bn -> relu -> conv1x1 -> bn, add, relu), then
/// GAP -> FC -> softmax. The first block uses a projection shortcut.
ModelGraph build_residual_cnn(Shape chw, int width, int bottleneck, int blocks,
                              int classes, BuildOptions opts = {});

/// Re-initializes every parameter blob (He-normal for conv/fc weights,
/// zero biases, unit bn scales, zero shifts).
void initialize_weights(ModelGraph& model, std::uint64_t seed);

/// Allocates zero blobs for every parameterized layer from inferred shapes.
void allocate_params(ModelGraph& model);

}  // namespace thinner
