// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "thinner/tensor.hpp"

namespace thinner {

enum class LayerKind { conv, relu, maxpool, gap, fc, bn_affine, add_junction, softmax };

std::string_view to_string(LayerKind kind);
/// Throws FormatError on an unknown name.
LayerKind parse_layer_kind(std::string_view name);

struct LayerSpec {
  std::string id;
  LayerKind kind = LayerKind::relu;
  /// Producer ids; empty means the network input. add_junction takes two.
  std::vector<std::string> inputs;

  int out_channels = 0;  // conv filters / fc outputs
  int kernel = 1;        // conv
  int stride = 1;        // conv, maxpool
  int pad = 0;           // conv, maxpool
  int window = 2;        // maxpool
  bool bias = true;      // conv: false means a fixed zero bias
  bool projection = false;  // conv on a residual shortcut path

  bool operator==(const LayerSpec&) const = default;
};

/// Parameter blobs of one layer.
///   conv:      weight (D, C, K, K), bias length D
///   fc:        weight (in, out, 1, 1), bias length out
///   bn_affine: weight (1, C, 1, 1) holds the scales, bias the shifts
struct LayerParams {
  Tensor weight;
  std::vector<float> bias;
};

inline bool has_params(LayerKind kind) {
  return kind == LayerKind::conv || kind == LayerKind::fc ||
         kind == LayerKind::bn_affine;
}

/// Ordered (topologically sorted) layer list plus parameter blobs. The
/// last layer is the single network output.
struct ModelGraph {
  std::vector<LayerSpec> layers;
  std::map<std::string, LayerParams> params;
  Shape input_shape{1, 3, 32, 32};  // n is ignored
  int classes = 2;

  int index_of(std::string_view id) const;  // -1 if absent
  const LayerSpec& layer(std::string_view id) const;
  LayerSpec& layer(std::string_view id);
  const LayerParams& params_of(std::string_view id) const;
  LayerParams& params_of(std::string_view id);
  /// Indices of layers that read the output of `id`.
  std::vector<int> consumers(std::string_view id) const;

  /// Checks ids, DAG order, a single output, blob presence/shapes and
  /// shape inference. Throws ShapeError/FormatError.
  void validate() const;

  std::size_t parameter_count() const;
};

/// Per-layer output shapes for a batch of `batch` inputs.
std::vector<Shape> infer_shapes(const ModelGraph& model, int batch = 1);
std::vector<Shape> infer_shapes(const ModelGraph& model, const Shape& input);

/// Per-channel multipliers applied to a layer's output during forward.
struct ChannelScaling {
  std::string layer;
  std::vector<float> factors;
};

/// Runs the graph and returns every layer's output (indexed like
/// model.layers). Stops after layer `last` when given.
std::vector<Tensor> forward_all(const ModelGraph& model, const Tensor& input,
                                std::span<const ChannelScaling> scaling = {},
                                std::optional<int> last = std::nullopt);

Tensor forward(const ModelGraph& model, const Tensor& input,
               std::span<const ChannelScaling> scaling = {});

struct GraphGrads {
  Tensor input;
  std::map<std::string, LayerParams> params;
};

/// Backpropagates `output_grad`, the gradient of a scalar loss w.r.t. the
/// output of layer `from` (default: the network output), through
/// activations produced by forward_all. Layers after `from` are ignored.
GraphGrads backward(const ModelGraph& model, const Tensor& input,
                    const std::vector<Tensor>& activations,
                    const Tensor& output_grad,
                    std::optional<int> from = std::nullopt);

}  // namespace thinner
