// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

// Forward and backward kernels for the layer kinds used by plain-chain and
// residual CNNs. All functions are pure; float32 storage with float64
// accumulation inside reductions.

#pragma once

#include <span>
#include <vector>

#include "thinner/tensor.hpp"

namespace thinner {

struct ConvGeometry {
  int stride = 1;
  int pad = 0;
};

/// Filters (D, C, K, K), a length-D bias and the sliding geometry.
struct ConvKernel {
  Tensor weights;
  std::vector<float> bias;
  int stride = 1;
  int pad = 0;

  int out_channels() const { return weights.shape().n; }
  int in_channels() const { return weights.shape().c; }
  int size() const { return weights.shape().h; }
  /// Throws ShapeError if the kernel is not square or bias length != D.
  void validate() const;
};

/// Output shape of a convolution: floor((H + 2 pad - K) / stride) + 1 per
/// spatial axis. Throws if the kernel does not fit.
Shape conv2d_output_shape(const Shape& input, const Shape& weights,
                          ConvGeometry geo);

Tensor conv2d_forward(const Tensor& input, const Tensor& weights,
                      std::span<const float> bias, ConvGeometry geo);
inline Tensor conv2d_forward(const Tensor& input, const ConvKernel& kernel) {
  kernel.validate();
  return conv2d_forward(input, kernel.weights, kernel.bias,
                        {kernel.stride, kernel.pad});
}

Tensor relu_forward(const Tensor& input);

/// Pooling pads with -inf, so padded taps never win.
Shape maxpool_output_shape(const Shape& input, int window, int stride,
                           int pad = 0);
Tensor maxpool_forward(const Tensor& input, int window, int stride,
                       int pad = 0);

/// Spatial mean per channel; output (N, C, 1, 1).
Tensor gap_forward(const Tensor& input);

/// Affine map per sample. `weights` is (in, out, 1, 1): one row per
/// flattened input element. Output (N, out, 1, 1).
Tensor fc_forward(const Tensor& input, const Tensor& weights,
                  std::span<const float> bias);

/// Per-channel y = scale[c] * x + shift[c].
Tensor bn_affine_forward(const Tensor& input, std::span<const float> scale,
                         std::span<const float> shift);

Tensor add_forward(const Tensor& a, const Tensor& b);

/// Softmax over the flattened per-sample values.
Tensor softmax_forward(const Tensor& input);

// Backward passes. Each takes the forward input (or output for softmax)
// and the upstream gradient of the same shape as the forward output.

struct ParamGrads {
  Tensor input;
  Tensor weights;
  std::vector<float> bias;
};

ParamGrads conv2d_backward(const Tensor& input, const Tensor& weights,
                           ConvGeometry geo, const Tensor& grad_out);
inline ParamGrads conv2d_backward(const Tensor& input,
                                  const ConvKernel& kernel,
                                  const Tensor& grad_out) {
  return conv2d_backward(input, kernel.weights, {kernel.stride, kernel.pad},
                         grad_out);
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out);
Tensor maxpool_backward(const Tensor& input, int window, int stride,
                        int pad, const Tensor& grad_out);
Tensor gap_backward(const Tensor& input, const Tensor& grad_out);
ParamGrads fc_backward(const Tensor& input, const Tensor& weights,
                       const Tensor& grad_out);
/// `weights` of the result holds d/d(scale) as (1, C, 1, 1); `bias` holds
/// d/d(shift).
ParamGrads bn_affine_backward(const Tensor& input,
                              std::span<const float> scale,
                              const Tensor& grad_out);
Tensor softmax_backward(const Tensor& output, const Tensor& grad_out);

}  // namespace thinner
