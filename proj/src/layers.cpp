// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "thinner/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "thinner/error.hpp"
#include "thinner/parallel.hpp"

namespace thinner {
namespace {

void require_same(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw ShapeError(std::string(what) + ": shape " + a.str() +
                     " does not match " + b.str());
  }
}

// Gathers the receptive fields of one sample into a (P, C*K*K) row-major
// matrix, P = H_out * W_out. Out-of-bounds taps read zero padding.
void im2col(const float* src, const Shape& in, int k, ConvGeometry geo,
            int out_h, int out_w, std::vector<float>& col) {
  const int ckk = in.c * k * k;
  col.assign(static_cast<std::size_t>(out_h) * out_w * ckk, 0.0f);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      float* row = col.data() + (static_cast<std::size_t>(oy) * out_w + ox) * ckk;
      for (int c = 0; c < in.c; ++c) {
        const float* plane = src + static_cast<std::size_t>(c) * in.h * in.w;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * geo.stride - geo.pad + ky;
          if (iy < 0 || iy >= in.h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * geo.stride - geo.pad + kx;
            if (ix < 0 || ix >= in.w) continue;
            row[(c * k + ky) * k + kx] = plane[iy * in.w + ix];
          }
        }
      }
    }
  }
}

void col2im_add(const std::vector<double>& dcol, const Shape& in, int k,
                ConvGeometry geo, int out_h, int out_w, float* dst) {
  const int ckk = in.c * k * k;
  std::vector<double> acc(in.sample_size(), 0.0);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      const double* row =
          dcol.data() + (static_cast<std::size_t>(oy) * out_w + ox) * ckk;
      for (int c = 0; c < in.c; ++c) {
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * geo.stride - geo.pad + ky;
          if (iy < 0 || iy >= in.h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * geo.stride - geo.pad + kx;
            if (ix < 0 || ix >= in.w) continue;
            acc[(static_cast<std::size_t>(c) * in.h + iy) * in.w + ix] +=
                row[(c * k + ky) * k + kx];
          }
        }
      }
    }
  }
  for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<float>(acc[i]);
}

}  // namespace

void ConvKernel::validate() const {
  const Shape& s = weights.shape();
  if (s.h != s.w) {
    throw ShapeError("conv kernel must be square, got " + s.str());
  }
  if (static_cast<int>(bias.size()) != s.n) {
    throw ShapeError("conv bias length " + std::to_string(bias.size()) +
                     " does not match filter count " + std::to_string(s.n));
  }
  if (stride < 1 || pad < 0) throw ShapeError("invalid conv stride/pad");
}

Shape conv2d_output_shape(const Shape& input, const Shape& weights,
                          ConvGeometry geo) {
  if (input.c != weights.c) {
    throw ShapeError("conv input " + input.str() +
                     " has channel extent incompatible with kernel " +
                     weights.str());
  }
  if (weights.h != weights.w) {
    throw ShapeError("conv kernel must be square, got " + weights.str());
  }
  if (geo.stride < 1 || geo.pad < 0) throw ShapeError("invalid conv stride/pad");
  const int k = weights.h;
  const int span_h = input.h + 2 * geo.pad - k;
  const int span_w = input.w + 2 * geo.pad - k;
  // Floor semantics: trailing rows/cols that do not fill a stride are
  // dropped, as in standard strided convolutions.
  if (span_h < 0 || span_w < 0) {
    throw ShapeError("conv kernel " + weights.str() + " with pad " + std::to_string(geo.pad) +
                     " does not fit input " + input.str() + "; output extent would be < 1");
  }
  return {input.n, weights.n, span_h / geo.stride + 1, span_w / geo.stride + 1};
}

Tensor conv2d_forward(const Tensor& input, const Tensor& weights,
                      std::span<const float> bias, ConvGeometry geo) {
  const Shape out_shape = conv2d_output_shape(input.shape(), weights.shape(), geo);
  if (static_cast<int>(bias.size()) != out_shape.c) {
    throw ShapeError("conv bias length does not match filter count");
  }
  const Shape& in = input.shape();
  const int k = weights.shape().h;
  const int ckk = in.c * k * k;
  const int positions = out_shape.h * out_shape.w;
  Tensor out(out_shape);
  const float* w = weights.data().data();
  parallel_for(in.n, [&](int n) {
    std::vector<float> col;
    im2col(input.sample(n), in, k, geo, out_shape.h, out_shape.w, col);
    float* dst = out.sample(n);
    for (int d = 0; d < out_shape.c; ++d) {
      const float* wd = w + static_cast<std::size_t>(d) * ckk;
      for (int p = 0; p < positions; ++p) {
        const float* row = col.data() + static_cast<std::size_t>(p) * ckk;
        double acc = 0.0;
        for (int j = 0; j < ckk; ++j) acc += static_cast<double>(wd[j]) * row[j];
        dst[static_cast<std::size_t>(d) * positions + p] =
            static_cast<float>(acc + bias[d]);
      }
    }
  });
  return out;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  for (float& v : out.data()) v = v > 0.0f ? v : 0.0f;
  return out;
}

Shape maxpool_output_shape(const Shape& input, int window, int stride,
                           int pad) {
  if (window < 1 || stride < 1 || pad < 0 || pad >= window) {
    throw ShapeError("invalid pool window/stride/pad");
  }
  if (window > input.h + 2 * pad || window > input.w + 2 * pad) {
    throw ShapeError("pool window " + std::to_string(window) +
                     " larger than spatial extent of " + input.str());
  }
  return {input.n, input.c, (input.h + 2 * pad - window) / stride + 1,
          (input.w + 2 * pad - window) / stride + 1};
}

namespace {

// Location of the first maximum in one pooling window; (-1, -1) never
// happens because pad < window guarantees an in-bounds tap.
std::pair<int, int> pool_argmax(const float* plane, const Shape& s, int oy,
                                int ox, int window, int stride, int pad) {
  int by = -1, bx = -1;
  float best = -std::numeric_limits<float>::infinity();
  for (int ky = 0; ky < window; ++ky) {
    const int iy = oy * stride - pad + ky;
    if (iy < 0 || iy >= s.h) continue;
    for (int kx = 0; kx < window; ++kx) {
      const int ix = ox * stride - pad + kx;
      if (ix < 0 || ix >= s.w) continue;
      const float v = plane[iy * s.w + ix];
      if (by < 0 || v > best) {
        best = v;
        by = iy;
        bx = ix;
      }
    }
  }
  return {by, bx};
}

}  // namespace

Tensor maxpool_forward(const Tensor& input, int window, int stride, int pad) {
  const Shape& is = input.shape();
  const Shape os = maxpool_output_shape(is, window, stride, pad);
  Tensor out(os);
  for (int n = 0; n < os.n; ++n)
    for (int c = 0; c < os.c; ++c) {
      const float* plane = input.sample(n) + c * is.plane();
      for (int oy = 0; oy < os.h; ++oy)
        for (int ox = 0; ox < os.w; ++ox) {
          auto [y, x] = pool_argmax(plane, is, oy, ox, window, stride, pad);
          out.at(n, c, oy, ox) = plane[y * is.w + x];
        }
    }
  return out;
}

Tensor gap_forward(const Tensor& input) {
  const Shape& s = input.shape();
  Tensor out({s.n, s.c, 1, 1});
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const float* src = input.sample(n) + c * plane;
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += src[i];
      out.at(n, c, 0, 0) = static_cast<float>(acc / static_cast<double>(plane));
    }
  return out;
}

Tensor fc_forward(const Tensor& input, const Tensor& weights,
                  std::span<const float> bias) {
  const Shape& s = input.shape();
  const int in = static_cast<int>(s.sample_size());
  const int outs = weights.shape().c;
  if (weights.shape().n != in || weights.shape().h != 1 || weights.shape().w != 1) {
    throw ShapeError("fc input " + s.str() + " flattens to " +
                     std::to_string(in) + " values but weights are " +
                     weights.shape().str());
  }
  if (static_cast<int>(bias.size()) != outs) {
    throw ShapeError("fc bias length does not match output count");
  }
  Tensor out({s.n, outs, 1, 1});
  const float* w = weights.data().data();
  for (int n = 0; n < s.n; ++n) {
    const float* x = input.sample(n);
    std::vector<double> acc(bias.begin(), bias.end());
    for (int i = 0; i < in; ++i) {
      const double xi = x[i];
      const float* wi = w + static_cast<std::size_t>(i) * outs;
      for (int o = 0; o < outs; ++o) acc[o] += xi * wi[o];
    }
    float* y = out.sample(n);
    for (int o = 0; o < outs; ++o) y[o] = static_cast<float>(acc[o]);
  }
  return out;
}

Tensor bn_affine_forward(const Tensor& input, std::span<const float> scale,
                         std::span<const float> shift) {
  const Shape& s = input.shape();
  if (static_cast<int>(scale.size()) != s.c || static_cast<int>(shift.size()) != s.c) {
    throw ShapeError("bn_affine parameters do not match channel count of " + s.str());
  }
  Tensor out = input;
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      float* p = out.sample(n) + c * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] = scale[c] * p[i] + shift[c];
    }
  return out;
}

Tensor add_forward(const Tensor& a, const Tensor& b) {
  require_same(a.shape(), b.shape(), "add_junction");
  Tensor out = a;
  auto dst = out.data();
  auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return out;
}

Tensor softmax_forward(const Tensor& input) {
  const Shape& s = input.shape();
  const std::size_t len = s.sample_size();
  Tensor out(s);
  for (int n = 0; n < s.n; ++n) {
    const float* x = input.sample(n);
    float* y = out.sample(n);
    const float peak = *std::max_element(x, x + len);
    double total = 0.0;
    for (std::size_t i = 0; i < len; ++i) total += std::exp(static_cast<double>(x[i]) - peak);
    for (std::size_t i = 0; i < len; ++i)
      y[i] = static_cast<float>(std::exp(static_cast<double>(x[i]) - peak) / total);
  }
  return out;
}

ParamGrads conv2d_backward(const Tensor& input, const Tensor& weights,
                           ConvGeometry geo, const Tensor& grad_out) {
  const Shape os = conv2d_output_shape(input.shape(), weights.shape(), geo);
  require_same(grad_out.shape(), os, "conv backward upstream gradient");
  const Shape& in = input.shape();
  const int k = weights.shape().h;
  const int ckk = in.c * k * k;
  const int positions = os.h * os.w;
  const int filters = os.c;
  const float* w = weights.data().data();

  ParamGrads g{Tensor(in), Tensor(weights.shape()), std::vector<float>(filters)};
  std::vector<std::vector<double>> dw_partial(in.n);
  std::vector<std::vector<double>> db_partial(in.n);
  parallel_for(in.n, [&](int n) {
    std::vector<float> col;
    im2col(input.sample(n), in, k, geo, os.h, os.w, col);
    const float* dy = grad_out.sample(n);
    auto& dw = dw_partial[n];
    auto& db = db_partial[n];
    dw.assign(static_cast<std::size_t>(filters) * ckk, 0.0);
    db.assign(filters, 0.0);
    std::vector<double> dcol(static_cast<std::size_t>(positions) * ckk, 0.0);
    for (int d = 0; d < filters; ++d) {
      const float* wd = w + static_cast<std::size_t>(d) * ckk;
      double* dwd = dw.data() + static_cast<std::size_t>(d) * ckk;
      for (int p = 0; p < positions; ++p) {
        const double up = dy[static_cast<std::size_t>(d) * positions + p];
        if (up == 0.0) continue;
        db[d] += up;
        const float* row = col.data() + static_cast<std::size_t>(p) * ckk;
        double* drow = dcol.data() + static_cast<std::size_t>(p) * ckk;
        for (int j = 0; j < ckk; ++j) {
          dwd[j] += up * row[j];
          drow[j] += up * wd[j];
        }
      }
    }
    col2im_add(dcol, in, k, geo, os.h, os.w, g.input.sample(n));
  });
  // Reduce per-sample partials in sample order so the result does not
  // depend on the thread count.
  std::vector<double> dw(static_cast<std::size_t>(filters) * ckk, 0.0);
  std::vector<double> db(filters, 0.0);
  for (int n = 0; n < in.n; ++n) {
    for (std::size_t j = 0; j < dw.size(); ++j) dw[j] += dw_partial[n][j];
    for (int d = 0; d < filters; ++d) db[d] += db_partial[n][d];
  }
  auto gw = g.weights.data();
  for (std::size_t j = 0; j < dw.size(); ++j) gw[j] = static_cast<float>(dw[j]);
  for (int d = 0; d < filters; ++d) g.bias[d] = static_cast<float>(db[d]);
  return g;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  require_same(grad_out.shape(), input.shape(), "relu backward upstream gradient");
  Tensor g = grad_out;
  auto x = input.data();
  auto d = g.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!(x[i] > 0.0f)) d[i] = 0.0f;
  return g;
}

Tensor maxpool_backward(const Tensor& input, int window, int stride,
                        int pad, const Tensor& grad_out) {
  const Shape& is = input.shape();
  const Shape os = maxpool_output_shape(is, window, stride, pad);
  require_same(grad_out.shape(), os, "maxpool backward upstream gradient");
  Tensor g(is);
  for (int n = 0; n < os.n; ++n)
    for (int c = 0; c < os.c; ++c) {
      const float* plane = input.sample(n) + c * is.plane();
      for (int oy = 0; oy < os.h; ++oy)
        for (int ox = 0; ox < os.w; ++ox) {
          auto [y, x] = pool_argmax(plane, is, oy, ox, window, stride, pad);
          g.at(n, c, y, x) += grad_out.at(n, c, oy, ox);
        }
    }
  return g;
}

Tensor gap_backward(const Tensor& input, const Tensor& grad_out) {
  const Shape& s = input.shape();
  require_same(grad_out.shape(), Shape{s.n, s.c, 1, 1}, "gap backward upstream gradient");
  Tensor g(s);
  const std::size_t plane = s.plane();
  const double inv = 1.0 / static_cast<double>(plane);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const float v = static_cast<float>(grad_out.at(n, c, 0, 0) * inv);
      float* p = g.sample(n) + c * plane;
      std::fill(p, p + plane, v);
    }
  return g;
}

ParamGrads fc_backward(const Tensor& input, const Tensor& weights,
                       const Tensor& grad_out) {
  const Shape& s = input.shape();
  const int in = static_cast<int>(s.sample_size());
  const int outs = weights.shape().c;
  if (weights.shape().n != in) {
    throw ShapeError("fc input " + s.str() + " incompatible with weights " +
                     weights.shape().str());
  }
  require_same(grad_out.shape(), Shape{s.n, outs, 1, 1}, "fc backward upstream gradient");
  ParamGrads g{Tensor(s), Tensor(weights.shape()), std::vector<float>(outs)};
  std::vector<double> dw(static_cast<std::size_t>(in) * outs, 0.0);
  std::vector<double> db(outs, 0.0);
  const float* w = weights.data().data();
  for (int n = 0; n < s.n; ++n) {
    const float* x = input.sample(n);
    const float* dy = grad_out.sample(n);
    float* dx = g.input.sample(n);
    for (int o = 0; o < outs; ++o) db[o] += dy[o];
    for (int i = 0; i < in; ++i) {
      const float* wi = w + static_cast<std::size_t>(i) * outs;
      double* dwi = dw.data() + static_cast<std::size_t>(i) * outs;
      double acc = 0.0;
      for (int o = 0; o < outs; ++o) {
        acc += static_cast<double>(wi[o]) * dy[o];
        dwi[o] += static_cast<double>(x[i]) * dy[o];
      }
      dx[i] = static_cast<float>(acc);
    }
  }
  auto gw = g.weights.data();
  for (std::size_t j = 0; j < dw.size(); ++j) gw[j] = static_cast<float>(dw[j]);
  for (int o = 0; o < outs; ++o) g.bias[o] = static_cast<float>(db[o]);
  return g;
}

ParamGrads bn_affine_backward(const Tensor& input, std::span<const float> scale,
                              const Tensor& grad_out) {
  const Shape& s = input.shape();
  require_same(grad_out.shape(), s, "bn_affine backward upstream gradient");
  if (static_cast<int>(scale.size()) != s.c) {
    throw ShapeError("bn_affine scale does not match channel count of " + s.str());
  }
  ParamGrads g{Tensor(s), Tensor({1, s.c, 1, 1}), std::vector<float>(s.c)};
  const std::size_t plane = s.plane();
  for (int c = 0; c < s.c; ++c) {
    double dscale = 0.0, dshift = 0.0;
    for (int n = 0; n < s.n; ++n) {
      const float* x = input.sample(n) + c * plane;
      const float* dy = grad_out.sample(n) + c * plane;
      float* dx = g.input.sample(n) + c * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        dscale += static_cast<double>(dy[i]) * x[i];
        dshift += dy[i];
        dx[i] = scale[c] * dy[i];
      }
    }
    g.weights.at(0, c, 0, 0) = static_cast<float>(dscale);
    g.bias[c] = static_cast<float>(dshift);
  }
  return g;
}

Tensor softmax_backward(const Tensor& output, const Tensor& grad_out) {
  const Shape& s = output.shape();
  require_same(grad_out.shape(), s, "softmax backward upstream gradient");
  Tensor g(s);
  const std::size_t len = s.sample_size();
  for (int n = 0; n < s.n; ++n) {
    const float* y = output.sample(n);
    const float* dy = grad_out.sample(n);
    double dot = 0.0;
    for (std::size_t i = 0; i < len; ++i) dot += static_cast<double>(y[i]) * dy[i];
    float* dx = g.sample(n);
    for (std::size_t i = 0; i < len; ++i) dx[i] = static_cast<float>(y[i] * (dy[i] - dot));
  }
  return g;
}

}  // namespace thinner
