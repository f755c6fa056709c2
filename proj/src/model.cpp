// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "thinner/model.hpp"

#include <array>
#include <set>

#include "thinner/error.hpp"
#include "thinner/layers.hpp"

namespace thinner {
namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 8> kKindNames{{
    {LayerKind::conv, "conv"},
    {LayerKind::relu, "relu"},
    {LayerKind::maxpool, "maxpool"},
    {LayerKind::gap, "gap"},
    {LayerKind::fc, "fc"},
    {LayerKind::bn_affine, "bn_affine"},
    {LayerKind::add_junction, "add_junction"},
    {LayerKind::softmax, "softmax"},
}};

Shape param_weight_shape(const LayerSpec& spec, const Shape& in) {
  switch (spec.kind) {
    case LayerKind::conv:
      return {spec.out_channels, in.c, spec.kernel, spec.kernel};
    case LayerKind::fc:
      return {static_cast<int>(in.sample_size()), spec.out_channels, 1, 1};
    case LayerKind::bn_affine:
      return {1, in.c, 1, 1};
    default:
      return {};
  }
}

int param_bias_length(const LayerSpec& spec, const Shape& in) {
  return spec.kind == LayerKind::bn_affine ? in.c : spec.out_channels;
}

void apply_scaling(Tensor& t, const ChannelScaling& s) {
  const Shape& shape = t.shape();
  if (static_cast<int>(s.factors.size()) != shape.c) {
    throw ShapeError("channel scaling for " + s.layer + " has " +
                     std::to_string(s.factors.size()) + " factors but output has " +
                     std::to_string(shape.c) + " channels");
  }
  const std::size_t plane = shape.plane();
  for (int n = 0; n < shape.n; ++n)
    for (int c = 0; c < shape.c; ++c) {
      float* p = t.sample(n) + c * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] *= s.factors[c];
    }
}

void accumulate(std::optional<Tensor>& slot, const Tensor& g) {
  if (!slot) {
    slot = g;
    return;
  }
  auto dst = slot->data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

LayerKind parse_layer_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (n == name) return k;
  throw FormatError("unknown layer kind '" + std::string(name) + "'");
}

int ModelGraph::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].id == id) return static_cast<int>(i);
  return -1;
}

const LayerSpec& ModelGraph::layer(std::string_view id) const {
  const int i = index_of(id);
  if (i < 0) throw ConfigError("no layer named '" + std::string(id) + "'");
  return layers[i];
}

LayerSpec& ModelGraph::layer(std::string_view id) {
  const int i = index_of(id);
  if (i < 0) throw ConfigError("no layer named '" + std::string(id) + "'");
  return layers[i];
}

const LayerParams& ModelGraph::params_of(std::string_view id) const {
  auto it = params.find(std::string(id));
  if (it == params.end()) throw FormatError("layer '" + std::string(id) + "' has no parameters");
  return it->second;
}

LayerParams& ModelGraph::params_of(std::string_view id) {
  auto it = params.find(std::string(id));
  if (it == params.end()) throw FormatError("layer '" + std::string(id) + "' has no parameters");
  return it->second;
}

std::vector<int> ModelGraph::consumers(std::string_view id) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < layers.size(); ++i)
    for (const auto& in : layers[i].inputs)
      if (in == id) {
        out.push_back(static_cast<int>(i));
        break;
      }
  return out;
}

std::size_t ModelGraph::parameter_count() const {
  std::size_t total = 0;
  for (const auto& spec : layers) {
    if (!has_params(spec.kind)) continue;
    const auto& p = params_of(spec.id);
    total += p.weight.size();
    if (spec.kind != LayerKind::conv || spec.bias) total += p.bias.size();
  }
  return total;
}

std::vector<Shape> infer_shapes(const ModelGraph& model, int batch) {
  Shape in = model.input_shape;
  in.n = batch;
  return infer_shapes(model, in);
}

std::vector<Shape> infer_shapes(const ModelGraph& model, const Shape& input) {
  if (!input.valid()) throw ShapeError("invalid input shape " + input.str());
  if (model.layers.empty()) throw ShapeError("model has no layers");
  std::vector<Shape> shapes;
  shapes.reserve(model.layers.size());
  std::map<std::string, int> seen;
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const LayerSpec& spec = model.layers[li];
    auto source = [&](std::size_t k) -> Shape {
      if (spec.inputs.empty()) return input;
      auto it = seen.find(spec.inputs[k]);
      if (it == seen.end()) {
        throw ShapeError("layer '" + spec.id + "' reads '" + spec.inputs[k] +
                         "' which is not an earlier layer");
      }
      return shapes[it->second];
    };
    const std::size_t want_inputs = spec.kind == LayerKind::add_junction ? 2 : 1;
    if (!spec.inputs.empty() && spec.inputs.size() != want_inputs) {
      throw ShapeError("layer '" + spec.id + "' expects " +
                       std::to_string(want_inputs) + " input(s)");
    }
    if (spec.inputs.empty() && spec.kind == LayerKind::add_junction) {
      throw ShapeError("add_junction '" + spec.id + "' needs two inputs");
    }
    const Shape in = source(0);
    Shape out = in;
    try {
      switch (spec.kind) {
        case LayerKind::conv:
          if (spec.out_channels < 1 || spec.kernel < 1) {
            throw ShapeError("conv needs positive filters and kernel");
          }
          out = conv2d_output_shape(in, {spec.out_channels, in.c, spec.kernel, spec.kernel},
                                    {spec.stride, spec.pad});
          break;
        case LayerKind::maxpool:
          out = maxpool_output_shape(in, spec.window, spec.stride, spec.pad);
          break;
        case LayerKind::gap:
          out = {in.n, in.c, 1, 1};
          break;
        case LayerKind::fc:
          if (spec.out_channels < 1) throw ShapeError("fc needs positive outputs");
          out = {in.n, spec.out_channels, 1, 1};
          break;
        case LayerKind::add_junction: {
          const Shape other = source(1);
          if (!(other == in)) {
            throw ShapeError("add_junction inputs have shapes " + in.str() + " and " +
                             other.str());
          }
          break;
        }
        case LayerKind::relu:
        case LayerKind::bn_affine:
        case LayerKind::softmax:
          break;
      }
    } catch (const ShapeError& e) {
      throw ShapeError("layer '" + spec.id + "': " + e.what());
    }
    if (!seen.emplace(spec.id, static_cast<int>(li)).second) {
      throw ShapeError("duplicate layer id '" + spec.id + "'");
    }
    shapes.push_back(out);
  }
  return shapes;
}

void ModelGraph::validate() const {
  const auto shapes = infer_shapes(*this, 1);
  if (classes < 1) throw FormatError("class count must be positive");
  // Single output: every layer but the last must be consumed.
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    if (consumers(layers[i].id).empty()) {
      throw ShapeError("layer '" + layers[i].id +
                       "' is never consumed; the graph must have a single output");
    }
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& spec = layers[i];
    if (!has_params(spec.kind)) continue;
    const int src = spec.inputs.empty() ? -1 : index_of(spec.inputs[0]);
    Shape in = src < 0 ? input_shape : shapes[src];
    in.n = 1;
    auto it = params.find(spec.id);
    if (it == params.end()) throw FormatError("layer '" + spec.id + "' is missing its parameter blobs");
    const Shape expect = param_weight_shape(spec, in);
    if (!(it->second.weight.shape() == expect)) {
      throw FormatError("blob '" + spec.id + ".weight' has shape " +
                        it->second.weight.shape().str() + ", expected " + expect.str());
    }
    if (static_cast<int>(it->second.bias.size()) != param_bias_length(spec, in)) {
      throw FormatError("blob '" + spec.id + ".bias' has length " +
                        std::to_string(it->second.bias.size()) + ", expected " +
                        std::to_string(param_bias_length(spec, in)));
    }
  }
}

std::vector<Tensor> forward_all(const ModelGraph& model, const Tensor& input,
                                std::span<const ChannelScaling> scaling,
                                std::optional<int> last) {
  const int stop = last ? *last : static_cast<int>(model.layers.size()) - 1;
  std::map<std::string, int> index;
  std::vector<Tensor> out;
  out.reserve(stop + 1);
  for (int li = 0; li <= stop; ++li) {
    const LayerSpec& spec = model.layers[li];
    auto src = [&](std::size_t k) -> const Tensor& {
      if (spec.inputs.empty()) return input;
      auto it = index.find(spec.inputs[k]);
      if (it == index.end()) {
        throw ShapeError("layer '" + spec.id + "' reads unknown input '" + spec.inputs[k] + "'");
      }
      return out[it->second];
    };
    Tensor y;
    try {
      switch (spec.kind) {
        case LayerKind::conv: {
          const auto& p = model.params_of(spec.id);
          y = conv2d_forward(src(0), p.weight, p.bias, {spec.stride, spec.pad});
          break;
        }
        case LayerKind::relu:
          y = relu_forward(src(0));
          break;
        case LayerKind::maxpool:
          y = maxpool_forward(src(0), spec.window, spec.stride, spec.pad);
          break;
        case LayerKind::gap:
          y = gap_forward(src(0));
          break;
        case LayerKind::fc: {
          const auto& p = model.params_of(spec.id);
          y = fc_forward(src(0), p.weight, p.bias);
          break;
        }
        case LayerKind::bn_affine: {
          const auto& p = model.params_of(spec.id);
          y = bn_affine_forward(src(0), p.weight.data(), p.bias);
          break;
        }
        case LayerKind::add_junction:
          y = add_forward(src(0), src(1));
          break;
        case LayerKind::softmax:
          y = softmax_forward(src(0));
          break;
      }
    } catch (const ShapeError& e) {
      throw ShapeError("layer '" + spec.id + "': " + e.what());
    }
    for (const auto& s : scaling)
      if (s.layer == spec.id) apply_scaling(y, s);
    index.emplace(spec.id, li);
    out.push_back(std::move(y));
  }
  return out;
}

Tensor forward(const ModelGraph& model, const Tensor& input,
               std::span<const ChannelScaling> scaling) {
  auto all = forward_all(model, input, scaling);
  return std::move(all.back());
}

GraphGrads backward(const ModelGraph& model, const Tensor& input,
                    const std::vector<Tensor>& activations,
                    const Tensor& output_grad, std::optional<int> from) {
  const int start = from ? *from : static_cast<int>(model.layers.size()) - 1;
  if (start < 0 || start >= static_cast<int>(activations.size())) {
    throw ShapeError("backward start layer has no activation");
  }
  if (!(output_grad.shape() == activations[start].shape())) {
    throw ShapeError("upstream gradient " + output_grad.shape().str() +
                     " does not match output " + activations[start].shape().str());
  }
  std::vector<std::optional<Tensor>> grads(start + 1);
  std::optional<Tensor> input_grad;
  grads[start] = output_grad;
  GraphGrads result;

  for (int li = start; li >= 0; --li) {
    if (!grads[li]) continue;
    const LayerSpec& spec = model.layers[li];
    const Tensor& dy = *grads[li];
    auto src_index = [&](std::size_t k) {
      return spec.inputs.empty() ? -1 : model.index_of(spec.inputs[k]);
    };
    auto src = [&](std::size_t k) -> const Tensor& {
      const int i = src_index(k);
      return i < 0 ? input : activations[i];
    };
    auto push = [&](std::size_t k, const Tensor& g) {
      const int i = src_index(k);
      accumulate(i < 0 ? input_grad : grads[i], g);
    };
    switch (spec.kind) {
      case LayerKind::conv: {
        const auto& p = model.params_of(spec.id);
        auto g = conv2d_backward(src(0), p.weight, {spec.stride, spec.pad}, dy);
        push(0, g.input);
        if (!spec.bias) std::fill(g.bias.begin(), g.bias.end(), 0.0f);
        result.params[spec.id] = {std::move(g.weights), std::move(g.bias)};
        break;
      }
      case LayerKind::relu:
        push(0, relu_backward(src(0), dy));
        break;
      case LayerKind::maxpool:
        push(0, maxpool_backward(src(0), spec.window, spec.stride, spec.pad, dy));
        break;
      case LayerKind::gap:
        push(0, gap_backward(src(0), dy));
        break;
      case LayerKind::fc: {
        const auto& p = model.params_of(spec.id);
        auto g = fc_backward(src(0), p.weight, dy);
        push(0, g.input);
        result.params[spec.id] = {std::move(g.weights), std::move(g.bias)};
        break;
      }
      case LayerKind::bn_affine: {
        const auto& p = model.params_of(spec.id);
        auto g = bn_affine_backward(src(0), p.weight.data(), dy);
        push(0, g.input);
        result.params[spec.id] = {std::move(g.weights), std::move(g.bias)};
        break;
      }
      case LayerKind::add_junction:
        push(0, dy);
        push(1, dy);
        break;
      case LayerKind::softmax:
        push(0, softmax_backward(activations[li], dy));
        break;
    }
    grads[li].reset();
  }
  result.input = input_grad ? std::move(*input_grad) : Tensor(input.shape());
  // Layers not reached by the gradient get zero gradients.
  for (int li = 0; li <= start; ++li) {
    const LayerSpec& spec = model.layers[li];
    if (!has_params(spec.kind) || result.params.count(spec.id)) continue;
    const auto& p = model.params_of(spec.id);
    result.params[spec.id] = {Tensor(p.weight.shape()), std::vector<float>(p.bias.size())};
  }
  return result;
}

}  // namespace thinner
