// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "thinner/builders.hpp"

#include <cmath>

#include "thinner/error.hpp"
#include "thinner/random.hpp"

namespace thinner {
namespace {

class GraphBuilder {
 public:
  explicit GraphBuilder(ModelGraph& m) : m_(m) {}

  std::string conv(const std::string& id, const std::string& in, int filters, int kernel,
                   int stride, int pad, bool bias = true, bool projection = false) {
    LayerSpec s{.id = id, .kind = LayerKind::conv, .inputs = inputs(in)};
    s.out_channels = filters;
    s.kernel = kernel;
    s.stride = stride;
    s.pad = pad;
    s.bias = bias;
    s.projection = projection;
    return push(std::move(s));
  }
  std::string simple(const std::string& id, LayerKind kind, const std::string& in) {
    return push({.id = id, .kind = kind, .inputs = inputs(in)});
  }
  std::string pool(const std::string& id, const std::string& in, int window, int stride,
                   int pad = 0) {
    LayerSpec s{.id = id, .kind = LayerKind::maxpool, .inputs = inputs(in)};
    s.window = window;
    s.stride = stride;
    s.pad = pad;
    return push(std::move(s));
  }
  std::string fc(const std::string& id, const std::string& in, int outputs) {
    LayerSpec s{.id = id, .kind = LayerKind::fc, .inputs = inputs(in)};
    s.out_channels = outputs;
    return push(std::move(s));
  }
  std::string add(const std::string& id, const std::string& a, const std::string& b) {
    return push({.id = id, .kind = LayerKind::add_junction, .inputs = {a, b}});
  }

 private:
  static std::vector<std::string> inputs(const std::string& in) {
    return in.empty() ? std::vector<std::string>{} : std::vector<std::string>{in};
  }
  std::string push(LayerSpec s) {
    m_.layers.push_back(std::move(s));
    return m_.layers.back().id;
  }
  ModelGraph& m_;
};

void finish(ModelGraph& model, const BuildOptions& opts) {
  allocate_params(model);
  if (opts.init_weights) initialize_weights(model, opts.seed);
  model.validate();
}

void require_classes(int classes) {
  if (classes < 2) throw ConfigError("class count must be >= 2");
}

std::string vgg_stack(GraphBuilder& b) {
  static const int kStages[5][2] = {{2, 64}, {2, 128}, {3, 256}, {3, 512}, {3, 512}};
  std::string top;
  for (int stage = 0; stage < 5; ++stage) {
    for (int i = 0; i < kStages[stage][0]; ++i) {
      const std::string suffix = std::to_string(stage + 1) + "_" + std::to_string(i + 1);
      top = b.conv("conv" + suffix, top, kStages[stage][1], 3, 1, 1);
      top = b.simple("relu" + suffix, LayerKind::relu, top);
    }
    top = b.pool("pool" + std::to_string(stage + 1), top, 2, 2);
  }
  return top;
}

}  // namespace

void allocate_params(ModelGraph& model) {
  const auto shapes = infer_shapes(model, 1);
  model.params.clear();
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& spec = model.layers[i];
    if (!has_params(spec.kind)) continue;
    Shape in = model.input_shape;
    if (!spec.inputs.empty()) in = shapes[model.index_of(spec.inputs[0])];
    in.n = 1;
    LayerParams p;
    switch (spec.kind) {
      case LayerKind::conv:
        p.weight = Tensor({spec.out_channels, in.c, spec.kernel, spec.kernel});
        p.bias.assign(spec.out_channels, 0.0f);
        break;
      case LayerKind::fc:
        p.weight = Tensor({static_cast<int>(in.sample_size()), spec.out_channels, 1, 1});
        p.bias.assign(spec.out_channels, 0.0f);
        break;
      default:
        p.weight = Tensor({1, in.c, 1, 1}, 1.0f);
        p.bias.assign(in.c, 0.0f);
        break;
    }
    model.params.emplace(spec.id, std::move(p));
  }
}

void initialize_weights(ModelGraph& model, std::uint64_t seed) {
  Rng rng = make_rng(seed, "init");
  for (const auto& spec : model.layers) {
    if (!has_params(spec.kind)) continue;
    auto& p = model.params_of(spec.id);
    std::fill(p.bias.begin(), p.bias.end(), 0.0f);
    if (spec.kind == LayerKind::bn_affine) {
      p.weight.fill(1.0f);
      continue;
    }
    const Shape& s = p.weight.shape();
    const double fan_in = spec.kind == LayerKind::conv
                              ? static_cast<double>(s.c) * s.h * s.w
                              : static_cast<double>(s.n);
    // Uniform with He variance 2 / fan_in.
    const float limit = static_cast<float>(std::sqrt(6.0 / fan_in));
    std::uniform_real_distribution<float> dist(-limit, limit);
    for (float& v : p.weight.data()) v = dist(rng);
  }
}

ModelGraph build_vgg16(int classes, BuildOptions opts) {
  require_classes(classes);
  ModelGraph m;
  m.input_shape = {1, 3, 224, 224};
  m.classes = classes;
  GraphBuilder b(m);
  std::string top = vgg_stack(b);
  top = b.fc("fc6", top, 4096);
  top = b.simple("relu6", LayerKind::relu, top);
  top = b.fc("fc7", top, 4096);
  top = b.simple("relu7", LayerKind::relu, top);
  top = b.fc("fc8", top, classes);
  b.simple("prob", LayerKind::softmax, top);
  finish(m, opts);
  return m;
}

ModelGraph build_vgg16_gap(int classes, BuildOptions opts) {
  require_classes(classes);
  ModelGraph m;
  m.input_shape = {1, 3, 224, 224};
  m.classes = classes;
  GraphBuilder b(m);
  std::string top = vgg_stack(b);
  top = b.simple("gap", LayerKind::gap, top);
  top = b.fc("fc", top, classes);
  b.simple("prob", LayerKind::softmax, top);
  finish(m, opts);
  return m;
}

ModelGraph build_resnet50(int classes, BuildOptions opts) {
  require_classes(classes);
  ModelGraph m;
  m.input_shape = {1, 3, 224, 224};
  m.classes = classes;
  GraphBuilder b(m);
  std::string top = b.conv("conv1", "", 64, 7, 2, 3, false);
  top = b.simple("bn_conv1", LayerKind::bn_affine, top);
  top = b.simple("conv1_relu", LayerKind::relu, top);
  top = b.pool("pool1", top, 3, 2, 1);

  static const int kBlocks[4] = {3, 4, 6, 3};
  static const int kWidths[4] = {64, 128, 256, 512};
  for (int stage = 0; stage < 4; ++stage) {
    const int width = kWidths[stage];
    for (int blk = 0; blk < kBlocks[stage]; ++blk) {
      const std::string name = std::to_string(stage + 2) + static_cast<char>('a' + blk);
      const int stride = (blk == 0 && stage > 0) ? 2 : 1;
      const std::string block_in = top;
      std::string shortcut = block_in;
      if (blk == 0) {
        shortcut = b.conv("res" + name + "_branch1", block_in, 4 * width, 1, stride, 0, false, true);
        shortcut = b.simple("bn" + name + "_branch1", LayerKind::bn_affine, shortcut);
      }
      std::string x = b.conv("res" + name + "_branch2a", block_in, width, 1, stride, 0, false);
      x = b.simple("bn" + name + "_branch2a", LayerKind::bn_affine, x);
      x = b.simple("res" + name + "_branch2a_relu", LayerKind::relu, x);
      x = b.conv("res" + name + "_branch2b", x, width, 3, 1, 1, false);
      x = b.simple("bn" + name + "_branch2b", LayerKind::bn_affine, x);
      x = b.simple("res" + name + "_branch2b_relu", LayerKind::relu, x);
      x = b.conv("res" + name + "_branch2c", x, 4 * width, 1, 1, 0, false);
      x = b.simple("bn" + name + "_branch2c", LayerKind::bn_affine, x);
      x = b.add("res" + name, x, shortcut);
      top = b.simple("res" + name + "_relu", LayerKind::relu, x);
    }
  }
  top = b.simple("pool5", LayerKind::gap, top);
  top = b.fc("fc1000", top, classes);
  b.simple("prob", LayerKind::softmax, top);
  finish(m, opts);
  return m;
}

ModelGraph build_plain_cnn(Shape chw, const std::vector<int>& widths, int classes,
                           BuildOptions opts) {
  require_classes(classes);
  if (widths.empty()) throw ConfigError("plain cnn needs at least one conv layer");
  ModelGraph m;
  m.input_shape = {1, chw.c, chw.h, chw.w};
  m.classes = classes;
  GraphBuilder b(m);
  std::string top;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::string k = std::to_string(i + 1);
    top = b.conv("conv" + k, top, widths[i], 3, 1, 1);
    top = b.simple("relu" + k, LayerKind::relu, top);
    if (i + 1 < widths.size()) top = b.pool("pool" + k, top, 2, 2);
  }
  top = b.simple("gap", LayerKind::gap, top);
  top = b.fc("fc", top, classes);
  b.simple("prob", LayerKind::softmax, top);
  finish(m, opts);
  return m;
}

ModelGraph build_residual_cnn(Shape chw, int width, int bottleneck, int blocks,
                              int classes, BuildOptions opts) {
  require_classes(classes);
  if (blocks < 1 || width < 1 || bottleneck < 1) throw ConfigError("invalid residual cnn geometry");
  ModelGraph m;
  m.input_shape = {1, chw.c, chw.h, chw.w};
  m.classes = classes;
  GraphBuilder b(m);
  std::string top = b.conv("stem", "", bottleneck, 3, 1, 1);
  top = b.simple("stem_relu", LayerKind::relu, top);
  for (int blk = 0; blk < blocks; ++blk) {
    const std::string name = "b" + std::to_string(blk + 1);
    std::string shortcut = top;
    if (blk == 0) {
      shortcut = b.conv(name + "_proj", top, width, 1, 1, 0, false, true);
      shortcut = b.simple(name + "_proj_bn", LayerKind::bn_affine, shortcut);
    }
    std::string x = b.conv(name + "_conv1", top, bottleneck, 1, 1, 0, false);
    x = b.simple(name + "_bn1", LayerKind::bn_affine, x);
    x = b.simple(name + "_relu1", LayerKind::relu, x);
    x = b.conv(name + "_conv2", x, bottleneck, 3, 1, 1, false);
    x = b.simple(name + "_bn2", LayerKind::bn_affine, x);
    x = b.simple(name + "_relu2", LayerKind::relu, x);
    x = b.conv(name + "_conv3", x, width, 1, 1, 0, false);
    x = b.simple(name + "_bn3", LayerKind::bn_affine, x);
    x = b.add(name + "_add", x, shortcut);
    top = b.simple(name + "_out", LayerKind::relu, x);
  }
  top = b.simple("gap", LayerKind::gap, top);
  top = b.fc("fc", top, classes);
  b.simple("prob", LayerKind::softmax, top);
  finish(m, opts);
  return m;
}

}  // namespace thinner
