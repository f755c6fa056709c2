// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracle.hpp"
#include "thinner/builders.hpp"
#include "thinner/lsq_prune.hpp"
#include "thinner/metrics.hpp"
#include "thinner/sampling.hpp"

using namespace thinner;

namespace {

ModelGraph single_conv(Shape in, int filters, int k, bool bias) {
  ModelGraph m;
  m.input_shape = in;
  LayerSpec c;
  c.id = "conv";
  c.kind = LayerKind::conv;
  c.out_channels = filters;
  c.kernel = k;
  c.bias = bias;
  m.layers = {c};
  allocate_params(m);
  return m;
}

std::vector<int> first_half(int channels) {
  std::vector<int> kept(channels / 2);
  std::iota(kept.begin(), kept.end(), 0);
  return kept;
}

ModelGraph prune_first_ten(ModelGraph m) {
  for (const char* id : {"conv1_1", "conv1_2", "conv2_1", "conv2_2", "conv3_1", "conv3_2", "conv3_3", "conv4_1",
                         "conv4_2", "conv4_3"}) {
    const PruneSite site = resolve_site(m, id);
    m = prune_layer_pair(std::move(m), site, first_half(m.layer(id).out_channels));
  }
  return m;
}

bool within(double value, double target, double tol) { return std::abs(value / target - 1) <= tol; }

}  // namespace

TEST_CASE("hand counts") {
  const ModelGraph m = single_conv({1, 3, 5, 5}, 2, 3, true);
  CHECK(count_params(m).total_params == 56);
  const ModelGraph one = single_conv({1, 1, 5, 5}, 1, 1, false);
  CHECK(count_flops(one, {1, 1, 5, 5}).total_flops == 50);
  CHECK(count_params(one).total_params == 1);

  ModelGraph pool;
  pool.input_shape = {1, 2, 4, 4};
  LayerSpec p;
  p.id = "pool";
  p.kind = LayerKind::maxpool;
  pool.layers = {p};
  CHECK(count_flops(pool, {1, 2, 4, 4}).total_flops == 0);
  CHECK(count_params(pool).total_params == 0);
}

TEST_CASE("totals equal the sum of rows") {
  const ModelGraph m = build_residual_cnn({1, 3, 16, 16}, 16, 8, 2, 10, {0, false});
  const CostReport r = cost_report(m, {1, 3, 16, 16});
  std::int64_t p = 0, f = 0;
  for (const auto& row : r.rows) p += row.params, f += row.flops;
  CHECK(p == r.total_params);
  CHECK(f == r.total_flops);
  CHECK(r.total_params == static_cast<std::int64_t>(m.parameter_count()));
  CHECK(r.rows.size() == m.layers.size());
}

TEST_CASE("FLOPs depend only on shapes") {
  ModelGraph a = build_plain_cnn({1, 3, 12, 12}, {4, 6}, 3, {1});
  ModelGraph b = a;
  std::mt19937_64 rng(2);
  oracle::randomize_params(b, rng, 5.0f);
  CHECK(count_flops(a, {1, 3, 12, 12}).total_flops == count_flops(b, {1, 3, 12, 12}).total_flops);
  // Reported per image.
  CHECK(count_flops(a, {4, 3, 12, 12}).total_flops == count_flops(a, {1, 3, 12, 12}).total_flops);
}

TEST_CASE("pruning scales this layer's and the next layer's FLOPs") {
  const ModelGraph m = build_plain_cnn({1, 3, 16, 16}, {8, 12, 6}, 3, {3, false});
  const PruneSite site = resolve_site(m, "conv2");
  const ModelGraph p = prune_layer_pair(m, site, std::vector<int>{0, 2, 5});  // keeps 1/4
  const CostReport before = count_flops(m, {1, 3, 16, 16});
  const CostReport after = count_flops(p, {1, 3, 16, 16});
  auto flops = [](const CostReport& r, const std::string& id) {
    for (const auto& row : r.rows)
      if (row.id == id) return row.flops;
    return std::int64_t{-1};
  };
  CHECK(flops(after, "conv2") * 4 == flops(before, "conv2"));
  CHECK(flops(after, "conv3") * 4 == flops(before, "conv3"));
  CHECK(flops(after, "conv1") == flops(before, "conv1"));
}

TEST_CASE("VGG-16 and ResNet-50 totals") {
  const ModelGraph vgg = build_vgg16(1000, {0, false});
  const ModelGraph res = build_resnet50(1000, {0, false});
  const auto t0 = std::chrono::steady_clock::now();
  const CostReport v = cost_report(vgg, {1, 3, 224, 224});
  const CostReport r = cost_report(res, {1, 3, 224, 224});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 1.0);
  CHECK(within(v.total_params, 138.34e6, 0.001));
  CHECK(within(v.total_flops, 30.94e9, 0.005));
  CHECK(within(r.total_params, 25.56e6, 0.005));
  CHECK(within(r.total_flops, 7.72e9, 0.01));
}

TEST_CASE("ThiNet-Conv and ThiNet-GAP structural numbers") {
  const CostReport conv = cost_report(prune_first_ten(build_vgg16(1000, {0, false})), {1, 3, 224, 224});
  CHECK(within(conv.total_params, 131.44e6, 0.01));
  CHECK(within(conv.total_flops, 9.58e9, 0.01));
  const CostReport gap = cost_report(prune_first_ten(build_vgg16_gap(1000, {0, false})), {1, 3, 224, 224});
  CHECK(within(gap.total_params, 8.32e6, 0.05));
  CHECK(within(gap.total_flops, 9.34e9, 0.05));
}

TEST_CASE("cost CSV") {
  const ModelGraph m = single_conv({1, 3, 5, 5}, 2, 3, true);
  std::ostringstream os;
  write_cost_csv(cost_report(m, {1, 3, 5, 5}), os);
  const std::string csv = os.str();
  CHECK(csv.rfind("layer,kind,params,flops,out_c,out_h,out_w\n", 0) == 0);
  CHECK(csv.find("conv,conv,56,") != std::string::npos);
  CHECK(csv.find("total") != std::string::npos);
}
