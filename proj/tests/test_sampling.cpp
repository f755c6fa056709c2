// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracle.hpp"
#include "thinner/builders.hpp"
#include "thinner/error.hpp"
#include "thinner/parallel.hpp"
#include "thinner/sampling.hpp"
#include "thinner/selection.hpp"

using namespace thinner;

namespace {

Dataset noise_data(int n, Shape chw, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset d{oracle::random_tensor({n, chw.c, chw.h, chw.w}, rng), std::vector<int>(n, 0)};
  return d;
}

ModelGraph random_net(std::uint64_t seed) {
  ModelGraph m = build_plain_cnn({1, 3, 10, 10}, {6, 5}, 3, {seed});
  std::mt19937_64 rng(seed);
  oracle::randomize_params(m, rng);
  return m;
}

SampleSet hand_samples() {
  SampleSet s;
  s.rows = 2;
  s.channels = 3;
  s.xhat = {1, 2, 3, 0, 1, 1};
  s.yhat = {6, 2};
  return s;
}

}  // namespace

TEST_CASE("site resolution") {
  const ModelGraph m = build_plain_cnn({1, 3, 16, 16}, {4, 4, 4}, 3, {0, false});
  const PruneSite s = resolve_site(m, "conv1");
  CHECK(s.next == "conv2");
  CHECK(s.path == std::vector<std::string>{"relu1", "pool1"});
  CHECK(s.window_source() == "pool1");
  CHECK_THROWS_AS(resolve_site(m, "conv3"), ConfigError);
  CHECK_THROWS_AS(resolve_site(m, "relu1"), ConfigError);

  const ModelGraph r = build_residual_cnn({1, 3, 8, 8}, 8, 4, 1, 3, {0, false});
  CHECK(resolve_site(r, "b1_conv1").path == std::vector<std::string>{"b1_bn1", "b1_relu1"});
  try {
    resolve_site(r, "b1_conv3");
    FAIL("expected error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("b1_add") != std::string::npos);
  }
}

TEST_CASE("zero kernel gives zero samples") {
  ModelGraph m = random_net(1);
  m.params_of("conv2").weight.fill(0.0f);
  m.params_of("conv2").bias.assign(5, 0.0f);
  const SampleSet s = collect_samples(m, noise_data(6, {1, 3, 10, 10}, 2), resolve_site(m, "conv1"), 4, 7, 3);
  CHECK(s.rows == 28);
  for (double v : s.xhat) CHECK(v == 0.0);
  for (double v : s.yhat) CHECK(v == 0.0);
}

TEST_CASE("identity 1x1 kernel copies one channel") {
  ModelGraph m;
  m.input_shape = {1, 2, 5, 5};
  m.classes = 2;
  LayerSpec c1, r, c2;
  c1.id = "c1", c1.kind = LayerKind::conv, c1.out_channels = 3, c1.kernel = 3, c1.pad = 1;
  r.id = "r", r.kind = LayerKind::relu, r.inputs = {"c1"};
  c2.id = "c2", c2.kind = LayerKind::conv, c2.inputs = {"r"}, c2.out_channels = 1, c2.kernel = 1;
  m.layers = {c1, r, c2};
  allocate_params(m);
  std::mt19937_64 rng(4);
  oracle::randomize_params(m, rng);
  m.params_of("c2").weight = Tensor({1, 3, 1, 1}, std::vector<float>{0, 1, 0});

  const Dataset d = noise_data(5, {1, 2, 5, 5}, 5);
  const SampleSet s = collect_samples(m, d, resolve_site(m, "c1"), 5, 10, 6);
  // Every sampled value of column 1 must be a post-relu activation of channel 1.
  std::vector<float> relu_values;
  const auto acts = forward_all(m, d.images);
  for (int n = 0; n < 5; ++n)
    for (int i = 0; i < 25; ++i) relu_values.push_back(acts[1].at(n, 1, i / 5, i % 5));
  for (int i = 0; i < s.rows; ++i) {
    CHECK(s.x(i, 0) == 0.0);
    CHECK(s.x(i, 2) == 0.0);
    CHECK(s.x(i, 1) >= 0.0);
    CHECK(std::find(relu_values.begin(), relu_values.end(), static_cast<float>(s.x(i, 1))) != relu_values.end());
  }
}

TEST_CASE("rows decompose the sampled output") {
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    const ModelGraph m = random_net(seed);
    const Dataset d = noise_data(8, {1, 3, 10, 10}, seed + 100);
    const SampleSet s = collect_samples(m, d, resolve_site(m, "conv1"), 8, 20, seed);
    REQUIRE(s.rows == 160);
    // Every yhat is some conv2 output minus its bias.
    const auto acts = forward_all(m, d.images);
    const Tensor& y = acts[m.index_of("conv2")];
    const auto& b = m.params_of("conv2").bias;
    for (int i = 0; i < s.rows; ++i) {
      double sum = 0;
      for (double v : s.row(i)) sum += v;
      CHECK(std::abs(sum - s.yhat[i]) < 1e-4);
      bool found = false;
      for (std::size_t j = 0; j < y.size() && !found; ++j) {
        const int d_ch = static_cast<int>((j / y.shape().plane()) % y.shape().c);
        found = std::abs(y.data()[j] - b[d_ch] - s.yhat[i]) < 1e-6;
      }
      CHECK(found);
    }
  }
}

TEST_CASE("reconstruction error") {
  const SampleSet s = hand_samples();
  CHECK(reconstruction_error(s, std::vector<int>{0, 2}) == 5.0);
  CHECK(reconstruction_error(s, std::vector<int>{}) == 40.0);
  CHECK(reconstruction_error(s, std::vector<int>{0, 1, 2}) == 0.0);
  CHECK(reconstruction_error(s, std::vector<int>{0, 2}, std::vector<double>{2, 1}) == doctest::Approx(1 + 1));
  CHECK_THROWS_AS(reconstruction_error(s, std::vector<int>{0, 2}, std::vector<double>{1}), ConfigError);
  CHECK_THROWS_AS(reconstruction_error(s, std::vector<int>{3}), ConfigError);

  const ModelGraph m = random_net(20);
  const SampleSet real = collect_samples(m, noise_data(5, {1, 3, 10, 10}, 21), resolve_site(m, "conv1"), 5, 10, 22);
  CHECK(reconstruction_error(real, std::vector<int>{0, 1, 2, 3, 4, 5}) < 1e-6);
}

TEST_CASE("kept-set error equals the removed-set objective") {
  const ModelGraph m = random_net(30);
  const SampleSet s = collect_samples(m, noise_data(10, {1, 3, 10, 10}, 31), resolve_site(m, "conv1"), 10, 10, 32);
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> keep, removed;
    for (int c = 0; c < s.channels; ++c) (rng() & 1 ? keep : removed).push_back(c);
    const double e = reconstruction_error(s, keep);
    const double o = removal_objective(s, removed);
    CHECK(std::abs(e - o) <= 1e-5);
  }
}

TEST_CASE("zeroing an input channel zeroes only its column") {
  // Layer i is a 1x1 conv whose filter c is zeroed, so channel c of the
  // window is exactly zero.
  ModelGraph m = random_net(40);
  auto& p = m.params_of("conv1");
  const int c = 2, per = 3 * 3 * 3;
  std::fill(p.weight.data().begin() + c * per, p.weight.data().begin() + (c + 1) * per, 0.0f);
  p.bias[c] = 0.0f;
  const ModelGraph base = random_net(40);
  const Dataset d = noise_data(6, {1, 3, 10, 10}, 41);
  const SampleSet a = collect_samples(base, d, resolve_site(base, "conv1"), 6, 10, 42);
  const SampleSet b = collect_samples(m, d, resolve_site(m, "conv1"), 6, 10, 42);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.channels; ++j) {
      if (j == c) CHECK(b.x(i, j) == 0.0);
      else CHECK(b.x(i, j) == a.x(i, j));
    }
}

TEST_CASE("sampling is deterministic") {
  const ModelGraph m = random_net(50);
  const Dataset d = noise_data(40, {1, 3, 10, 10}, 51);
  const PruneSite site = resolve_site(m, "conv1");
  set_max_threads(1);
  const SampleSet a = collect_samples(m, d, site, 30, 12, 52);
  set_max_threads(4);
  const SampleSet b = collect_samples(m, d, site, 30, 12, 52);
  set_max_threads(threads_from_env(1));
  CHECK(a.xhat == b.xhat);
  CHECK(a.yhat == b.yhat);
  const SampleSet c = collect_samples(m, d, site, 30, 12, 53);
  CHECK(a.yhat != c.yhat);
}

TEST_CASE("sampling errors") {
  const Dataset d = noise_data(4, {1, 3, 10, 10}, 60);
  SUBCASE("single channel") {
    const ModelGraph m = build_plain_cnn({1, 3, 10, 10}, {1, 4}, 3, {1});
    CHECK_THROWS_AS(collect_samples(m, d, resolve_site(m, "conv1"), 2, 2, 0), ConfigError);
  }
  SUBCASE("kernel larger than the window") {
    // The unpadded 3x3 conv4 reads a 1x1 map after three pools.
    ModelGraph m = build_plain_cnn({1, 3, 8, 8}, {4, 4, 4, 4}, 3, {1});
    m.layer("conv4").pad = 0;
    CHECK_THROWS_AS(collect_samples(m, noise_data(4, {1, 3, 8, 8}, 61), resolve_site(m, "conv3"), 2, 2, 0),
                    ShapeError);
  }
  SUBCASE("too many images or locations") {
    const ModelGraph m = random_net(62);
    CHECK_THROWS_AS(collect_samples(m, d, resolve_site(m, "conv1"), 5, 2, 0), ConfigError);
    CHECK_THROWS_AS(collect_samples(m, d, resolve_site(m, "conv1"), 2, 5 * 5 * 5 + 1, 0), ConfigError);
  }
}

TEST_CASE("samples CSV has channel ids and yhat") {
  std::ostringstream os;
  write_samples_csv(hand_samples(), os);
  CHECK(os.str() == "0,1,2,yhat\n1,2,3,6\n0,1,1,2\n");
}
