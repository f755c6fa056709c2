// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failures.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "fixture.hpp"
#include "gradcheck.hpp"
#include "json.hpp"
#include "oracle.hpp"
#include "tmpdir.hpp"
#include "thinner/builders.hpp"
#include "thinner/lsq_prune.hpp"
#include "thinner/metrics.hpp"
#include "thinner/parallel.hpp"
#include "thinner/pipeline.hpp"
#include "thinner/sampling.hpp"
#include "thinner/selection.hpp"

using namespace thinner;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kParamTolVgg = 0.005, kFlopTolVgg = 0.005;
constexpr double kTolResnet = 0.01;
constexpr double kTolThinetConv = 0.01, kTolThinetGap = 0.05;
constexpr double kCountSeconds = 1.0;
constexpr double kRowIdentityTol = 1e-4;
constexpr double kDualityTol = 1e-5;
constexpr double kOracleRelTol = 1e-4;
constexpr double kSurgeryTol = 1e-4;
constexpr double kGradTol = 1e-4;
constexpr double kFixtureAccuracy = 0.95;
constexpr double kFixtureSeconds = 600;

int failures = 0;

void report(const std::string& id, bool ok, const std::string& what, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " [" << id << "] " << what << " (" << detail << ")" << std::endl;
  if (!ok) ++failures;
}

// Runs a check, turning exceptions into failures.
void criterion(const std::string& id, const std::string& what, const std::function<bool(std::ostream&)>& fn) {
  std::ostringstream detail;
  bool ok = false;
  try {
    ok = fn(detail);
  } catch (const std::exception& e) {
    detail << "exception: " << e.what();
  }
  report(id, ok, what, detail.str());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool near(double v, double target, double tol) { return std::abs(v / target - 1) <= tol; }

Dataset noise_data(int n, Shape chw, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset d{oracle::random_tensor({n, chw.c, chw.h, chw.w}, rng), std::vector<int>(n)};
  for (int i = 0; i < n; ++i) d.labels[i] = i % 2;
  return d;
}

ModelGraph random_plain(std::uint64_t seed) {
  ModelGraph m = build_plain_cnn({1, 3, 12, 12}, {6, 8, 5}, 2, {seed});
  std::mt19937_64 rng(seed);
  oracle::randomize_params(m, rng);
  return m;
}

ModelGraph random_residual(std::uint64_t seed) {
  ModelGraph m = build_residual_cnn({1, 3, 8, 8}, 8, 4, 2, 2, {seed});
  std::mt19937_64 rng(seed);
  oracle::randomize_params(m, rng);
  return m;
}

ModelGraph prune_vgg_half(const ModelGraph& m) {
  PruneConfig c;
  c.method = Method::random;
  c.finetune.epochs = 0;
  c.final_epochs = 0;
  const Dataset d{Tensor({1, 3, 224, 224}), {0}};
  return prune_network(m, d, default_schedule(m, 0.5), c).model;
}

// ---- 1. structural numbers ----

void structural() {
  const ModelGraph vgg = build_vgg16(1000, {0, false});
  const ModelGraph res = build_resnet50(1000, {0, false});
  const Shape in{1, 3, 224, 224};

  criterion("1.1", "VGG-16 and ResNet-50 parameter and FLOP totals", [&](std::ostream& os) {
    const auto t0 = std::chrono::steady_clock::now();
    const CostReport v = cost_report(vgg, in);
    const CostReport r = cost_report(res, in);
    const double secs = seconds_since(t0);
    os << "VGG " << v.total_params / 1e6 << "M/" << v.total_flops / 1e9 << "B, ResNet " << r.total_params / 1e6
       << "M/" << r.total_flops / 1e9 << "B, " << secs << " s";
    return near(v.total_params, 138.34e6, kParamTolVgg) && near(v.total_flops, 30.94e9, kFlopTolVgg) &&
           near(r.total_params, 25.56e6, kTolResnet) && near(r.total_flops, 7.72e9, kTolResnet) &&
           secs < kCountSeconds;
  });

  criterion("1.2", "VGG-16 rate-0.5 schedule on conv1_1..conv4_3 (ThiNet-Conv)", [&](std::ostream& os) {
    const CostReport c = cost_report(prune_vgg_half(vgg), in);
    os << c.total_params / 1e6 << "M/" << c.total_flops / 1e9 << "B vs 131.44M/9.58B";
    return near(c.total_params, 131.44e6, kTolThinetConv) && near(c.total_flops, 9.58e9, kTolThinetConv);
  });

  criterion("1.3", "VGG-16-GAP rate-0.5 schedule (ThiNet-GAP)", [&](std::ostream& os) {
    const CostReport g = cost_report(prune_vgg_half(build_vgg16_gap(1000, {0, false})), in);
    os << g.total_params / 1e6 << "M/" << g.total_flops / 1e9 << "B vs 8.32M/9.34B";
    return near(g.total_params, 8.32e6, kTolThinetGap) && near(g.total_flops, 9.34e9, kTolThinetGap);
  });
}

// ---- 2. properties ----

void properties() {
  criterion("2.1", "every sampled row sums to its output (>=1000 rows, >=5 nets)", [&](std::ostream& os) {
    int rows = 0, nets = 0;
    double worst = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      const bool residual = seed > 3;
      const ModelGraph m = residual ? random_residual(seed) : random_plain(seed);
      const Dataset d = noise_data(20, m.input_shape, seed + 50);
      for (const auto& site : prunable_sites(m)) {
        const SampleSet s = collect_samples(m, d, site, 20, 15, seed);
        for (int i = 0; i < s.rows; ++i) {
          double sum = 0;
          for (double v : s.row(i)) sum += v;
          worst = std::max(worst, std::abs(sum - s.yhat[i]));
        }
        rows += s.rows;
      }
      ++nets;
    }
    os << rows << " rows on " << nets << " nets, worst " << worst;
    return rows >= 1000 && nets >= 5 && worst < kRowIdentityTol;
  });

  criterion("2.2", "kept-set error equals removed-set objective on 100 partitions", [&](std::ostream& os) {
    std::mt19937_64 rng(7);
    std::vector<SampleSet> sets;
    for (std::uint64_t k = 0; k < 5; ++k) {
      const ModelGraph m = random_plain(100 + k);
      sets.push_back(collect_samples(m, noise_data(10, m.input_shape, 200 + k), resolve_site(m, "conv1"), 10, 10, 9));
    }
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const SampleSet& s = sets[trial % 5];
      std::vector<int> keep, removed;
      for (int c = 0; c < s.channels; ++c) (rng() & 1 ? keep : removed).push_back(c);
      worst = std::max(worst, std::abs(reconstruction_error(s, keep) - oracle::removed_objective(s, removed)));
    }
    os << "worst " << worst;
    return worst <= kDualityTol;
  });

  criterion("2.3", "greedy steps are optimal (50 instances) and brute force <= greedy (50)", [&](std::ostream& os) {
    std::mt19937_64 rng(11);
    int steps = 0, step_fail = 0, bf_fail = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const int c = 2 + static_cast<int>(rng() % 15);
      const int m = c + static_cast<int>(rng() % (201 - c));
      const SampleSet s = oracle::random_samples(m, c, rng);
      const double rate = 0.1 + 0.9 * (rng() % 1000) / 1000.0;
      const SelectionResult r = greedy_select(s, rate);
      std::vector<int> removed;
      for (int pick : r.removed) {
        auto with = removed;
        with.push_back(pick);
        const double chosen = oracle::removed_objective(s, with);
        for (int k = 0; k < c; ++k) {
          if (std::find(removed.begin(), removed.end(), k) != removed.end() || k == pick) continue;
          auto other = removed;
          other.push_back(k);
          if (chosen > oracle::removed_objective(s, other) * (1 + 1e-12)) ++step_fail;
        }
        removed = with;
        ++steps;
      }
    }
    for (int trial = 0; trial < 50; ++trial) {
      const int c = 2 + static_cast<int>(rng() % 11);
      const SampleSet s = oracle::random_samples(20 + static_cast<int>(rng() % 181), c, rng);
      const double rate = 0.1 + 0.8 * (rng() % 1000) / 1000.0;
      const SelectionResult g = greedy_select(s, rate);
      const SelectionResult b = brute_force_select(s, rate);
      if (g.removed.empty()) continue;
      if (oracle::removed_objective(s, b.removed) > oracle::removed_objective(s, g.removed) * (1 + 1e-12)) ++bf_fail;
    }
    os << steps << " greedy steps, " << step_fail << " suboptimal; " << bf_fail << " brute-force violations";
    return steps > 0 && step_fail == 0 && bf_fail == 0;
  });

  criterion("2.4", "least squares beats unit weights (100 instances) and matches gradient descent",
            [&](std::ostream& os) {
              std::mt19937_64 rng(13);
              int worse = 0;
              double worst_rel = 0;
              for (int trial = 0; trial < 100; ++trial) {
                const int c = 3 + static_cast<int>(rng() % 10);
                const SampleSet s = oracle::random_samples(40 + static_cast<int>(rng() % 120), c, rng);
                std::vector<int> kept;
                for (int k = 0; k < c; ++k)
                  if (rng() % 3 != 0) kept.push_back(k);
                if (kept.empty()) kept.push_back(static_cast<int>(rng() % c));
                const auto w = least_squares_weights(s, kept);
                const double at_w = reconstruction_error(s, kept, w);
                // Slack for the kept == all case, where both sides are rounding noise.
                double scale = 0;
                for (double y : s.yhat) scale += y * y;
                if (at_w > reconstruction_error(s, kept) + 1e-12 * scale) ++worse;
                const double gd = oracle::residual(s, kept, oracle::gradient_descent_lsq(s, kept, 5000));
                worst_rel = std::max(worst_rel, std::abs(at_w - gd) / std::max(gd, 1e-12 * scale));
              }
              os << worse << " instances worse than unit weights, worst relative gap to gradient descent "
                 << worst_rel;
              return worse == 0 && worst_rel <= kOracleRelTol;
            });

  criterion("2.5", "pruned+folded output equals masked original (plain and residual, 20 inputs each)",
            [&](std::ostream& os) {
              double worst = 0;
              int instances = 0;
              for (std::uint64_t seed = 20; seed < 23; ++seed)
                for (bool residual : {false, true}) {
                  const ModelGraph m = residual ? random_residual(seed) : random_plain(seed);
                  const Dataset d = noise_data(12, m.input_shape, seed);
                  for (const auto& site : prunable_sites(m)) {
                    const SampleSet s = collect_samples(m, d, site, 12, 10, seed);
                    const SelectionResult sel = greedy_select(s, 0.5);
                    const auto w = least_squares_weights(s, sel.kept);
                    const ModelGraph p = prune_layer_pair(fold_scaling(m, site, sel.kept, w), site, sel.kept);
                    ChannelScaling mask{site.window_source(), std::vector<float>(s.channels, 0.0f)};
                    for (std::size_t j = 0; j < sel.kept.size(); ++j)
                      mask.factors[sel.kept[j]] = static_cast<float>(w[j]);
                    std::mt19937_64 rng(seed * 7);
                    const Shape in = m.input_shape;
                    const Tensor x = oracle::random_tensor({20, in.c, in.h, in.w}, rng);
                    const Tensor a = forward(p, x);
                    const Tensor b = forward(m, x, std::span<const ChannelScaling>(&mask, 1));
                    double scale = 1;
                    for (float v : b.data()) scale = std::max(scale, double(std::abs(v)));
                    for (std::size_t i = 0; i < a.size(); ++i)
                      worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]) / scale);
                    ++instances;
                  }
                }
              os << instances << " instances, worst " << worst;
              return instances > 0 && worst < kSurgeryTol;
            });

  criterion("2.6", "backward passes match central finite differences for every layer kind", [&](std::ostream& os) {
    using namespace oracle;
    std::mt19937_64 rng(31);
    std::vector<std::pair<ModelGraph, Shape>> cases;
    cases.push_back({tiny_graph({1, 2, 5, 5}, {conv("c", {}, 3, 3, 1, 1)}, rng), {2, 2, 5, 5}});
    cases.push_back({tiny_graph({1, 2, 6, 6}, {conv("c", {}, 2, 3, 2, 1, false)}, rng), {2, 2, 6, 6}});
    cases.push_back({tiny_graph({1, 2, 4, 4}, {spec("r", LayerKind::relu)}, rng), {2, 2, 4, 4}});
    cases.push_back({tiny_graph({1, 2, 4, 4}, {spec("p", LayerKind::maxpool)}, rng), {2, 2, 4, 4}});
    cases.push_back({tiny_graph({1, 3, 3, 4}, {spec("g", LayerKind::gap)}, rng), {2, 3, 3, 4}});
    LayerSpec f = spec("f", LayerKind::fc);
    f.out_channels = 4;
    cases.push_back({tiny_graph({1, 2, 3, 3}, {f}, rng), {3, 2, 3, 3}});
    cases.push_back({tiny_graph({1, 3, 3, 3}, {spec("b", LayerKind::bn_affine)}, rng), {2, 3, 3, 3}});
    cases.push_back({tiny_graph({1, 2, 3, 3}, {conv("c", {}, 2, 1, 1, 0), spec("a", LayerKind::add_junction, {"c", "c"})}, rng),
                     {2, 2, 3, 3}});
    cases.push_back({tiny_graph({1, 2, 2, 2}, {f, spec("s", LayerKind::softmax, {"f"})}, rng), {3, 2, 2, 2}});
    ModelGraph r = build_residual_cnn({1, 2, 6, 6}, 4, 2, 1, 3, {1});
    randomize_params(r, rng);
    cases.push_back({r, {2, 2, 6, 6}});
    double worst = 0;
    int coords = 0, skipped = 0;
    for (const auto& [m, shape] : cases) {
      const GradCheckResult g = gradient_check(m, random_tensor(shape, rng), rng);
      worst = std::max(worst, g.worst);
      coords += g.coordinates;
      skipped += g.skipped;
    }
    os << cases.size() << " graphs, " << coords << " coordinates (" << skipped << " at kinks), worst " << worst;
    return worst < kGradTol && skipped * 8 <= coords;
  });
}

// ---- 3. fixture comparison ----

void fixture_comparison() {
  criterion("3", "synthetic fixture at rate 0.25: ThiNet error lowest in >=7/8 seeds, accuracy >= random mean - sd",
            [&](std::ostream& os) {
              const auto t0 = std::chrono::steady_clock::now();
              const Dataset d = fixture::data();
              const TrainResult base = fixture::trained(d);
              const double base_acc = evaluate(base.model, d).accuracy;
              const std::vector<Method> methods{Method::thinet, Method::weight_sum, Method::apoz, Method::random};
              const std::vector<double> rates{0.25};
              int wins = 0;
              std::vector<double> acc_thinet, acc_random;
              for (std::uint64_t seed = 1; seed <= 8; ++seed) {
                PruneConfig c;
                c.seed = seed;
                const auto rows = compare_methods(base.model, d, methods, rates, c);
                std::map<Method, double> err, acc;
                std::map<Method, int> n;
                for (const auto& r : rows) {
                  err[r.method] += r.recon_error;
                  ++n[r.method];
                  acc[r.method] = r.accuracy;
                }
                for (auto& [m, e] : err) e /= n[m];
                const bool win = err[Method::thinet] <= err[Method::weight_sum] &&
                                 err[Method::thinet] <= err[Method::apoz] && err[Method::thinet] <= err[Method::random];
                wins += win;
                acc_thinet.push_back(acc[Method::thinet]);
                acc_random.push_back(acc[Method::random]);
              }
              auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
              const double rm = mean(acc_random);
              double var = 0;
              for (double a : acc_random) var += (a - rm) * (a - rm);
              const double sd = std::sqrt(var / (acc_random.size() - 1));
              const double tm = mean(acc_thinet);
              const double secs = seconds_since(t0);
              os << "baseline " << base_acc << ", wins " << wins << "/8, ThiNet acc " << tm << ", random " << rm
                 << " +- " << sd << ", " << secs << " s";
              return base_acc >= kFixtureAccuracy && wins >= 7 && tm >= rm - sd && secs < kFixtureSeconds;
            });
}

// ---- 4. CLI reruns ----

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(THINNER_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void cli_rerun() {
  criterion("4", "every CLI command reruns bit-exactly from its manifest with --threads 1", [&](std::ostream& os) {
    testing::TempDir dir("acceptance");
    const fs::path log = dir / "log";
    auto q = [](const fs::path& p) { return p.string(); };
    if (run("build --arch plain --input 3,12,12 --widths 6,8,8 --classes 3 --seed 4 --out " + q(dir / "m"), log) ||
        run("gen-data --classes 3 --per-class 8 --shape 3,12,12 --seed 5 --out " + q(dir / "d"), log)) {
      os << "setup failed: " << testing::read_file(log);
      return false;
    }
    const std::string model = q(dir / "m/model.json"), data = q(dir / "d/dataset.thds");
    const std::vector<std::pair<std::string, std::string>> runs{
        {"build", "build --arch residual --input 3,8,8 --width 8 --bottleneck 4 --blocks 2 --classes 3 --seed 2"},
        {"gen-data", "gen-data --classes 3 --per-class 4 --shape 3,8,8 --seed 6"},
        {"stats", "stats --model " + model},
        {"prune", "prune --model " + model + " --data " + data + " --method thinet --rate 0.5 --seed 8"},
        {"compare", "compare --model " + model + " --data " + data + " --rates 0.5 --methods thinet,apoz --seed 8"},
        {"finetune", "finetune --model " + model + " --data " + data + " --epochs 2 --seed 8"},
        {"eval", "eval --model " + model + " --data " + data},
    };
    int files = 0;
    std::vector<std::string> bad;
    for (const auto& [name, args] : runs) {
      const fs::path first = dir / (name + "-a"), second = dir / (name + "-b");
      if (run(args + " --threads 4 --out " + q(first), log) ||
          run("rerun --manifest " + q(first / "run_manifest.json") + " --threads 1 --out " + q(second), log)) {
        bad.push_back(name + " (exit)");
        continue;
      }
      const auto manifest = nlohmann::json::parse(testing::read_file(first / "run_manifest.json"));
      for (const auto& f : manifest.at("outputs")) {
        ++files;
        const std::string file = f.get<std::string>();
        if (testing::read_file(first / file) != testing::read_file(second / file)) bad.push_back(name + "/" + file);
      }
    }
    os << runs.size() << " commands, " << files << " files compared";
    for (const auto& b : bad) os << ", mismatch " << b;
    return bad.empty() && files > 0;
  });
}

}  // namespace

int main() {
  set_max_threads(threads_from_env(static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))));
  structural();
  properties();
  fixture_comparison();
  cli_rerun();
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
