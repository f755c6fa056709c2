// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <filesystem>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "commands.hpp"
#include "thinner/error.hpp"
#include "thinner/parallel.hpp"
#include "thinner/pipeline.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string abs_path(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

struct Common {
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--seed", c.seed, "Master seed for all random sub-streams");
  cmd->add_option("--threads", c.threads, "Worker threads (THINNER_THREADS fallback)");
  auto* o = cmd->add_option("--out", c.out, "Output directory");
  if (out_required) o->required();
}

void finish_common(json& j, const Common& c) {
  j["seed"] = c.seed;
  j["threads"] = c.threads > 0 ? c.threads
                               : thinner::threads_from_env(
                                     std::max(1, static_cast<int>(std::thread::hardware_concurrency())));
  if (!c.out.empty()) j["out"] = abs_path(c.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"thinner: data-driven filter pruning for CNNs"};
  app.set_version_flag("--version", thinner::cli::kVersion);
  app.require_subcommand(1);

  json config;
  std::string command;
  Common common;

  // stats
  std::string model, data, schedule, method = "thinet", arch, manifest;
  std::vector<int> input, widths, shape;
  std::vector<double> rates;
  std::vector<std::string> methods;
  int classes = 4, per_class = 50, images = 10, locations = 10, finetune_epochs = 1,
      final_epochs = 3, epochs = 1, batch = 32, width = 16, bottleneck = 8, blocks = 2;
  double lr = 1e-2, prune_lr = 1e-3, noise = 0.5, rate = 0.5;

  auto* stats = app.add_subcommand("stats", "Parameter and FLOP counts per layer");
  stats->add_option("--model", model, "Model manifest (.json)")->required();
  stats->add_option("--input", input, "Input C H W (default: model input)")->expected(3)->delimiter(',');
  add_common(stats, common, false);

  auto* build = app.add_subcommand("build", "Write a freshly initialized standard model");
  build->add_option("--arch", arch, "vgg16 | vgg16_gap | resnet50 | plain | residual")->required();
  build->add_option("--classes", classes, "Class count")->capture_default_str();
  build->add_option("--input", input, "Input C,H,W (plain/residual)")->expected(3)->delimiter(',');
  build->add_option("--widths", widths, "Conv widths (plain)")->delimiter(',');
  build->add_option("--width", width, "Block output width (residual)");
  build->add_option("--bottleneck", bottleneck, "Bottleneck width (residual)");
  build->add_option("--blocks", blocks, "Block count (residual)");
  add_common(build, common, true);

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic Gaussian-blob dataset");
  gen->add_option("--classes", classes)->capture_default_str();
  gen->add_option("--per-class", per_class)->capture_default_str();
  gen->add_option("--shape", shape, "Image C,H,W")->required()->expected(3)->delimiter(',');
  gen->add_option("--noise", noise, "Noise standard deviation")->capture_default_str();
  add_common(gen, common, true);

  auto* prune = app.add_subcommand("prune", "Prune a model layer by layer");
  prune->add_option("--model", model)->required();
  prune->add_option("--data", data)->required();
  prune->add_option("--schedule", schedule, "JSON list of {layer, rate}");
  prune->add_option("--rate", rate, "Rate for the default schedule when --schedule is absent");
  prune->add_option("--method", method, "thinet | thinet_no_w | weight_sum | apoz | random")
      ->capture_default_str();
  prune->add_option("--images", images)->capture_default_str();
  prune->add_option("--locations", locations, "Sampled locations per image")->capture_default_str();
  prune->add_option("--finetune-epochs", finetune_epochs)->capture_default_str();
  prune->add_option("--final-epochs", final_epochs)->capture_default_str();
  prune->add_option("--lr", prune_lr)->capture_default_str();
  prune->add_option("--batch", batch)->capture_default_str();
  add_common(prune, common, true);

  auto* compare = app.add_subcommand("compare", "Compare channel selection methods");
  compare->add_option("--model", model)->required();
  compare->add_option("--data", data)->required();
  compare->add_option("--rates", rates)->required()->delimiter(',');
  compare->add_option("--methods", methods)->required()->delimiter(',');
  compare->add_option("--images", images)->capture_default_str();
  compare->add_option("--locations", locations)->capture_default_str();
  compare->add_option("--finetune-epochs", finetune_epochs)->capture_default_str();
  compare->add_option("--lr", prune_lr)->capture_default_str();
  compare->add_option("--batch", batch)->capture_default_str();
  add_common(compare, common, true);

  auto* finetune = app.add_subcommand("finetune", "Train a model with SGD");
  finetune->add_option("--model", model)->required();
  finetune->add_option("--data", data)->required();
  finetune->add_option("--epochs", epochs)->capture_default_str();
  finetune->add_option("--lr", lr)->capture_default_str();
  finetune->add_option("--batch", batch)->capture_default_str();
  add_common(finetune, common, true);

  auto* eval = app.add_subcommand("eval", "Top-1 accuracy and mean loss");
  eval->add_option("--model", model)->required();
  eval->add_option("--data", data)->required();
  add_common(eval, common, false);

  auto* rerun = app.add_subcommand("rerun", "Reproduce a run from its run_manifest.json");
  rerun->add_option("--manifest", manifest)->required();
  add_common(rerun, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    thinner::set_max_threads(common.threads > 0 ? common.threads : thinner::threads_from_env(1));
    if (rerun->parsed()) {
      return thinner::cli::cmd_rerun(manifest, common.out, common.threads, std::cout);
    }
    auto* sub = app.get_subcommands().front();
    command = sub->get_name();
    if (!model.empty()) config["model"] = abs_path(model);
    if (!data.empty()) config["data"] = abs_path(data);
    if (!input.empty()) config["input"] = input;
    if (command == "build") {
      config["arch"] = arch;
      config["classes"] = classes;
      if (!widths.empty()) config["widths"] = widths;
      config["width"] = width;
      config["bottleneck"] = bottleneck;
      config["blocks"] = blocks;
    } else if (command == "gen-data") {
      config["classes"] = classes;
      config["per_class"] = per_class;
      config["shape"] = shape;
      config["noise"] = noise;
    } else if (command == "prune" || command == "compare") {
      if (command == "prune") {
        if (!schedule.empty()) config["schedule"] = abs_path(schedule);
        else config["rate"] = rate;
        config["method"] = method;
        config["final_epochs"] = final_epochs;
      } else {
        config["rates"] = rates;
        config["methods"] = methods;
        for (const auto& m : methods) thinner::parse_method(m);
      }
      config["images"] = images;
      config["locations"] = locations;
      config["finetune_epochs"] = finetune_epochs;
      config["lr"] = prune_lr;
      config["batch"] = batch;
    } else if (command == "finetune") {
      config["epochs"] = epochs;
      config["lr"] = lr;
      config["batch"] = batch;
    }
    finish_common(config, common);
    return thinner::cli::dispatch(command, config, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "thinner: " << e.what() << '\n';
    return 1;
  }
}
