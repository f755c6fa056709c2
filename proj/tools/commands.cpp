// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "thinner/builders.hpp"
#include "thinner/error.hpp"
#include "thinner/finetune.hpp"
#include "thinner/metrics.hpp"
#include "thinner/model_io.hpp"
#include "thinner/parallel.hpp"
#include "thinner/pipeline.hpp"

namespace thinner::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path out_dir(const json& config) {
  const fs::path dir = config.at("out").get<std::string>();
  fs::create_directories(dir);
  return dir;
}

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

void apply_threads(const json& config) {
  if (config.contains("threads")) set_max_threads(config.at("threads").get<int>());
}

template <typename Writer>
void write_text(const fs::path& path, Writer&& writer) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  os.imbue(std::locale::classic());
  writer(os);
  os.close();
  if (!os) throw FormatError("failed writing " + path.string());
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    const std::vector<std::string>& outputs) {
  json manifest{{"tool", "thinner"},
                {"version", kVersion},
                {"command", command},
                {"config", config},
                {"seed", config.value("seed", std::uint64_t{0})},
                {"outputs", outputs}};
  write_text(dir / kManifestName, [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });
}

Shape parse_chw(const json& v) {
  const auto dims = v.get<std::vector<int>>();
  if (dims.size() != 3) throw ConfigError("shape must be C,H,W");
  Shape s{1, dims[0], dims[1], dims[2]};
  if (!s.valid()) throw ConfigError("shape extents must be positive");
  return s;
}

/// Saves and re-loads so the written files pass their own format checks.
void save_checked_model(const ModelGraph& m, const fs::path& path) {
  save_model(m, path);
  const ModelGraph check = load_model(path);
  if (check.parameter_count() != m.parameter_count()) {
    throw FormatError("written model " + path.string() + " does not round-trip");
  }
}

TrainConfig finetune_config(const json& c, int epochs, std::uint64_t seed) {
  TrainConfig tc = TrainConfig::desk_default(epochs, seed);
  tc.learning_rate = c.value("lr", tc.learning_rate);
  for (auto& step : tc.lr_steps) step.second = tc.learning_rate / 10.0;
  tc.batch_size = c.value("batch", tc.batch_size);
  tc.momentum = c.value("momentum", tc.momentum);
  tc.weight_decay = c.value("weight_decay", tc.weight_decay);
  tc.validate();
  return tc;
}

PruneConfig prune_config(const json& c) {
  PruneConfig pc;
  pc.method = parse_method(c.value("method", "thinet"));
  pc.images = c.value("images", pc.images);
  pc.locations_per_image = c.value("locations", pc.locations_per_image);
  pc.seed = c.value("seed", std::uint64_t{0});
  pc.finetune = finetune_config(c, c.value("finetune_epochs", 0), pc.seed);
  pc.final_epochs = c.value("final_epochs", 0);
  return pc;
}

}  // namespace

int cmd_stats(const json& c, std::ostream& out) {
  apply_threads(c);
  const ModelGraph m = load_model(c.at("model").get<std::string>());
  const Shape input = c.contains("input") ? parse_chw(c.at("input")) : m.input_shape;
  const CostReport r = cost_report(m, input);
  write_cost_table(r, out);
  if (c.contains("out")) {
    const fs::path dir = out_dir(c);
    write_text(dir / "stats.csv", [&](std::ostream& os) { write_cost_csv(r, os); });
    write_manifest(dir, "stats", c, {"stats.csv"});
  }
  return 0;
}

int cmd_build(const json& c, std::ostream& out) {
  apply_threads(c);
  const std::string arch = c.at("arch").get<std::string>();
  const int classes = c.value("classes", 1000);
  BuildOptions opts{c.value("seed", std::uint64_t{0}), true};
  ModelGraph m;
  if (arch == "vgg16") {
    m = build_vgg16(classes, opts);
  } else if (arch == "vgg16_gap") {
    m = build_vgg16_gap(classes, opts);
  } else if (arch == "resnet50") {
    m = build_resnet50(classes, opts);
  } else if (arch == "plain") {
    m = build_plain_cnn(parse_chw(c.at("input")), c.at("widths").get<std::vector<int>>(), classes, opts);
  } else if (arch == "residual") {
    m = build_residual_cnn(parse_chw(c.at("input")), c.value("width", 16), c.value("bottleneck", 8),
                           c.value("blocks", 2), classes, opts);
  } else {
    throw ConfigError("unknown architecture '" + arch +
                      "'; valid: vgg16, vgg16_gap, resnet50, plain, residual");
  }
  const fs::path dir = out_dir(c);
  save_checked_model(m, dir / "model.json");
  write_manifest(dir, "build", c, {"model.json", "model.bin"});
  out << "built " << arch << ": " << m.parameter_count() << " parameters\n";
  return 0;
}

int cmd_gen_data(const json& c, std::ostream& out) {
  apply_threads(c);
  const Dataset d = generate_synthetic(c.value("classes", 4), c.value("per_class", 50),
                                       parse_chw(c.at("shape")), c.value("seed", std::uint64_t{0}),
                                       c.value("noise", 0.5));
  const fs::path dir = out_dir(c);
  save_dataset(d, dir / "dataset.thds");
  load_dataset(dir / "dataset.thds");
  write_manifest(dir, "gen-data", c, {"dataset.thds"});
  out << "wrote " << d.size() << " images\n";
  return 0;
}

int cmd_prune(const json& c, std::ostream& out) {
  apply_threads(c);
  const ModelGraph m = load_model(c.at("model").get<std::string>());
  const Dataset d = load_dataset(c.at("data").get<std::string>(), m.classes);
  std::vector<ScheduleEntry> schedule;
  if (c.contains("schedule")) {
    const std::string path = c.at("schedule").get<std::string>();
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open schedule " + path);
    json j;
    try {
      j = json::parse(is);
    } catch (const json::exception& e) {
      throw ConfigError("schedule " + path + " is not valid JSON: " + e.what());
    }
    schedule = parse_schedule(j);
  } else {
    schedule = default_schedule(m, c.value("rate", 0.5));
  }
  const PruneConfig pc = prune_config(c);
  const PruneOutcome result = prune_network(m, d, schedule, pc);

  const fs::path dir = out_dir(c);
  save_checked_model(result.model, dir / "model.json");
  write_text(dir / "prune_report.csv", [&](std::ostream& os) { write_report_csv(result.report, os); });
  write_text(dir / "prune_report.json", [&](std::ostream& os) {
    json j = to_json(result.report);
    j["schedule"] = schedule_to_json(schedule);
    os << j.dump(2) << '\n';
  });
  write_manifest(dir, "prune", c, {"model.json", "model.bin", "prune_report.csv", "prune_report.json"});
  const CostReport before = cost_report(m, m.input_shape);
  const CostReport after = cost_report(result.model, m.input_shape);
  out << std::fixed << std::setprecision(2) << "params " << before.total_params / 1e6 << "M -> "
      << after.total_params / 1e6 << "M, FLOPs " << before.total_flops / 1e9 << "B -> "
      << after.total_flops / 1e9 << "B\n";
  return 0;
}

int cmd_compare(const json& c, std::ostream& out) {
  apply_threads(c);
  const ModelGraph m = load_model(c.at("model").get<std::string>());
  const Dataset d = load_dataset(c.at("data").get<std::string>(), m.classes);
  std::vector<Method> methods;
  for (const auto& name : c.at("methods").get<std::vector<std::string>>()) methods.push_back(parse_method(name));
  const auto rates = c.at("rates").get<std::vector<double>>();
  for (double r : rates)
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("rates must be in (0, 1]");
  const auto rows = compare_methods(m, d, methods, rates, prune_config(c));
  const fs::path dir = out_dir(c);
  write_text(dir / "compare.csv", [&](std::ostream& os) { write_comparison_csv(rows, os); });
  write_manifest(dir, "compare", c, {"compare.csv"});
  write_comparison_csv(rows, out);
  return 0;
}

int cmd_finetune(const json& c, std::ostream& out) {
  apply_threads(c);
  ModelGraph m = load_model(c.at("model").get<std::string>());
  const Dataset d = load_dataset(c.at("data").get<std::string>(), m.classes);
  const TrainConfig tc = finetune_config(c, c.value("epochs", 1), c.value("seed", std::uint64_t{0}));
  const TrainResult r = train(std::move(m), d, tc);
  const fs::path dir = out_dir(c);
  save_checked_model(r.model, dir / "model.json");
  write_text(dir / "history.csv", [&](std::ostream& os) { write_history_csv(r.history, os); });
  write_manifest(dir, "finetune", c, {"model.json", "model.bin", "history.csv"});
  write_history_csv(r.history, out);
  return 0;
}

int cmd_eval(const json& c, std::ostream& out) {
  apply_threads(c);
  const ModelGraph m = load_model(c.at("model").get<std::string>());
  const Dataset d = load_dataset(c.at("data").get<std::string>(), m.classes);
  const EvalResult r = evaluate(m, d);
  const json j{{"accuracy", r.accuracy}, {"loss", r.loss}, {"images", d.size()}};
  if (c.contains("out")) {
    const fs::path dir = out_dir(c);
    write_text(dir / "eval.json", [&](std::ostream& os) { os << j.dump(2) << '\n'; });
    write_manifest(dir, "eval", c, {"eval.json"});
  }
  out << j.dump() << '\n';
  return 0;
}

int dispatch(const std::string& command, const json& config, std::ostream& out) {
  if (command == "stats") return cmd_stats(config, out);
  if (command == "build") return cmd_build(config, out);
  if (command == "gen-data") return cmd_gen_data(config, out);
  if (command == "prune") return cmd_prune(config, out);
  if (command == "compare") return cmd_compare(config, out);
  if (command == "finetune") return cmd_finetune(config, out);
  if (command == "eval") return cmd_eval(config, out);
  throw ConfigError("unknown command '" + command + "'");
}

int cmd_rerun(const std::string& manifest_path, const std::string& out_override, int threads,
              std::ostream& out) {
  std::ifstream is(manifest_path);
  if (!is) throw ConfigError("cannot open manifest " + manifest_path);
  json manifest;
  try {
    manifest = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("manifest " + manifest_path + " is not valid JSON: " + e.what());
  }
  if (manifest.value("tool", "") != "thinner") throw ConfigError(manifest_path + " is not a run manifest");
  json config = manifest.at("config");
  if (!out_override.empty()) config["out"] = absolute(out_override);
  if (threads > 0) config["threads"] = threads;
  return dispatch(manifest.at("command").get<std::string>(), config, out);
}

}  // namespace thinner::cli
