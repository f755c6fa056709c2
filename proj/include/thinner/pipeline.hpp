// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

// Layer-by-layer pruning: for each scheduled site, collect samples, select
// channels, optionally rescale by least squares, fold, cut, and fine-tune.

#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "thinner/finetune.hpp"
#include "thinner/model.hpp"
#include "thinner/model_io.hpp"

namespace thinner {

enum class Method { thinet, thinet_no_w, weight_sum, apoz, random };

std::string_view to_string(Method m);
/// Throws ConfigError listing the valid names.
Method parse_method(std::string_view name);
const std::vector<std::string>& method_names();

struct ScheduleEntry {
  std::string layer;
  double rate = 1.0;
};

/// JSON: [{"layer": "conv1_1", "rate": 0.5}, ...]. Throws ConfigError with
/// a schema diagnostic.
std::vector<ScheduleEntry> parse_schedule(const nlohmann::json& j);
nlohmann::json schedule_to_json(std::span<const ScheduleEntry> schedule);

/// Every prunable site at `rate`. VGG-style models (layers named conv5_*)
/// stop at conv4_3.
std::vector<ScheduleEntry> default_schedule(const ModelGraph& model, double rate);

struct PruneConfig {
  Method method = Method::thinet;
  int images = 10;
  int locations_per_image = 10;
  std::uint64_t seed = 0;
  /// Fine-tuning after each site; epochs == 0 disables it.
  TrainConfig finetune = TrainConfig::per_site_default();
  /// Extra epochs after the last site.
  int final_epochs = 3;
  /// Collect samples for heuristic methods too, so their reconstruction
  /// error is reported.
  bool measure_reconstruction = false;
};

struct SiteReport {
  std::string layer;
  std::string next;
  double rate = 1.0;
  int channels = 0;
  std::vector<int> kept;
  std::vector<int> removed;
  /// Final greedy objective (NaN for other methods).
  double objective = 0.0;
  /// Reconstruction error with unit weights and with the weights actually
  /// folded into the model (equal unless least squares was applied). NaN
  /// when no samples were collected.
  double recon_error_unscaled = 0.0;
  double recon_error = 0.0;
  std::int64_t params_before = 0, params_after = 0;
  std::int64_t flops_before = 0, flops_after = 0;
  std::optional<EpochMetrics> finetune;
};

struct PruneReport {
  Method method = Method::thinet;
  std::vector<SiteReport> sites;
  std::vector<EpochMetrics> final_history;
};

struct PruneOutcome {
  ModelGraph model;
  PruneReport report;
};

/// Sites are processed in schedule order on the progressively pruned model.
/// A site with rate 1 keeps every channel and leaves the model untouched.
/// Errors are rethrown with the failing site's layer id.
PruneOutcome prune_network(const ModelGraph& model, const Dataset& data,
                           std::span<const ScheduleEntry> schedule, const PruneConfig& config);

nlohmann::json to_json(const PruneReport& report);
void write_report_csv(const PruneReport& report, std::ostream& os);

struct ComparisonRow {
  Method method;
  double rate;
  std::uint64_t seed;
  std::string site;
  double recon_error;
  double accuracy;
};

/// Runs prune_network for every method x rate (reconstruction always
/// measured) on default_schedule(model, rate) and evaluates the result on
/// `data`.
std::vector<ComparisonRow> compare_methods(const ModelGraph& model, const Dataset& data,
                                           std::span<const Method> methods,
                                           std::span<const double> rates,
                                           const PruneConfig& base);

void write_comparison_csv(std::span<const ComparisonRow> rows, std::ostream& os);

}  // namespace thinner
