// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "thinner/pipeline.hpp"

#include <cmath>
#include <iomanip>
#include <limits>

#include "thinner/error.hpp"
#include "thinner/lsq_prune.hpp"
#include "thinner/metrics.hpp"
#include "thinner/random.hpp"
#include "thinner/sampling.hpp"
#include "thinner/selection.hpp"

namespace thinner {
namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::pair<Method, std::string>>& method_table() {
  static const std::vector<std::pair<Method, std::string>> table{
      {Method::thinet, "thinet"},
      {Method::thinet_no_w, "thinet_no_w"},
      {Method::weight_sum, "weight_sum"},
      {Method::apoz, "apoz"},
      {Method::random, "random"},
  };
  return table;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_number(std::ostream& os, double v) {
  if (std::isfinite(v)) os << v;
}

bool needs_samples(Method m) { return m == Method::thinet || m == Method::thinet_no_w; }

}  // namespace

std::string_view to_string(Method m) {
  for (const auto& [k, name] : method_table())
    if (k == m) return name;
  return "unknown";
}

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& entry : method_table()) out.push_back(entry.second);
    return out;
  }();
  return names;
}

Method parse_method(std::string_view name) {
  for (const auto& [k, n] : method_table())
    if (n == name) return k;
  std::string valid;
  for (const auto& n : method_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown method '" + std::string(name) + "'; valid methods: " + valid);
}

std::vector<ScheduleEntry> parse_schedule(const json& j) {
  if (!j.is_array()) throw ConfigError("schedule must be a JSON array of {\"layer\", \"rate\"} objects");
  std::vector<ScheduleEntry> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    const std::string where = "schedule[" + std::to_string(i) + "]";
    if (!e.is_object()) throw ConfigError(where + ": expected an object");
    if (!e.contains("layer") || !e["layer"].is_string()) {
      throw ConfigError(where + ": \"layer\" must be a string");
    }
    if (!e.contains("rate") || !e["rate"].is_number()) {
      throw ConfigError(where + ": \"rate\" must be a number");
    }
    for (const auto& [key, value] : e.items())
      if (key != "layer" && key != "rate") throw ConfigError(where + ": unexpected key \"" + key + "\"");
    const double rate = e["rate"].get<double>();
    if (!(rate > 0.0 && rate <= 1.0)) throw ConfigError(where + ": \"rate\" must be in (0, 1]");
    out.push_back({e["layer"].get<std::string>(), rate});
  }
  return out;
}

json schedule_to_json(std::span<const ScheduleEntry> schedule) {
  json out = json::array();
  for (const auto& e : schedule) out.push_back({{"layer", e.layer}, {"rate", e.rate}});
  return out;
}

std::vector<ScheduleEntry> default_schedule(const ModelGraph& model, double rate) {
  std::vector<ScheduleEntry> out;
  for (const auto& site : prunable_sites(model)) {
    // VGG keeps its last conv group intact; those layers hold few FLOPs.
    if (site.layer.rfind("conv5_", 0) == 0) continue;
    out.push_back({site.layer, rate});
  }
  return out;
}

PruneOutcome prune_network(const ModelGraph& model, const Dataset& data,
                           std::span<const ScheduleEntry> schedule, const PruneConfig& config) {
  config.finetune.validate();
  PruneOutcome out{model, {}};
  out.report.method = config.method;
  const Shape input = model.input_shape;

  for (std::size_t index = 0; index < schedule.size(); ++index) {
    const ScheduleEntry& entry = schedule[index];
    const std::string tag = "/" + std::to_string(index);
    try {
      ModelGraph& current = out.model;
      const PruneSite site = resolve_site(current, entry.layer);
      const int channels = current.layer(site.layer).out_channels;
      const CostReport before = cost_report(current, input);

      SiteReport r;
      r.layer = site.layer;
      r.next = site.next;
      r.rate = entry.rate;
      r.channels = channels;
      r.objective = kNaN;
      r.recon_error_unscaled = kNaN;
      r.recon_error = kNaN;
      r.params_before = r.params_after = before.total_params;
      r.flops_before = r.flops_after = before.total_flops;

      if (kept_count(channels, entry.rate) == channels) {
        for (int c = 0; c < channels; ++c) r.kept.push_back(c);
        out.report.sites.push_back(std::move(r));
        continue;
      }

      std::optional<SampleSet> samples;
      if (needs_samples(config.method) || config.measure_reconstruction) {
        samples = collect_samples(current, data, site, std::min(config.images, data.size()),
                                  config.locations_per_image,
                                  substream_seed(config.seed, "sampling" + tag));
      }

      SelectionResult sel;
      switch (config.method) {
        case Method::thinet:
        case Method::thinet_no_w:
          sel = greedy_select(*samples, entry.rate);
          if (!sel.objective_trace.empty()) r.objective = sel.objective_trace.back();
          break;
        case Method::weight_sum:
          sel = keep_highest(criterion_weight_sum(current, site.layer), entry.rate);
          break;
        case Method::apoz:
          sel = keep_lowest(criterion_apoz(current, data, site.layer), entry.rate);
          break;
        case Method::random:
          sel = criterion_random(channels, entry.rate, substream_seed(config.seed, "selection" + tag));
          break;
      }
      r.kept = sel.kept;
      r.removed = sel.removed;

      if (samples) {
        r.recon_error_unscaled = reconstruction_error(*samples, sel.kept);
        r.recon_error = r.recon_error_unscaled;
      }
      if (config.method == Method::thinet) {
        const auto w = least_squares_weights(*samples, sel.kept);
        r.recon_error = reconstruction_error(*samples, sel.kept, w);
        current = fold_scaling(std::move(current), site, sel.kept, w);
      }
      current = prune_layer_pair(std::move(current), site, sel.kept);

      if (config.finetune.epochs > 0) {
        TrainConfig tc = config.finetune;
        tc.seed = substream_seed(config.seed, "shuffle" + tag);
        auto trained = train(std::move(current), data, tc);
        current = std::move(trained.model);
        r.finetune = trained.history.back();
      }
      const CostReport after = cost_report(current, input);
      r.params_after = after.total_params;
      r.flops_after = after.total_flops;
      out.report.sites.push_back(std::move(r));
    } catch (const TrainingDiverged& e) {
      throw TrainingDiverged(e.epoch(), "site '" + entry.layer + "': " + e.what());
    } catch (const Error& e) {
      throw Error("site '" + entry.layer + "': " + e.what());
    }
  }
  if (config.final_epochs > 0) {
    // Longer final round with the usual 10x drop at two thirds.
    TrainConfig tc = config.finetune;
    tc.epochs = config.final_epochs;
    tc.lr_steps.clear();
    for (const auto& [start, lr] : TrainConfig::desk_default(config.final_epochs).lr_steps)
      tc.lr_steps.push_back({start, tc.learning_rate / 10.0});
    tc.seed = substream_seed(config.seed, "shuffle/final");
    auto trained = train(std::move(out.model), data, tc);
    out.model = std::move(trained.model);
    out.report.final_history = std::move(trained.history);
  }
  return out;
}

json to_json(const PruneReport& report) {
  json sites = json::array();
  for (const auto& s : report.sites) {
    json j{{"layer", s.layer},
           {"next", s.next},
           {"rate", s.rate},
           {"channels", s.channels},
           {"kept", s.kept},
           {"removed", s.removed},
           {"objective", number_or_null(s.objective)},
           {"recon_error_unscaled", number_or_null(s.recon_error_unscaled)},
           {"recon_error", number_or_null(s.recon_error)},
           {"params_before", s.params_before},
           {"params_after", s.params_after},
           {"flops_before", s.flops_before},
           {"flops_after", s.flops_after}};
    if (s.finetune) j["finetune"] = {{"loss", s.finetune->loss}, {"accuracy", s.finetune->accuracy}};
    sites.push_back(std::move(j));
  }
  json history = json::array();
  for (const auto& h : report.final_history)
    history.push_back({{"epoch", h.epoch}, {"loss", h.loss}, {"accuracy", h.accuracy}});
  return {{"method", std::string(to_string(report.method))}, {"sites", sites}, {"final_history", history}};
}

void write_report_csv(const PruneReport& report, std::ostream& os) {
  os << "layer,next,rate,channels,kept,objective,recon_error_unscaled,recon_error,"
        "params_before,params_after,flops_before,flops_after\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& s : report.sites) {
    os << s.layer << ',' << s.next << ',' << s.rate << ',' << s.channels << ',' << s.kept.size() << ',';
    write_number(os, s.objective);
    os << ',';
    write_number(os, s.recon_error_unscaled);
    os << ',';
    write_number(os, s.recon_error);
    os << ',' << s.params_before << ',' << s.params_after << ',' << s.flops_before << ','
       << s.flops_after << '\n';
  }
}

std::vector<ComparisonRow> compare_methods(const ModelGraph& model, const Dataset& data,
                                           std::span<const Method> methods,
                                           std::span<const double> rates,
                                           const PruneConfig& base) {
  std::vector<ComparisonRow> rows;
  for (Method m : methods)
    for (double rate : rates) {
      PruneConfig cfg = base;
      cfg.method = m;
      cfg.measure_reconstruction = true;
      const auto schedule = default_schedule(model, rate);
      const auto outcome = prune_network(model, data, schedule, cfg);
      const double accuracy = evaluate(outcome.model, data).accuracy;
      for (const auto& s : outcome.report.sites) {
        // Rate-1 sites keep everything, so the error is zero by identity.
        const double err = std::isfinite(s.recon_error) ? s.recon_error : 0.0;
        rows.push_back({m, rate, base.seed, s.layer, err, accuracy});
      }
    }
  return rows;
}

void write_comparison_csv(std::span<const ComparisonRow> rows, std::ostream& os) {
  os << "method,rate,seed,site,recon_error,accuracy\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : rows) {
    os << to_string(r.method) << ',' << r.rate << ',' << r.seed << ',' << r.site << ','
       << r.recon_error << ',' << r.accuracy << '\n';
  }
}

}  // namespace thinner
