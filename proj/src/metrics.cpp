// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "thinner/metrics.hpp"

#include <cstdio>
#include <iomanip>

namespace thinner {
namespace {

std::int64_t layer_params(const LayerSpec& spec, const Shape& in) {
  switch (spec.kind) {
    case LayerKind::conv:
      return static_cast<std::int64_t>(spec.out_channels) * in.c * spec.kernel * spec.kernel +
             (spec.bias ? spec.out_channels : 0);
    case LayerKind::fc:
      return static_cast<std::int64_t>(in.sample_size()) * spec.out_channels + spec.out_channels;
    case LayerKind::bn_affine:
      return 2 * static_cast<std::int64_t>(in.c);
    default:
      return 0;
  }
}

std::int64_t layer_flops(const LayerSpec& spec, const Shape& in, const Shape& out) {
  switch (spec.kind) {
    case LayerKind::conv:
      return 2 * static_cast<std::int64_t>(spec.kernel) * spec.kernel * in.c * out.c * out.h * out.w;
    case LayerKind::fc:
      return 2 * static_cast<std::int64_t>(in.sample_size()) * spec.out_channels;
    default:
      return 0;
  }
}

CostReport build(const ModelGraph& model, Shape input, bool params, bool flops) {
  input.n = 1;
  const auto shapes = infer_shapes(model, input);
  CostReport r;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& spec = model.layers[i];
    const Shape in = spec.inputs.empty() ? input : shapes[model.index_of(spec.inputs[0])];
    CostReport::Row row{spec.id, spec.kind, 0, 0, shapes[i]};
    if (params) row.params = layer_params(spec, in);
    if (flops) row.flops = layer_flops(spec, in, shapes[i]);
    r.total_params += row.params;
    r.total_flops += row.flops;
    r.rows.push_back(std::move(row));
  }
  return r;
}

}  // namespace

CostReport count_params(const ModelGraph& model) {
  return build(model, model.input_shape, true, false);
}

CostReport count_flops(const ModelGraph& model, Shape input) {
  return build(model, input, false, true);
}

CostReport cost_report(const ModelGraph& model, Shape input) {
  return build(model, input, true, true);
}

void write_cost_csv(const CostReport& report, std::ostream& os) {
  os << "layer,kind,params,flops,out_c,out_h,out_w\n";
  for (const auto& r : report.rows) {
    os << r.id << ',' << to_string(r.kind) << ',' << r.params << ',' << r.flops << ','
       << r.output.c << ',' << r.output.h << ',' << r.output.w << '\n';
  }
  os << "total,,"  << report.total_params << ',' << report.total_flops << ",,,\n";
}

void write_cost_table(const CostReport& report, std::ostream& os) {
  os << std::left << std::setw(24) << "layer" << std::setw(14) << "kind" << std::right
     << std::setw(14) << "params" << std::setw(18) << "flops" << "  output\n";
  for (const auto& r : report.rows) {
    if (r.params == 0 && r.flops == 0) continue;
    os << std::left << std::setw(24) << r.id << std::setw(14) << to_string(r.kind) << std::right
       << std::setw(14) << r.params << std::setw(18) << r.flops << "  " << r.output.c << 'x'
       << r.output.h << 'x' << r.output.w << '\n';
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "total: %.2fM params, %.2fB FLOPs\n",
                report.total_params / 1e6, report.total_flops / 1e9);
  os << buf;
}

}  // namespace thinner
