// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "thinner/model.hpp"

namespace thinner {

/// Per-layer parameter and FLOP counts. FLOPs count a multiply and an add
/// separately (2 per MAC) for conv and fc layers; biases and all other
/// layer kinds contribute nothing.
struct CostReport {
  struct Row {
    std::string id;
    LayerKind kind;
    std::int64_t params = 0;
    std::int64_t flops = 0;
    Shape output;
  };
  std::vector<Row> rows;
  std::int64_t total_params = 0;
  std::int64_t total_flops = 0;
};

/// Weights and biases of conv, fc and bn_affine layers (bias-free convs
/// count no bias). Uses the model's own input shape for the shape column.
CostReport count_params(const ModelGraph& model);

/// FLOPs at the given (C, H, W) input; n is ignored.
CostReport count_flops(const ModelGraph& model, Shape input);

/// Both columns filled.
CostReport cost_report(const ModelGraph& model, Shape input);

void write_cost_csv(const CostReport& report, std::ostream& os);
void write_cost_table(const CostReport& report, std::ostream& os);

}  // namespace thinner
