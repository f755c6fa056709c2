// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace thinner {

using Rng = std::mt19937_64;

/// Derives an independent seed for a named sub-stream ("sampling",
/// "selection", "init", "shuffle", ...) from a master seed.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view stream);

inline Rng make_rng(std::uint64_t seed, std::string_view stream) {
  return Rng(substream_seed(seed, stream));
}

/// `count` distinct values from [0, population), in draw order.
std::vector<int> sample_without_replacement(Rng& rng, int population,
                                            int count);

}  // namespace thinner
