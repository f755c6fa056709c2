// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

// The 4-class synthetic fixture and its 3-conv network.

#pragma once

#include "thinner/builders.hpp"
#include "thinner/finetune.hpp"
#include "thinner/model_io.hpp"

namespace thinner::fixture {

inline constexpr Shape kImage{1, 3, 16, 16};
inline constexpr int kClasses = 4;
inline constexpr int kPerClass = 50;
inline constexpr int kEpochs = 30;

inline Dataset data(std::uint64_t seed = 2026) { return generate_synthetic(kClasses, kPerClass, kImage, seed); }

inline ModelGraph net(std::uint64_t seed = 1) {
  return build_plain_cnn(kImage, {16, 16, 16}, kClasses, {seed});
}

inline TrainResult trained(const Dataset& d, std::uint64_t seed = 1) {
  return train(net(seed), d, TrainConfig::desk_default(kEpochs, seed));
}

}  // namespace thinner::fixture
