// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

// On-disk formats.
//
// Model: a UTF-8 JSON manifest plus one little-endian float32 blob file.
// The manifest lists layer specs and, per blob, its shape, byte offset,
// byte length and FNV-1a 64 checksum of the stored bytes.
//
// Dataset: "THDS", u32 version (1), u32 N, C, H, W, then N*C*H*W float32
// values and N u32 labels, all little-endian.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"
#include "thinner/model.hpp"

namespace thinner {

struct Dataset {
  Tensor images;
  std::vector<int> labels;

  int size() const { return images.shape().n; }
  /// Throws ConfigError on label/count mismatches or labels >= classes.
  void validate(std::optional<int> classes = std::nullopt) const;
  Dataset subset(std::span<const int> indices) const;
};

/// Writes `<path>` (manifest) and `<path stem>.bin` next to it.
void save_model(const ModelGraph& model, const std::filesystem::path& path);
ModelGraph load_model(const std::filesystem::path& path);

nlohmann::json layer_to_json(const LayerSpec& spec);
LayerSpec layer_from_json(const nlohmann::json& j);

void save_dataset(const Dataset& data, const std::filesystem::path& path);
/// Validates labels against `classes` when given.
Dataset load_dataset(const std::filesystem::path& path,
                     std::optional<int> classes = std::nullopt);

/// Class-conditional Gaussian data: each class owns a random smooth
/// prototype over channel patterns; images are prototype + isotropic noise.
/// Deterministic in `seed`. Samples are ordered class-major.
Dataset generate_synthetic(int classes, int per_class, Shape chw,
                           std::uint64_t seed, double noise = 0.5);

std::uint64_t fnv1a64(std::span<const std::byte> bytes);

}  // namespace thinner
