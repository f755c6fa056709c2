// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace thinner {

/// Extents of a rank-4 tensor in (N, C, H, W) order.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t count() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
  bool valid() const { return n >= 1 && c >= 1 && h >= 1 && w >= 1; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense float32 tensor, row-major within (N, C, H, W).
class Tensor {
 public:
  Tensor() : data_(1, 0.0f) {}
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::vector<float>& values() { return data_; }
  const std::vector<float>& values() const { return data_; }

  std::size_t index(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) *
               shape_.w +
           w;
  }
  float& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
  float at(int n, int c, int h, int w) const {
    return data_[index(n, c, h, w)];
  }

  float* sample(int n) { return data_.data() + n * shape_.sample_size(); }
  const float* sample(int n) const {
    return data_.data() + n * shape_.sample_size();
  }

  /// Same data under new extents; element count must match.
  Tensor reshaped(Shape shape) const;
  /// Copy of samples [first, first + count).
  Tensor slice_samples(int first, int count) const;

  void fill(float v);

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// Bit-level equality, including shape.
bool bit_equal(const Tensor& a, const Tensor& b);
bool bit_equal(std::span<const float> a, std::span<const float> b);

/// Gathers the listed samples (in order) into a new batch.
Tensor gather_samples(const Tensor& src, std::span<const int> indices);

}  // namespace thinner
