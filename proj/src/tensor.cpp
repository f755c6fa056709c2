// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "thinner/tensor.hpp"

#include <algorithm>
#include <cstring>

#include "thinner/error.hpp"

namespace thinner {

std::string Shape::str() const {
  return std::to_string(n) + "x" + std::to_string(c) + "x" +
         std::to_string(h) + "x" + std::to_string(w);
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape) {
  if (!shape.valid()) throw ShapeError("invalid tensor shape " + shape.str());
  data_.assign(shape.count(), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(shape), data_(std::move(data)) {
  if (!shape.valid()) throw ShapeError("invalid tensor shape " + shape.str());
  if (data_.size() != shape.count()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape.str());
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.count() != shape_.count()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  return Tensor(shape, data_);
}

Tensor Tensor::slice_samples(int first, int count) const {
  if (first < 0 || count < 1 || first + count > shape_.n) {
    throw ShapeError("sample slice out of range for " + shape_.str());
  }
  Shape s = shape_;
  s.n = count;
  const auto stride = shape_.sample_size();
  std::vector<float> out(data_.begin() + first * stride,
                         data_.begin() + (first + count) * stride);
  return Tensor(s, std::move(out));
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

bool bit_equal(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size_bytes()) == 0);
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && bit_equal(a.data(), b.data());
}

Tensor gather_samples(const Tensor& src, std::span<const int> indices) {
  Shape s = src.shape();
  s.n = static_cast<int>(indices.size());
  Tensor out(s);
  const auto stride = s.sample_size();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int k = indices[i];
    if (k < 0 || k >= src.shape().n) throw ShapeError("sample index out of range");
    std::copy_n(src.sample(k), stride, out.sample(static_cast<int>(i)));
  }
  return out;
}

}  // namespace thinner
