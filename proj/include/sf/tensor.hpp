// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace sf {

inline std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

// Dense row-major tensor. No implicit broadcasting anywhere; shape
// agreement is the caller's contract and is checked by the ops.
template <typename T>
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> s, T fill = T(0))
      : shape(std::move(s)), data(static_cast<std::size_t>(shape_numel(shape)), fill) {}
  Tensor(std::vector<std::int64_t> s, std::vector<T> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<std::int64_t>(data.size()) != shape_numel(shape))
      throw std::invalid_argument("tensor data length does not match shape");
  }

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape); }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  std::int64_t dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  T& at2(std::int64_t i, std::int64_t j) { return data[static_cast<std::size_t>(i * shape[1] + j)]; }
  T at2(std::int64_t i, std::int64_t j) const { return data[static_cast<std::size_t>(i * shape[1] + j)]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

// Split-storage complex tensor (structure of arrays suits the kernels).
template <typename T>
struct ComplexTensor {
  std::vector<std::int64_t> shape;
  std::vector<T> re, im;

  ComplexTensor() = default;
  explicit ComplexTensor(std::vector<std::int64_t> s)
      : shape(std::move(s)),
        re(static_cast<std::size_t>(shape_numel(shape)), T(0)),
        im(static_cast<std::size_t>(shape_numel(shape)), T(0)) {}

  std::int64_t numel() const { return static_cast<std::int64_t>(re.size()); }
};

inline std::string shape_str(const std::vector<std::int64_t>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

}  // namespace sf
