// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include "lookaround/error.hpp"

namespace lookaround::ad {

template <typename S>
struct Tensor {
  std::vector<int> shape;
  std::vector<S> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> extents)
      : shape(std::move(extents)), data(element_count(shape), S(0)) {}
  Tensor(std::vector<int> extents, std::vector<S> values)
      : shape(std::move(extents)), data(std::move(values)) {
    require(data.size() == element_count(shape), ErrorCode::kShapeMismatch,
            "tensor: value count does not match shape");
  }

  static size_t element_count(const std::vector<int>& extents) {
    return std::accumulate(extents.begin(), extents.end(), size_t{1},
                           std::multiplies<>());
  }
  size_t size() const { return data.size(); }
  int rows() const { return shape.empty() ? 1 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  template <typename T>
  Tensor<T> cast() const {
    return Tensor<T>(shape, std::vector<T>(data.begin(), data.end()));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

using TensorValue = Tensor<float>;

}  // namespace lookaround::ad
