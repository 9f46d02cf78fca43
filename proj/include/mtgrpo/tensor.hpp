// Copyright 2026 The mtgrpo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mtgrpo {

/// A named dense tensor in row-major order.
struct Layer {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Layer() = default;
  Layer(std::string name, std::vector<std::size_t> shape);
  Layer(std::string name, std::vector<std::size_t> shape, std::vector<double> data);

  std::size_t rank() const { return shape.size(); }
  std::size_t numel() const { return data.size(); }
  /// Size of the trailing axis (the one gradient compression keeps).
  std::size_t last_dim() const { return shape.empty() ? 0 : shape.back(); }

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Ordered collection of named tensors. Used for both parameters and
/// gradients, which share layer structure.
struct TensorSet {
  std::vector<Layer> layers;

  std::size_t numel() const;
  const Layer& at(const std::string& name) const;
  Layer& at(const std::string& name);

  bool same_structure(const TensorSet& other) const;
  bool all_finite() const;

  TensorSet zeros_like() const;
  /// this += scale * other. Structures must match.
  void axpy(double scale, const TensorSet& other);
  void scale(double factor);
  double dot(const TensorSet& other) const;
  double norm() const;

  /// Flattened copy in layer order.
  std::vector<double> flatten() const;
  friend bool operator==(const TensorSet&, const TensorSet&) = default;
};

std::size_t shape_numel(std::span<const std::size_t> shape);

}  // namespace mtgrpo
