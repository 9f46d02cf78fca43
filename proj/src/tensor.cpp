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

#include "mtgrpo/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace mtgrpo {

std::size_t shape_numel(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Layer::Layer(std::string n, std::vector<std::size_t> s)
    : name(std::move(n)), shape(std::move(s)), data(shape_numel(shape), 0.0) {}

Layer::Layer(std::string n, std::vector<std::size_t> s, std::vector<double> d)
    : name(std::move(n)), shape(std::move(s)), data(std::move(d)) {
  if (data.size() != shape_numel(shape)) {
    throw std::invalid_argument("Layer '" + name + "': data size does not match shape");
  }
}

std::size_t TensorSet::numel() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.numel();
  return n;
}

const Layer& TensorSet::at(const std::string& name) const {
  for (const auto& l : layers)
    if (l.name == name) return l;
  throw std::invalid_argument("no layer named '" + name + "'");
}

Layer& TensorSet::at(const std::string& name) {
  return const_cast<Layer&>(std::as_const(*this).at(name));
}

bool TensorSet::same_structure(const TensorSet& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].name != other.layers[i].name || layers[i].shape != other.layers[i].shape) return false;
  }
  return true;
}

bool TensorSet::all_finite() const {
  for (const auto& l : layers)
    for (double x : l.data)
      if (!std::isfinite(x)) return false;
  return true;
}

TensorSet TensorSet::zeros_like() const {
  TensorSet out;
  out.layers.reserve(layers.size());
  for (const auto& l : layers) out.layers.emplace_back(l.name, l.shape);
  return out;
}

void TensorSet::axpy(double s, const TensorSet& other) {
  if (!same_structure(other)) throw std::invalid_argument("TensorSet::axpy: structure mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& dst = layers[i].data;
    const auto& src = other.layers[i].data;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += s * src[j];
  }
}

void TensorSet::scale(double factor) {
  for (auto& l : layers)
    for (double& x : l.data) x *= factor;
}

double TensorSet::dot(const TensorSet& other) const {
  if (!same_structure(other)) throw std::invalid_argument("TensorSet::dot: structure mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i].data;
    const auto& b = other.layers[i].data;
    for (std::size_t j = 0; j < a.size(); ++j) acc += a[j] * b[j];
  }
  return acc;
}

double TensorSet::norm() const { return std::sqrt(dot(*this)); }

std::vector<double> TensorSet::flatten() const {
  std::vector<double> out;
  out.reserve(numel());
  for (const auto& l : layers) out.insert(out.end(), l.data.begin(), l.data.end());
  return out;
}

}  // namespace mtgrpo
