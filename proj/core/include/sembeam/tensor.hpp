#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "sembeam/util.hpp"

namespace sembeam::nn {

/// Dense row-major tensor of doubles, up to 4 dimensions. All training and
/// inference arithmetic is 64-bit.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::initializer_list<int> s) : shape(s) { v.assign(numel_of(shape), 0.0); }
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) { v.assign(numel_of(shape), 0.0); }

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d < 0) throw ConfigError("negative tensor dimension");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::size_t numel() const { return v.size(); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }

  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }

  /// Reinterprets the data with a new shape of identical element count.
  Tensor reshaped(std::vector<int> s) const {
    if (numel_of(s) != numel()) throw ConfigError("reshape changes element count");
    Tensor t;
    t.shape = std::move(s);
    t.v = v;
    return t;
  }

  void fill(double x) { std::fill(v.begin(), v.end(), x); }
  bool operator==(const Tensor&) const = default;
};

}  // namespace sembeam::nn
