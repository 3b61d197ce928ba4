#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace htcc::nn {

enum class Precision { f64, f32 };

// Dense row-major array. Training runs in f64; f32 marks values that have
// been rounded to single precision (e.g. after a checkpoint round trip).
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;
  Precision precision = Precision::f64;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), values(count(shape), 0.0) {}
  Tensor(std::vector<int> s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != count(shape)) throw std::invalid_argument("tensor value count does not match shape");
  }

  static std::size_t count(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d < 0) throw std::invalid_argument("negative tensor dimension");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }
  std::size_t size() const { return values.size(); }
  int dim(std::size_t i) const { return shape.at(i); }

  // Sub-tensor along the leading axis.
  std::span<const double> row(std::size_t i) const {
    const std::size_t stride = size() / static_cast<std::size_t>(shape.at(0));
    return std::span(values).subspan(i * stride, stride);
  }
  std::span<double> row(std::size_t i) {
    const std::size_t stride = size() / static_cast<std::size_t>(shape.at(0));
    return std::span(values).subspan(i * stride, stride);
  }

  void round_to_f32() {
    for (double& v : values) v = static_cast<double>(static_cast<float>(v));
    precision = Precision::f32;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

}  // namespace htcc::nn
