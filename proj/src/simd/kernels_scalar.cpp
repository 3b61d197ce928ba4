#include "htcc/simd/kernels.hpp"

namespace htcc::simd {
namespace {

double dot_f64_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_f64_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

std::int64_t dot_i16_scalar(const std::int16_t* a, const std::int16_t* b, std::size_t n) {
  std::int64_t acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += std::int64_t{a[i]} * std::int64_t{b[i]};
  return acc;
}

void axpy_i16_scalar(std::int32_t alpha, const std::int16_t* x, std::int32_t* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * std::int32_t{x[i]};
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::scalar, dot_f64_scalar, axpy_f64_scalar, dot_i16_scalar,
                                 axpy_i16_scalar};
  return table;
}

}  // namespace htcc::simd
