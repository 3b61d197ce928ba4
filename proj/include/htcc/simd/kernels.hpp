#pragma once
// Data-parallel inner loops shared by the float training path and the
// fixed-point inference path. Every kernel has a scalar reference version;
// ISA-specific variants are picked once at startup from the CPU feature bits.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace htcc::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot_f64)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy_f64)(double alpha, const double* x, double* y, std::size_t n);
  // sum_i a[i] * b[i], exact in 64-bit
  std::int64_t (*dot_i16)(const std::int16_t* a, const std::int16_t* b, std::size_t n);
  // y[i] += alpha * x[i], |alpha * x[i]| must fit in int32
  void (*axpy_i16)(std::int32_t alpha, const std::int16_t* x, std::int32_t* y, std::size_t n);
};

const KernelTable& scalar_kernels();
// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_kernels();

// Table used by the rest of the library.
const KernelTable& active();
Isa active_isa();
std::string_view isa_name(Isa isa);

// Overrides the runtime choice (tests and the --isa CLI flag). Returns false
// when the requested ISA is unavailable; the active table is then unchanged.
bool force_isa(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot_f64(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy_f64(alpha, x.data(), y.data(), x.size());
}

inline std::int64_t dot(std::span<const std::int16_t> a, std::span<const std::int16_t> b) {
  return active().dot_i16(a.data(), b.data(), a.size());
}

inline void axpy(std::int32_t alpha, std::span<const std::int16_t> x, std::span<std::int32_t> y) {
  active().axpy_i16(alpha, x.data(), y.data(), x.size());
}

}  // namespace htcc::simd
