#include "htcc/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "htcc/common/error.hpp"
#include "htcc/simd/kernels.hpp"

namespace htcc::nn {

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::linear:
      return "linear";
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::leaky_relu:
      return "leaky_relu";
  }
  return "?";
}

Activation activation_from_name(std::string_view name) {
  for (auto a : {Activation::linear, Activation::relu, Activation::tanh, Activation::sigmoid, Activation::leaky_relu}) {
    if (activation_name(a) == name) return a;
  }
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

namespace {

constexpr double kLeakySlope = 0.01;

// Output range [lo, hi) whose input index t*stride + shift stays in [0, length).
std::pair<int, int> valid_range(int out_len, int length, int shift) {
  const int lo = std::max(0, -shift);
  const int hi = std::min(out_len, length - shift);
  return {lo, std::max(lo, hi)};
}

}  // namespace

void conv1d_forward(std::span<const double> in, int length, std::span<const double> w, std::span<const double> b,
                    const ConvGeometry& g, std::span<double> out) {
  const int lout = g.out_length(length);
  if (in.size() != static_cast<std::size_t>(g.cin) * length ||
      w.size() != static_cast<std::size_t>(g.cout) * g.cin * g.kernel || b.size() != static_cast<std::size_t>(g.cout) ||
      out.size() != static_cast<std::size_t>(g.cout) * std::max(lout, 0) || lout <= 0) {
    throw std::invalid_argument("conv1d_forward: shape mismatch");
  }
  const auto& k = simd::active();
  for (int co = 0; co < g.cout; ++co) {
    double* y = out.data() + static_cast<std::size_t>(co) * lout;
    std::fill(y, y + lout, b[co]);
    for (int ci = 0; ci < g.cin; ++ci) {
      const double* x = in.data() + static_cast<std::size_t>(ci) * length;
      const double* wk = w.data() + (static_cast<std::size_t>(co) * g.cin + ci) * g.kernel;
      for (int j = 0; j < g.kernel; ++j) {
        const int shift = j - g.pad;
        if (g.stride == 1) {
          const auto [lo, hi] = valid_range(lout, length, shift);
          if (hi > lo) k.axpy_f64(wk[j], x + lo + shift, y + lo, static_cast<std::size_t>(hi - lo));
        } else {
          for (int t = 0; t < lout; ++t) {
            const int src = t * g.stride + shift;
            if (src >= 0 && src < length) y[t] += wk[j] * x[src];
          }
        }
      }
    }
  }
}

void conv1d_backward(std::span<const double> in, int length, std::span<const double> w, const ConvGeometry& g,
                     std::span<const double> dout, std::span<double> dw, std::span<double> db,
                     std::span<double> din) {
  const int lout = g.out_length(length);
  if (dout.size() != static_cast<std::size_t>(g.cout) * lout || dw.size() != w.size() ||
      db.size() != static_cast<std::size_t>(g.cout) || (!din.empty() && din.size() != in.size())) {
    throw std::invalid_argument("conv1d_backward: shape mismatch");
  }
  const auto& k = simd::active();
  for (int co = 0; co < g.cout; ++co) {
    const double* dy = dout.data() + static_cast<std::size_t>(co) * lout;
    double s = 0.0;
    for (int t = 0; t < lout; ++t) s += dy[t];
    db[co] += s;
    for (int ci = 0; ci < g.cin; ++ci) {
      const double* x = in.data() + static_cast<std::size_t>(ci) * length;
      double* dx = din.empty() ? nullptr : din.data() + static_cast<std::size_t>(ci) * length;
      const std::size_t wi = (static_cast<std::size_t>(co) * g.cin + ci) * g.kernel;
      for (int j = 0; j < g.kernel; ++j) {
        const int shift = j - g.pad;
        if (g.stride == 1) {
          const auto [lo, hi] = valid_range(lout, length, shift);
          if (hi <= lo) continue;
          const auto n = static_cast<std::size_t>(hi - lo);
          dw[wi + j] += k.dot_f64(dy + lo, x + lo + shift, n);
          if (dx) k.axpy_f64(w[wi + j], dy + lo, dx + lo + shift, n);
        } else {
          double acc = 0.0;
          for (int t = 0; t < lout; ++t) {
            const int src = t * g.stride + shift;
            if (src < 0 || src >= length) continue;
            acc += dy[t] * x[src];
            if (dx) dx[src] += w[wi + j] * dy[t];
          }
          dw[wi + j] += acc;
        }
      }
    }
  }
}

void activation_forward(Activation a, std::span<const double> in, std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double x = in[i];
    switch (a) {
      case Activation::linear:
        out[i] = x;
        break;
      case Activation::relu:
        out[i] = x > 0.0 ? x : 0.0;
        break;
      case Activation::tanh:
        out[i] = std::tanh(x);
        break;
      case Activation::sigmoid:
        out[i] = 1.0 / (1.0 + std::exp(-x));
        break;
      case Activation::leaky_relu:
        out[i] = x > 0.0 ? x : kLeakySlope * x;
        break;
    }
  }
}

void activation_backward(Activation a, std::span<const double> y, std::span<const double> dout,
                         std::span<double> din) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    double d = 1.0;
    switch (a) {
      case Activation::linear:
        break;
      case Activation::relu:
        d = y[i] > 0.0 ? 1.0 : 0.0;
        break;
      case Activation::tanh:
        d = 1.0 - y[i] * y[i];
        break;
      case Activation::sigmoid:
        d = y[i] * (1.0 - y[i]);
        break;
      case Activation::leaky_relu:
        d = y[i] > 0.0 ? 1.0 : kLeakySlope;
        break;
    }
    din[i] = d * dout[i];
  }
}

// ---- LLDS stage 1 ----

std::array<double, 5> LldsInput::merged_kernel(std::span<const double> p, int c) {
  std::array<double, 5> k{};
  for (int j = 0; j < 5; ++j) k[j] = p[6 + c * 5 + j];
  for (int j = 0; j < 3; ++j) k[j + 1] += p[c * 3 + j];
  return k;
}

std::uint64_t LldsInput::macs(Shape in) const { return static_cast<std::uint64_t>(in.length) * 2 * (3 + 5); }

void LldsInput::init(std::span<double> p, Rng& rng) const {
  const double b3 = 1.0 / std::sqrt(3.0), b5 = 1.0 / std::sqrt(5.0);
  for (int i = 0; i < 6; ++i) p[i] = rng.uniform(-b3, b3);
  for (int i = 6; i < 16; ++i) p[i] = rng.uniform(-b5, b5);
  for (int i = 16; i < 20; ++i) p[i] = 0.0;
}

void LldsInput::forward(std::span<const double> p, Shape s, std::span<const double> in, std::span<double> out) const {
  if (s.channels != 2) throw std::invalid_argument("llds_input expects 2 rows");
  const auto L = static_cast<std::size_t>(s.length);
  for (int c = 0; c < 2; ++c) {
    const ConvGeometry g3{1, 1, 3, 1, 1}, g5{1, 1, 5, 1, 2};
    const auto x = in.subspan(c * L, L);
    auto y = out.subspan(c * L, L);
    std::vector<double> tmp(L);
    conv1d_forward(x, s.length, p.subspan(c * 3, 3), p.subspan(16 + c, 1), g3, y);
    conv1d_forward(x, s.length, p.subspan(6 + c * 5, 5), p.subspan(18 + c, 1), g5, tmp);
    for (std::size_t t = 0; t < L; ++t) y[t] += tmp[t];
  }
}

void LldsInput::backward(std::span<const double> p, Shape s, std::span<const double> in, std::span<const double>,
                         std::span<const double> dout, std::span<double> dp, std::span<double> din) const {
  const auto L = static_cast<std::size_t>(s.length);
  std::fill(din.begin(), din.end(), 0.0);
  for (int c = 0; c < 2; ++c) {
    const ConvGeometry g3{1, 1, 3, 1, 1}, g5{1, 1, 5, 1, 2};
    const auto x = in.subspan(c * L, L);
    const auto dy = dout.subspan(c * L, L);
    auto dx = din.subspan(c * L, L);
    conv1d_backward(x, s.length, p.subspan(c * 3, 3), g3, dy, dp.subspan(c * 3, 3), dp.subspan(16 + c, 1), dx);
    conv1d_backward(x, s.length, p.subspan(6 + c * 5, 5), g5, dy, dp.subspan(6 + c * 5, 5), dp.subspan(18 + c, 1),
                    dx);
  }
}

// ---- Conv1d ----

std::uint64_t Conv1d::macs(Shape in) const {
  return static_cast<std::uint64_t>(g_.out_length(in.length)) * g_.cout * g_.cin * g_.kernel;
}

void Conv1d::init(std::span<double> p, Rng& rng) const {
  const double fan_in = static_cast<double>(g_.cin * g_.kernel);
  const std::size_t nw = static_cast<std::size_t>(g_.cout) * g_.cin * g_.kernel;
  for (std::size_t i = 0; i < nw; ++i) {
    p[i] = init_ == Init::he_normal ? rng.normal() * std::sqrt(2.0 / fan_in)
                                    : rng.uniform(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
  }
  for (std::size_t i = nw; i < p.size(); ++i) p[i] = 0.0;
}

void Conv1d::forward(std::span<const double> p, Shape s, std::span<const double> in, std::span<double> out) const {
  if (s.channels != g_.cin) throw std::invalid_argument(label_ + ": input channel mismatch");
  const std::size_t nw = static_cast<std::size_t>(g_.cout) * g_.cin * g_.kernel;
  conv1d_forward(in, s.length, p.subspan(0, nw), p.subspan(nw), g_, out);
}

void Conv1d::backward(std::span<const double> p, Shape s, std::span<const double> in, std::span<const double>,
                      std::span<const double> dout, std::span<double> dp, std::span<double> din) const {
  const std::size_t nw = static_cast<std::size_t>(g_.cout) * g_.cin * g_.kernel;
  std::fill(din.begin(), din.end(), 0.0);
  conv1d_backward(in, s.length, p.subspan(0, nw), g_, dout, dp.subspan(0, nw), dp.subspan(nw), din);
}

// ---- MaxPool1d ----

void MaxPool1d::forward(std::span<const double>, Shape s, std::span<const double> in, std::span<double> out) const {
  const int lout = s.length / width_;
  for (int c = 0; c < s.channels; ++c) {
    const double* x = in.data() + static_cast<std::size_t>(c) * s.length;
    double* y = out.data() + static_cast<std::size_t>(c) * lout;
    for (int t = 0; t < lout; ++t) y[t] = *std::max_element(x + t * width_, x + (t + 1) * width_);
  }
}

void MaxPool1d::backward(std::span<const double>, Shape s, std::span<const double> in, std::span<const double>,
                         std::span<const double> dout, std::span<double>, std::span<double> din) const {
  const int lout = s.length / width_;
  std::fill(din.begin(), din.end(), 0.0);
  for (int c = 0; c < s.channels; ++c) {
    const double* x = in.data() + static_cast<std::size_t>(c) * s.length;
    double* dx = din.data() + static_cast<std::size_t>(c) * s.length;
    const double* dy = dout.data() + static_cast<std::size_t>(c) * lout;
    for (int t = 0; t < lout; ++t) {
      const auto at = std::max_element(x + t * width_, x + (t + 1) * width_) - x;
      dx[at] += dy[t];
    }
  }
}

// ---- Dense ----

void Dense::init(std::span<double> p, Rng& rng) const {
  const std::size_t nw = static_cast<std::size_t>(out_) * in_;
  for (std::size_t i = 0; i < nw; ++i) {
    p[i] = init_ == Init::he_normal ? rng.normal() * std::sqrt(2.0 / in_)
                                    : rng.uniform(-1.0 / std::sqrt(in_), 1.0 / std::sqrt(in_));
  }
  for (std::size_t i = nw; i < p.size(); ++i) p[i] = 0.0;
}

void Dense::forward(std::span<const double> p, Shape s, std::span<const double> in, std::span<double> out) const {
  if (s.size() != static_cast<std::size_t>(in_)) throw std::invalid_argument(label_ + ": input size mismatch");
  const auto& k = simd::active();
  const double* b = p.data() + static_cast<std::size_t>(out_) * in_;
  for (int o = 0; o < out_; ++o) {
    out[o] = b[o] + k.dot_f64(p.data() + static_cast<std::size_t>(o) * in_, in.data(), static_cast<std::size_t>(in_));
  }
}

void Dense::backward(std::span<const double> p, Shape, std::span<const double> in, std::span<const double>,
                     std::span<const double> dout, std::span<double> dp, std::span<double> din) const {
  const auto& k = simd::active();
  std::fill(din.begin(), din.end(), 0.0);
  double* db = dp.data() + static_cast<std::size_t>(out_) * in_;
  for (int o = 0; o < out_; ++o) {
    const double g = dout[o];
    db[o] += g;
    if (g == 0.0) continue;
    k.axpy_f64(g, in.data(), dp.data() + static_cast<std::size_t>(o) * in_, static_cast<std::size_t>(in_));
    k.axpy_f64(g, p.data() + static_cast<std::size_t>(o) * in_, din.data(), static_cast<std::size_t>(in_));
  }
}

}  // namespace htcc::nn
