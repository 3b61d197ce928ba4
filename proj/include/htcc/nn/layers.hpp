#pragma once
// Layer descriptors for a 1-D CNN over (channels, length) activations.
// Layers are stateless; parameters live in the owning model's flat vector
// and are passed in as spans, so gradients and optimizer state share the
// same layout.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "htcc/common/rng.hpp"

namespace htcc::nn {

struct Shape {
  int channels = 0;
  int length = 0;
  std::size_t size() const { return static_cast<std::size_t>(channels) * static_cast<std::size_t>(length); }
  friend bool operator==(const Shape&, const Shape&) = default;
};

enum class Activation { linear, relu, tanh, sigmoid, leaky_relu };

std::string_view activation_name(Activation a);
Activation activation_from_name(std::string_view name);

enum class LayerKind { llds_input, conv1d, activation, maxpool, dense };

// Cross-correlation over the length axis.
//   in: cin x L, w: cout x cin x k, b: cout, out: cout x Lout with
//   Lout = (L + 2 pad - k) / stride + 1.
struct ConvGeometry {
  int cin = 1, cout = 1, kernel = 1, stride = 1, pad = 0;
  int out_length(int length) const { return (length + 2 * pad - kernel) / stride + 1; }
};

void conv1d_forward(std::span<const double> in, int length, std::span<const double> w, std::span<const double> b,
                    const ConvGeometry& g, std::span<double> out);
// Accumulates into dw, db and din (din may be empty to skip it).
void conv1d_backward(std::span<const double> in, int length, std::span<const double> w, const ConvGeometry& g,
                     std::span<const double> dout, std::span<double> dw, std::span<double> db,
                     std::span<double> din);

void activation_forward(Activation a, std::span<const double> in, std::span<double> out);
// Uses the layer output y, which determines the derivative for every
// supported activation.
void activation_backward(Activation a, std::span<const double> y, std::span<const double> dout,
                         std::span<double> din);

class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerKind kind() const = 0;
  virtual std::string name() const = 0;
  virtual Shape output_shape(Shape in) const = 0;
  virtual std::size_t param_count() const { return 0; }
  // Multiply-accumulates per sample for input shape `in`.
  virtual std::uint64_t macs(Shape) const { return 0; }
  virtual void init(std::span<double>, Rng&) const {}
  virtual void forward(std::span<const double> params, Shape in_shape, std::span<const double> in,
                       std::span<double> out) const = 0;
  // Accumulates the parameter gradient into dparams and overwrites din.
  virtual void backward(std::span<const double> params, Shape in_shape, std::span<const double> in,
                        std::span<const double> out, std::span<const double> dout, std::span<double> dparams,
                        std::span<double> din) const = 0;
};

// LLDS stage 1: for each of the two input rows, a 1x3 and a 1x5 filter with
// stride 1 and symmetric zero padding whose outputs are summed.
// Parameter layout: w3[2][3], w5[2][5], b3[2], b5[2].
class LldsInput final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::llds_input; }
  std::string name() const override { return "llds_input"; }
  Shape output_shape(Shape in) const override { return in; }
  std::size_t param_count() const override { return 20; }
  std::uint64_t macs(Shape in) const override;
  void init(std::span<double> p, Rng& rng) const override;
  void forward(std::span<const double> p, Shape s, std::span<const double> in, std::span<double> out) const override;
  void backward(std::span<const double> p, Shape s, std::span<const double> in, std::span<const double> out,
                std::span<const double> dout, std::span<double> dp, std::span<double> din) const override;

  // Kernel for row c as one 5-tap filter (the 1x3 taps centred in it).
  static std::array<double, 5> merged_kernel(std::span<const double> p, int c);
};

enum class Init { he_normal, uniform_fan_in };

class Conv1d final : public Layer {
 public:
  Conv1d(ConvGeometry g, Init init, std::string label) : g_(g), init_(init), label_(std::move(label)) {}
  LayerKind kind() const override { return LayerKind::conv1d; }
  std::string name() const override { return label_; }
  Shape output_shape(Shape in) const override { return {g_.cout, g_.out_length(in.length)}; }
  std::size_t param_count() const override {
    return static_cast<std::size_t>(g_.cout) * static_cast<std::size_t>(g_.cin * g_.kernel + 1);
  }
  std::uint64_t macs(Shape in) const override;
  void init(std::span<double> p, Rng& rng) const override;
  void forward(std::span<const double> p, Shape s, std::span<const double> in, std::span<double> out) const override;
  void backward(std::span<const double> p, Shape s, std::span<const double> in, std::span<const double> out,
                std::span<const double> dout, std::span<double> dp, std::span<double> din) const override;
  const ConvGeometry& geometry() const { return g_; }

 private:
  ConvGeometry g_;
  Init init_;
  std::string label_;
};

class ActivationLayer final : public Layer {
 public:
  explicit ActivationLayer(Activation a) : a_(a) {}
  LayerKind kind() const override { return LayerKind::activation; }
  std::string name() const override { return std::string(activation_name(a_)); }
  Shape output_shape(Shape in) const override { return in; }
  void forward(std::span<const double>, Shape, std::span<const double> in, std::span<double> out) const override {
    activation_forward(a_, in, out);
  }
  void backward(std::span<const double>, Shape, std::span<const double>, std::span<const double> out,
                std::span<const double> dout, std::span<double>, std::span<double> din) const override {
    activation_backward(a_, out, dout, din);
  }
  Activation activation() const { return a_; }

 private:
  Activation a_;
};

// Non-overlapping max over windows of `width` along the length axis; a
// trailing partial window is dropped. Ties route the gradient to the first.
class MaxPool1d final : public Layer {
 public:
  explicit MaxPool1d(int width) : width_(width) {}
  LayerKind kind() const override { return LayerKind::maxpool; }
  std::string name() const override { return "maxpool"; }
  Shape output_shape(Shape in) const override { return {in.channels, in.length / width_}; }
  void forward(std::span<const double>, Shape s, std::span<const double> in, std::span<double> out) const override;
  void backward(std::span<const double>, Shape s, std::span<const double> in, std::span<const double> out,
                std::span<const double> dout, std::span<double>, std::span<double> din) const override;
  int width() const { return width_; }

 private:
  int width_;
};

// Fully connected over the flattened input. Parameter layout: W[out][in], b[out].
class Dense final : public Layer {
 public:
  Dense(int inputs, int outputs, Init init, std::string label)
      : in_(inputs), out_(outputs), init_(init), label_(std::move(label)) {}
  LayerKind kind() const override { return LayerKind::dense; }
  std::string name() const override { return label_; }
  Shape output_shape(Shape) const override { return {out_, 1}; }
  std::size_t param_count() const override {
    return static_cast<std::size_t>(out_) * static_cast<std::size_t>(in_ + 1);
  }
  std::uint64_t macs(Shape) const override { return static_cast<std::uint64_t>(in_) * static_cast<std::uint64_t>(out_); }
  void init(std::span<double> p, Rng& rng) const override;
  void forward(std::span<const double> p, Shape s, std::span<const double> in, std::span<double> out) const override;
  void backward(std::span<const double> p, Shape s, std::span<const double> in, std::span<const double> out,
                std::span<const double> dout, std::span<double> dp, std::span<double> din) const override;
  int inputs() const { return in_; }
  int outputs() const { return out_; }

 private:
  int in_, out_;
  Init init_;
  std::string label_;
};

}  // namespace htcc::nn
