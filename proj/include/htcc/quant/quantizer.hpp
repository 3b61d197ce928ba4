#pragma once
// Post-training quantization: int8 per-tensor weights, 12-bit activations,
// and an integer-only reference forward pass.
//
// Scales are rationals num / 2^40. After calibration every rescale is an
// integer multiply by m followed by a right shift, so inference uses no
// floating point at all.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "htcc/nn/model.hpp"

namespace htcc::quant {

inline constexpr std::int32_t kActMin = -2048;
inline constexpr std::int32_t kActMax = 2047;
inline constexpr std::int32_t kWeightMax = 127;
inline constexpr int kScaleShift = 40;

struct Rational {
  std::int64_t num = std::int64_t{1} << kScaleShift;
  std::int64_t den = std::int64_t{1} << kScaleShift;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  static Rational from_double(double v);
  friend bool operator==(const Rational&, const Rational&) = default;
};

enum class RequantMode { truncate, round_nearest };

// x -> x * m / 2^shift, rounded per mode and saturated to [-2048, 2047].
struct Requant {
  std::int64_t multiplier = 1;
  int shift = 0;
  static Requant from_ratio(const Rational& in_scale, const Rational& w_scale, const Rational& out_scale);
  std::int32_t apply(std::int64_t acc, RequantMode mode, bool* saturated = nullptr) const;
  friend bool operator==(const Requant&, const Requant&) = default;
};

struct QuantizedWeights {
  std::vector<std::int8_t> q;
  Rational scale;
};

// Symmetric per-tensor: s = max|W| / 127 (1 for an all-zero tensor),
// q = round(W / s) clamped to [-127, 127].
QuantizedWeights quantize_tensor(std::span<const double> w);

enum class QKind { llds_input, conv1d, maxpool, dense };

struct QLayer {
  QKind kind = QKind::conv1d;
  std::string name;
  nn::ConvGeometry geom;  // conv1d
  int pool = 2;           // maxpool
  int dense_in = 0, dense_out = 0;
  nn::Activation act = nn::Activation::linear;  // fused after the accumulator
  bool is_output = false;                       // logits stay as int32 accumulators
  nn::Shape in_shape, out_shape;
  int float_output = 0;  // index into the float workspace activations this layer mirrors

  std::vector<std::int8_t> weights;
  std::vector<std::int16_t> weights16;  // widened copy for the integer kernels
  Rational weight_scale;
  std::vector<double> float_bias;       // kept until calibration fixes the int32 bias
  std::vector<std::int32_t> bias;
  Rational out_scale;
  Requant requant;
};

struct QuantizedModel {
  nn::DetectorConfig config;
  std::vector<QLayer> layers;
  Rational input_scale;
  RequantMode mode = RequantMode::truncate;
  bool calibrated = false;
  std::uint64_t calibration_frames = 0;

  int num_classes() const { return config.num_classes; }
};

// Throws ConfigError for LLDS activations other than linear and ReLU.
QuantizedModel quantize_weights(const nn::Model& model, RequantMode mode = RequantMode::truncate);

// Per-point scale = max |activation| / 2047 over the calibration frames
// (1 when that maximum is 0). Fixes biases and requantizers. Frames are in
// channels-first layout, 1280 values each. Throws ConfigError when empty.
void calibrate_activations(QuantizedModel& qm, const nn::Model& model, std::span<const std::vector<double>> frames);
void calibrate_activations(QuantizedModel& qm, const nn::Model& model, const std::vector<std::span<const double>>& frames);

// ADC step: round-nearest to the input grid, saturated to 12 bits.
std::vector<std::int16_t> quantize_input(const QuantizedModel& qm, std::span<const double> frame);

struct QuantTrace {
  std::vector<std::vector<std::int16_t>> activations;  // output of each non-final layer
  std::uint64_t saturated = 0;
  std::uint64_t values = 0;
};

// Integer logits (output-layer accumulators).
std::vector<std::int32_t> quantized_forward(const QuantizedModel& qm, std::span<const double> frame,
                                            QuantTrace* trace = nullptr);
std::vector<std::int32_t> quantized_forward_int(const QuantizedModel& qm, std::span<const std::int16_t> input,
                                                QuantTrace* trace = nullptr);

// Layer primitives shared with the accelerator simulator. `acc` receives the
// raw accumulators (bias included) before activation and requantization.
void qconv_accumulate(const QLayer& l, std::span<const std::int16_t> in, int length, std::span<std::int64_t> acc);
void qllds_accumulate(const QLayer& l, std::span<const std::int16_t> in, int length, std::span<std::int64_t> acc);
void qdense_accumulate(const QLayer& l, std::span<const std::int16_t> in, std::span<std::int64_t> acc);
std::int32_t finish_activation(const QLayer& l, std::int64_t acc, RequantMode mode, bool* saturated);

// "HTCQ" + version, u32 manifest length + JSON manifest, input scale, then
// per parameterised layer: weight scale, int8 weights, int32 biases, output
// scale; CRC-32 trailer. Requantizers are recomputed on load.
std::vector<std::uint8_t> serialize_quantized(const QuantizedModel& qm, const std::string& extra_json);
QuantizedModel deserialize_quantized(std::span<const std::uint8_t> bytes, std::string* manifest = nullptr);
void save_quantized(const QuantizedModel& qm, const std::string& extra_json, const std::string& path);
QuantizedModel load_quantized(const std::string& path, std::string* manifest = nullptr);

}  // namespace htcc::quant
