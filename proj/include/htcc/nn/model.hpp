#pragma once
// LLDS front end + compact CNN detector.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "htcc/nn/layers.hpp"
#include "htcc/nn/tensor.hpp"

namespace htcc::nn {

inline constexpr int kFrameSamples = 640;
// Parameter count of the uncompressed reference CNN the compact model is
// measured against.
inline constexpr std::size_t kBaselineParams = 184265;

struct DetectorConfig {
  int cf = 5;  // 1 builds the uncompressed reference (stride-1 LLDS)
  int num_classes = 5;
  int conv1_filters = 45;
  int conv1_kernel = 3;
  int pool = 2;
  int conv2_filters = 9;
  int conv2_kernel = 7;
  int hidden = 59;
  Activation llds_activation = Activation::linear;

  void validate() const;
  std::string to_json() const;
  static DetectorConfig from_json(const std::string& text);
  friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

// LLDS output length: floor((640 - 5) / cf) + 1.
int llds_output_length(int cf);

struct Workspace;

class Model {
 public:
  Model() = default;
  explicit Model(DetectorConfig cfg);

  const DetectorConfig& config() const { return cfg_; }
  std::size_t num_layers() const { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }
  Shape input_shape() const { return shapes_.front(); }
  // Input shape of layer i; shape(num_layers()) is the logits shape.
  Shape shape(std::size_t i) const { return shapes_[i]; }
  std::span<const double> layer_params(std::size_t i) const {
    return std::span(params_).subspan(offsets_[i], layers_[i]->param_count());
  }
  std::span<double> layer_params(std::size_t i) {
    return std::span(params_).subspan(offsets_[i], layers_[i]->param_count());
  }
  std::size_t layer_offset(std::size_t i) const { return offsets_[i]; }
  // Number of leading layers that make up the LLDS block.
  std::size_t llds_layers() const { return llds_layers_; }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }
  std::size_t llds_param_count() const;
  std::uint64_t macs() const;
  std::uint64_t llds_macs() const;
  int num_classes() const { return cfg_.num_classes; }

  void init(std::uint64_t seed);

  // Single frame in channels-first layout (row I, row Q; 1280 values).
  void forward(std::span<const double> frame, Workspace& ws) const;
  // Softmax cross-entropy of the last forward() against `label`. Adds
  // scale * dLoss/dparams into `grad` and returns the loss.
  double backward(Workspace& ws, int label, std::span<double> grad, double scale) const;

  // Batch of shape (N, 2, 640) -> logits (N, classes).
  Tensor forward(const Tensor& batch) const;

  std::string describe() const;  // JSON architecture summary

 private:
  DetectorConfig cfg_;
  std::vector<std::shared_ptr<const Layer>> layers_;
  std::vector<Shape> shapes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
  std::size_t llds_layers_ = 0;
};

struct Workspace {
  std::vector<std::vector<double>> acts;  // acts[0] = input, acts[i+1] = output of layer i
  std::vector<std::vector<double>> grads;
  std::vector<double> probs;
  std::span<const double> logits() const { return acts.back(); }
  void prepare(const Model& m);
};

Model build_detector(int cf, int num_classes);
Model build_detector(const DetectorConfig& cfg);

// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);
int argmax(std::span<const double> v);

// Checkpoint: "HTCM" + version byte, u32 manifest length + JSON manifest,
// u32 parameter count + f32 parameters, CRC-32 of everything before it.
struct Checkpoint {
  Model model;
  std::string manifest;  // JSON: architecture, seed, training config, lineage
};
std::vector<std::uint8_t> serialize_checkpoint(const Model& model, const std::string& extra_json);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Model& model, const std::string& extra_json, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace htcc::nn
