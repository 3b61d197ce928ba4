#include "htcc/nn/model.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "htcc/common/byte_io.hpp"
#include "htcc/common/error.hpp"

namespace htcc::nn {

using nlohmann::json;

namespace {
constexpr std::array<std::uint8_t, 5> kCheckpointMagic = {'H', 'T', 'C', 'M', 1};
}

void DetectorConfig::validate() const {
  if (cf < 1 || cf > 16) throw ConfigError("cf must lie in [1,16]");
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  if (conv1_filters < 1 || conv2_filters < 1 || hidden < 1) throw ConfigError("layer widths must be positive");
  if (conv1_kernel < 1 || conv1_kernel % 2 == 0 || conv2_kernel < 1 || conv2_kernel % 2 == 0) {
    throw ConfigError("conv kernels must be odd for same padding");
  }
  if (pool < 1) throw ConfigError("pool width must be positive");
  if (llds_output_length(cf) / pool < 1) throw ConfigError("pooled length is empty");
}

std::string DetectorConfig::to_json() const {
  json j = {{"cf", cf},
            {"num_classes", num_classes},
            {"conv1_filters", conv1_filters},
            {"conv1_kernel", conv1_kernel},
            {"pool", pool},
            {"conv2_filters", conv2_filters},
            {"conv2_kernel", conv2_kernel},
            {"hidden", hidden},
            {"llds_activation", std::string(activation_name(llds_activation))}};
  return j.dump();
}

DetectorConfig DetectorConfig::from_json(const std::string& text) {
  DetectorConfig c;
  try {
    const json j = json::parse(text);
    c.cf = j.at("cf").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    c.conv1_filters = j.at("conv1_filters").get<int>();
    c.conv1_kernel = j.at("conv1_kernel").get<int>();
    c.pool = j.at("pool").get<int>();
    c.conv2_filters = j.at("conv2_filters").get<int>();
    c.conv2_kernel = j.at("conv2_kernel").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.llds_activation = activation_from_name(j.at("llds_activation").get<std::string>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad detector config: ") + e.what());
  }
  return c;
}

int llds_output_length(int cf) { return (kFrameSamples - 5) / cf + 1; }

Model::Model(DetectorConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  layers_.push_back(std::make_shared<LldsInput>());
  layers_.push_back(std::make_shared<Conv1d>(ConvGeometry{2, 2, 5, cfg_.cf, 0}, Init::uniform_fan_in, "llds_down"));
  if (cfg_.llds_activation != Activation::linear) layers_.push_back(std::make_shared<ActivationLayer>(cfg_.llds_activation));
  llds_layers_ = layers_.size();

  layers_.push_back(std::make_shared<Conv1d>(
      ConvGeometry{2, cfg_.conv1_filters, cfg_.conv1_kernel, 1, cfg_.conv1_kernel / 2}, Init::he_normal, "conv1"));
  layers_.push_back(std::make_shared<ActivationLayer>(Activation::relu));
  layers_.push_back(std::make_shared<MaxPool1d>(cfg_.pool));
  layers_.push_back(std::make_shared<Conv1d>(
      ConvGeometry{cfg_.conv1_filters, cfg_.conv2_filters, cfg_.conv2_kernel, 1, cfg_.conv2_kernel / 2},
      Init::he_normal, "conv2"));
  layers_.push_back(std::make_shared<ActivationLayer>(Activation::relu));
  const int flat = cfg_.conv2_filters * (llds_output_length(cfg_.cf) / cfg_.pool);
  layers_.push_back(std::make_shared<Dense>(flat, cfg_.hidden, Init::he_normal, "dense"));
  layers_.push_back(std::make_shared<ActivationLayer>(Activation::relu));
  layers_.push_back(std::make_shared<Dense>(cfg_.hidden, cfg_.num_classes, Init::uniform_fan_in, "output"));

  shapes_.push_back({2, kFrameSamples});
  std::size_t off = 0;
  for (const auto& l : layers_) {
    offsets_.push_back(off);
    off += l->param_count();
    shapes_.push_back(l->output_shape(shapes_.back()));
  }
  params_.assign(off, 0.0);
}

std::size_t Model::llds_param_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < llds_layers_; ++i) n += layers_[i]->param_count();
  return n;
}

std::uint64_t Model::macs() const {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) n += layers_[i]->macs(shapes_[i]);
  return n;
}

std::uint64_t Model::llds_macs() const {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < llds_layers_; ++i) n += layers_[i]->macs(shapes_[i]);
  return n;
}

void Model::init(std::uint64_t seed) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Rng rng(derive_seed({seed, 0x1A7E5u, i}));
    layers_[i]->init(layer_params(i), rng);
  }
}

void Workspace::prepare(const Model& m) {
  if (acts.size() == m.num_layers() + 1) return;
  acts.resize(m.num_layers() + 1);
  grads.resize(m.num_layers() + 1);
  for (std::size_t i = 0; i <= m.num_layers(); ++i) {
    acts[i].assign(m.shape(i).size(), 0.0);
    grads[i].assign(m.shape(i).size(), 0.0);
  }
}

void Model::forward(std::span<const double> frame, Workspace& ws) const {
  if (frame.size() != shapes_.front().size()) throw std::invalid_argument("forward: expected 1280 input values");
  ws.prepare(*this);
  std::copy(frame.begin(), frame.end(), ws.acts[0].begin());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->forward(layer_params(i), shapes_[i], ws.acts[i], ws.acts[i + 1]);
  }
}

double Model::backward(Workspace& ws, int label, std::span<double> grad, double scale) const {
  if (label < 0 || label >= cfg_.num_classes) throw std::invalid_argument("backward: label out of range");
  ws.probs = softmax(ws.acts.back());
  const double loss = -std::log(std::max(ws.probs[static_cast<std::size_t>(label)], 1e-300));
  auto& top = ws.grads.back();
  for (std::size_t c = 0; c < top.size(); ++c) top[c] = scale * (ws.probs[c] - (static_cast<int>(c) == label ? 1.0 : 0.0));
  for (std::size_t i = layers_.size(); i-- > 0;) {
    layers_[i]->backward(layer_params(i), shapes_[i], ws.acts[i], ws.acts[i + 1], ws.grads[i + 1],
                         grad.subspan(offsets_[i], layers_[i]->param_count()), ws.grads[i]);
  }
  return loss;
}

Tensor Model::forward(const Tensor& batch) const {
  if (batch.shape.size() != 3 || batch.shape[1] != 2 || batch.shape[2] != kFrameSamples) {
    throw std::invalid_argument("forward: batch must have shape (N, 2, 640)");
  }
  const int n = batch.shape[0];
  Tensor out({n, cfg_.num_classes});
  Workspace ws;
  for (int i = 0; i < n; ++i) {
    forward(batch.row(static_cast<std::size_t>(i)), ws);
    std::copy(ws.acts.back().begin(), ws.acts.back().end(), out.row(static_cast<std::size_t>(i)).begin());
  }
  return out;
}

std::string Model::describe() const {
  json layers = json::array();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers.push_back({{"name", layers_[i]->name()},
                      {"in", {shapes_[i].channels, shapes_[i].length}},
                      {"out", {shapes_[i + 1].channels, shapes_[i + 1].length}},
                      {"params", layers_[i]->param_count()},
                      {"macs", layers_[i]->macs(shapes_[i])}});
  }
  json j = {{"config", json::parse(cfg_.to_json())},
            {"layers", layers},
            {"param_count", param_count()},
            {"llds_param_count", llds_param_count()},
            {"macs", macs()},
            {"llds_macs", llds_macs()}};
  return j.dump();
}

Model build_detector(int cf, int num_classes) {
  DetectorConfig c;
  c.cf = cf;
  c.num_classes = num_classes;
  return Model(c);
}

Model build_detector(const DetectorConfig& cfg) { return Model(cfg); }

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] = std::exp(logits[i] - m);
  for (double& v : p) v /= s;
  return p;
}

int argmax(std::span<const double> v) { return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin()); }

std::vector<std::uint8_t> serialize_checkpoint(const Model& model, const std::string& extra_json) {
  json manifest = {{"format", "HTCM"}, {"architecture", json::parse(model.describe())}};
  manifest["meta"] = extra_json.empty() ? json::object() : json::parse(extra_json);
  const std::string text = manifest.dump(1);
  ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.text(text);
  w.u32(static_cast<std::uint32_t>(model.param_count()));
  for (double v : model.params()) w.f32(static_cast<float>(v));
  w.u32(crc32(w.buffer()));
  return std::move(w.buffer());
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(kCheckpointMagic.begin(), kCheckpointMagic.begin() + 4, bytes.begin())) {
    throw FormatError("not a model checkpoint (bad magic)");
  }
  if (bytes.size() < 9) throw FormatError("truncated checkpoint");
  if (bytes[4] != kCheckpointMagic[4]) throw FormatError("unsupported checkpoint version " + std::to_string(bytes[4]));
  const std::uint32_t stored = ByteReader(bytes.subspan(bytes.size() - 4)).u32();
  if (stored != crc32(bytes.subspan(0, bytes.size() - 4))) throw FormatError("checkpoint checksum mismatch");
  ByteReader r(bytes.subspan(0, bytes.size() - 4));
  r.bytes(5);
  Checkpoint cp;
  cp.manifest = r.text(r.u32());
  json manifest;
  try {
    manifest = json::parse(cp.manifest);
    cp.model = Model(DetectorConfig::from_json(manifest.at("architecture").at("config").dump()));
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad checkpoint manifest: ") + e.what());
  }
  const std::uint32_t n = r.u32();
  if (n != cp.model.param_count()) throw FormatError("checkpoint parameter count does not match its architecture");
  for (double& v : cp.model.params()) v = static_cast<double>(r.f32());
  if (!r.at_end()) throw FormatError("trailing bytes in checkpoint");
  return cp;
}

void save_checkpoint(const Model& model, const std::string& extra_json, const std::string& path) {
  write_file(path, serialize_checkpoint(model, extra_json));
}

Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path)); }

}  // namespace htcc::nn
