#include "htcc/quant/quantizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "htcc/common/byte_io.hpp"
#include "htcc/common/error.hpp"
#include "htcc/simd/kernels.hpp"

namespace htcc::quant {

using nlohmann::json;

namespace {

constexpr std::int64_t kScaleDen = std::int64_t{1} << kScaleShift;
constexpr std::array<std::uint8_t, 5> kMagic = {'H', 'T', 'C', 'Q', 1};

std::string_view mode_name(RequantMode m) { return m == RequantMode::truncate ? "truncate" : "round_nearest"; }

RequantMode mode_from_name(std::string_view s) {
  if (s == "truncate") return RequantMode::truncate;
  if (s == "round_nearest") return RequantMode::round_nearest;
  throw ConfigError("unknown rounding mode '" + std::string(s) + "'");
}

std::int16_t saturate12(std::int64_t v, bool* saturated) {
  if (v > kActMax || v < kActMin) {
    if (saturated) *saturated = true;
    return static_cast<std::int16_t>(v > kActMax ? kActMax : kActMin);
  }
  return static_cast<std::int16_t>(v);
}

// Structure of the integer network for a given detector configuration;
// weights, scales and biases are filled in afterwards.
std::vector<QLayer> skeleton(const nn::Model& model) {
  std::vector<QLayer> out;
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    const nn::Layer& l = model.layer(i);
    const nn::Shape in = model.shape(i);
    const nn::Shape o = model.shape(i + 1);
    switch (l.kind()) {
      case nn::LayerKind::llds_input: {
        QLayer q;
        q.kind = QKind::llds_input;
        q.name = l.name();
        q.in_shape = in;
        q.out_shape = o;
        q.float_output = static_cast<int>(i + 1);
        out.push_back(std::move(q));
        break;
      }
      case nn::LayerKind::conv1d: {
        QLayer q;
        q.kind = QKind::conv1d;
        q.name = l.name();
        q.geom = static_cast<const nn::Conv1d&>(l).geometry();
        q.in_shape = in;
        q.out_shape = o;
        q.float_output = static_cast<int>(i + 1);
        out.push_back(std::move(q));
        break;
      }
      case nn::LayerKind::dense: {
        const auto& d = static_cast<const nn::Dense&>(l);
        QLayer q;
        q.kind = QKind::dense;
        q.name = l.name();
        q.dense_in = d.inputs();
        q.dense_out = d.outputs();
        q.in_shape = in;
        q.out_shape = o;
        q.float_output = static_cast<int>(i + 1);
        q.is_output = i + 1 == model.num_layers();
        out.push_back(std::move(q));
        break;
      }
      case nn::LayerKind::activation: {
        const auto a = static_cast<const nn::ActivationLayer&>(l).activation();
        if (a != nn::Activation::relu && a != nn::Activation::linear) {
          throw ConfigError("fixed-point inference supports only linear and relu activations, not " +
                            std::string(nn::activation_name(a)));
        }
        if (out.empty() || out.back().kind == QKind::maxpool || out.back().act != nn::Activation::linear) {
          throw ConfigError("activation must follow a parameterised layer");
        }
        out.back().act = a;
        out.back().float_output = static_cast<int>(i + 1);
        break;
      }
      case nn::LayerKind::maxpool: {
        QLayer q;
        q.kind = QKind::maxpool;
        q.name = l.name();
        q.pool = static_cast<const nn::MaxPool1d&>(l).width();
        q.in_shape = in;
        q.out_shape = o;
        q.float_output = static_cast<int>(i + 1);
        out.push_back(std::move(q));
        break;
      }
    }
  }
  return out;
}

void widen(QLayer& l) { l.weights16.assign(l.weights.begin(), l.weights.end()); }

void refresh_requant(QuantizedModel& qm) {
  Rational in = qm.input_scale;
  for (QLayer& l : qm.layers) {
    if (l.kind == QKind::maxpool) {
      l.out_scale = in;
      continue;
    }
    if (!l.is_output) l.requant = Requant::from_ratio(in, l.weight_scale, l.out_scale);
    in = l.out_scale;
  }
}

}  // namespace

Rational Rational::from_double(double v) {
  if (!std::isfinite(v) || v <= 0.0) throw NumericError("scale must be finite and positive");
  const double scaled = std::round(v * static_cast<double>(kScaleDen));
  if (scaled >= 9.2e18) throw NumericError("scale too large for a 2^40 rational");
  return {std::max<std::int64_t>(1, static_cast<std::int64_t>(scaled)), kScaleDen};
}

Requant Requant::from_ratio(const Rational& in_scale, const Rational& w_scale, const Rational& out_scale) {
  for (const Rational* r : {&in_scale, &w_scale, &out_scale}) {
    if (r->den != kScaleDen || r->num <= 0) throw FormatError("scales must be positive with denominator 2^40");
  }
  // M = in * w / out = (in.num * w.num) / (out.num * 2^40), expanded bit by
  // bit until the multiplier has 31 significant bits.
  using u128 = unsigned __int128;
  const u128 num = static_cast<u128>(in_scale.num) * static_cast<u128>(w_scale.num);
  const u128 den = static_cast<u128>(out_scale.num) << kScaleShift;
  u128 m = num / den;
  u128 rem = num % den;
  int shift = 0;
  while (m < (u128{1} << 30) && shift < 62) {
    rem <<= 1;
    m = (m << 1) | (rem >= den ? 1u : 0u);
    if (rem >= den) rem -= den;
    ++shift;
  }
  if (m > (u128{1} << 40)) m = u128{1} << 40;  // every nonzero accumulator saturates anyway
  return {static_cast<std::int64_t>(m), shift};
}

std::int32_t Requant::apply(std::int64_t acc, RequantMode mode, bool* saturated) const {
  using i128 = __int128;
  const bool neg = acc < 0;
  i128 p = static_cast<i128>(neg ? -static_cast<i128>(acc) : static_cast<i128>(acc)) * multiplier;
  if (mode == RequantMode::round_nearest && shift > 0) p += static_cast<i128>(1) << (shift - 1);
  p >>= shift;
  if (p > kActMax + 1) {
    p = kActMax + 1;
    if (saturated) *saturated = true;
  }
  const std::int64_t v = neg ? -static_cast<std::int64_t>(p) : static_cast<std::int64_t>(p);
  return saturate12(v, saturated);
}

QuantizedWeights quantize_tensor(std::span<const double> w) {
  double mx = 0.0;
  for (double v : w) {
    if (!std::isfinite(v)) throw NumericError("non-finite weight");
    mx = std::max(mx, std::abs(v));
  }
  QuantizedWeights out;
  out.scale = Rational::from_double(mx > 0.0 ? mx / kWeightMax : 1.0);
  const double s = out.scale.value();
  out.q.reserve(w.size());
  for (double v : w) {
    const double r = std::clamp(std::round(v / s), -double(kWeightMax), double(kWeightMax));
    out.q.push_back(static_cast<std::int8_t>(r));
  }
  return out;
}

QuantizedModel quantize_weights(const nn::Model& model, RequantMode mode) {
  QuantizedModel qm;
  qm.config = model.config();
  qm.mode = mode;
  qm.layers = skeleton(model);
  for (QLayer& q : qm.layers) {
    if (q.kind == QKind::maxpool) continue;
    // A fused activation moves float_output past the layer holding the weights.
    std::size_t src = static_cast<std::size_t>(q.float_output - 1);
    while (model.layer(src).param_count() == 0) --src;
    const auto p = model.layer_params(src);
    if (q.kind == QKind::llds_input) {
      // w3[2][3], w5[2][5] share one scale; b3 + b5 collapse into one bias per row.
      const auto qw = quantize_tensor(p.subspan(0, 16));
      q.weights = qw.q;
      q.weight_scale = qw.scale;
      q.float_bias = {p[16] + p[18], p[17] + p[19]};
    } else {
      const std::size_t nw = q.kind == QKind::dense
                                 ? static_cast<std::size_t>(q.dense_in) * static_cast<std::size_t>(q.dense_out)
                                 : static_cast<std::size_t>(q.geom.cout * q.geom.cin * q.geom.kernel);
      const auto qw = quantize_tensor(p.subspan(0, nw));
      q.weights = qw.q;
      q.weight_scale = qw.scale;
      q.float_bias.assign(p.begin() + static_cast<std::ptrdiff_t>(nw), p.end());
    }
    widen(q);
  }
  return qm;
}

void calibrate_activations(QuantizedModel& qm, const nn::Model& model,
                           const std::vector<std::span<const double>>& frames) {
  if (frames.empty()) throw ConfigError("calibration needs at least one frame");
  if (!(qm.config == model.config())) throw ConfigError("calibration model does not match the quantized model");
  nn::Workspace ws;
  ws.prepare(model);
  double in_max = 0.0;
  std::vector<double> maxes(qm.layers.size(), 0.0);
  for (const auto& f : frames) {
    if (f.size() != 2 * nn::kFrameSamples) throw ConfigError("calibration frame must hold 1280 values");
    model.forward(f, ws);
    for (double v : ws.acts[0]) in_max = std::max(in_max, std::abs(v));
    for (std::size_t i = 0; i < qm.layers.size(); ++i) {
      for (double v : ws.acts[static_cast<std::size_t>(qm.layers[i].float_output)]) {
        maxes[i] = std::max(maxes[i], std::abs(v));
      }
    }
  }
  auto scale_for = [](double mx) {
    if (!std::isfinite(mx)) throw NumericError("non-finite activation during calibration");
    return Rational::from_double(mx > 0.0 ? mx / kActMax : 1.0);
  };
  qm.input_scale = scale_for(in_max);
  Rational in = qm.input_scale;
  for (std::size_t i = 0; i < qm.layers.size(); ++i) {
    QLayer& l = qm.layers[i];
    if (l.kind == QKind::maxpool) {
      l.out_scale = in;
      continue;
    }
    const double acc_scale = in.value() * l.weight_scale.value();
    l.bias.clear();
    for (double b : l.float_bias) {
      const double r = std::round(b / acc_scale);
      l.bias.push_back(static_cast<std::int32_t>(
          std::clamp(r, double(std::numeric_limits<std::int32_t>::min()), double(std::numeric_limits<std::int32_t>::max()))));
    }
    l.out_scale = l.is_output ? Rational{} : scale_for(maxes[i]);
    if (!l.is_output) in = l.out_scale;
  }
  refresh_requant(qm);
  qm.calibrated = true;
  qm.calibration_frames = frames.size();
}

void calibrate_activations(QuantizedModel& qm, const nn::Model& model, std::span<const std::vector<double>> frames) {
  std::vector<std::span<const double>> views(frames.begin(), frames.end());
  calibrate_activations(qm, model, views);
}

std::vector<std::int16_t> quantize_input(const QuantizedModel& qm, std::span<const double> frame) {
  if (frame.size() != 2 * nn::kFrameSamples) throw ConfigError("frame must hold 1280 values");
  const double s = qm.input_scale.value();
  std::vector<std::int16_t> out(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (!std::isfinite(frame[i])) throw NumericError("non-finite input sample");
    const double r = std::clamp(std::round(frame[i] / s), double(kActMin), double(kActMax));
    out[i] = static_cast<std::int16_t>(r);
  }
  return out;
}

void qllds_accumulate(const QLayer& l, std::span<const std::int16_t> in, int length, std::span<std::int64_t> acc) {
  for (int c = 0; c < 2; ++c) {
    std::array<std::int32_t, 5> k{};
    for (int j = 0; j < 5; ++j) k[static_cast<std::size_t>(j)] = l.weights[static_cast<std::size_t>(6 + c * 5 + j)];
    for (int j = 0; j < 3; ++j) k[static_cast<std::size_t>(j + 1)] += l.weights[static_cast<std::size_t>(c * 3 + j)];
    const std::int16_t* x = in.data() + static_cast<std::ptrdiff_t>(c) * length;
    std::int64_t* y = acc.data() + static_cast<std::ptrdiff_t>(c) * length;
    for (int t = 0; t < length; ++t) {
      std::int64_t s = l.bias[static_cast<std::size_t>(c)];
      for (int j = 0; j < 5; ++j) {
        const int idx = t + j - 2;
        if (idx >= 0 && idx < length) s += static_cast<std::int64_t>(k[static_cast<std::size_t>(j)]) * x[idx];
      }
      y[t] = s;
    }
  }
}

void qconv_accumulate(const QLayer& l, std::span<const std::int16_t> in, int length, std::span<std::int64_t> acc) {
  const nn::ConvGeometry& g = l.geom;
  const int lout = g.out_length(length);
  if (g.stride == 1) {
    std::vector<std::int32_t> row(static_cast<std::size_t>(lout));
    for (int co = 0; co < g.cout; ++co) {
      std::fill(row.begin(), row.end(), 0);
      for (int ci = 0; ci < g.cin; ++ci) {
        const std::int16_t* x = in.data() + static_cast<std::ptrdiff_t>(ci) * length;
        for (int j = 0; j < g.kernel; ++j) {
          const std::int32_t w = l.weights16[static_cast<std::size_t>((co * g.cin + ci) * g.kernel + j)];
          if (w == 0) continue;
          const int t0 = std::max(0, g.pad - j);
          const int t1 = std::min(lout, length + g.pad - j);
          if (t1 <= t0) continue;
          simd::axpy(w, std::span(x + (t0 + j - g.pad), static_cast<std::size_t>(t1 - t0)),
                     std::span(row.data() + t0, static_cast<std::size_t>(t1 - t0)));
        }
      }
      std::int64_t* y = acc.data() + static_cast<std::ptrdiff_t>(co) * lout;
      for (int t = 0; t < lout; ++t) y[t] = std::int64_t{l.bias[static_cast<std::size_t>(co)]} + row[static_cast<std::size_t>(t)];
    }
    return;
  }
  for (int co = 0; co < g.cout; ++co) {
    for (int t = 0; t < lout; ++t) {
      std::int64_t s = l.bias[static_cast<std::size_t>(co)];
      for (int ci = 0; ci < g.cin; ++ci) {
        for (int j = 0; j < g.kernel; ++j) {
          const int idx = t * g.stride + j - g.pad;
          if (idx < 0 || idx >= length) continue;
          s += std::int64_t{l.weights16[static_cast<std::size_t>((co * g.cin + ci) * g.kernel + j)]} *
               in[static_cast<std::size_t>(ci * length + idx)];
        }
      }
      acc[static_cast<std::size_t>(co * lout + t)] = s;
    }
  }
}

void qdense_accumulate(const QLayer& l, std::span<const std::int16_t> in, std::span<std::int64_t> acc) {
  const auto n = static_cast<std::size_t>(l.dense_in);
  for (int o = 0; o < l.dense_out; ++o) {
    acc[static_cast<std::size_t>(o)] =
        std::int64_t{l.bias[static_cast<std::size_t>(o)]} +
        simd::dot(std::span<const std::int16_t>(l.weights16).subspan(static_cast<std::size_t>(o) * n, n), in.first(n));
  }
}

std::int32_t finish_activation(const QLayer& l, std::int64_t acc, RequantMode mode, bool* saturated) {
  if (l.act == nn::Activation::relu && acc < 0) acc = 0;
  if (l.is_output) {
    return static_cast<std::int32_t>(std::clamp<std::int64_t>(acc, std::numeric_limits<std::int32_t>::min(),
                                                              std::numeric_limits<std::int32_t>::max()));
  }
  return l.requant.apply(acc, mode, saturated);
}

std::vector<std::int32_t> quantized_forward_int(const QuantizedModel& qm, std::span<const std::int16_t> input,
                                                QuantTrace* trace) {
  if (!qm.calibrated) throw ConfigError("quantized model is not calibrated");
  if (input.size() != 2 * nn::kFrameSamples) throw ConfigError("input must hold 1280 values");
  std::vector<std::int16_t> cur(input.begin(), input.end());
  std::vector<std::int64_t> acc;
  for (const QLayer& l : qm.layers) {
    const std::size_t out_n = l.out_shape.size();
    if (l.kind == QKind::maxpool) {
      std::vector<std::int16_t> next(out_n);
      for (int c = 0; c < l.out_shape.channels; ++c) {
        for (int t = 0; t < l.out_shape.length; ++t) {
          const std::int16_t* w = cur.data() + static_cast<std::ptrdiff_t>(c) * l.in_shape.length +
                                  static_cast<std::ptrdiff_t>(t) * l.pool;
          next[static_cast<std::size_t>(c * l.out_shape.length + t)] = *std::max_element(w, w + l.pool);
        }
      }
      cur = std::move(next);
      if (trace) trace->activations.push_back(cur);
      continue;
    }
    acc.assign(out_n, 0);
    switch (l.kind) {
      case QKind::llds_input: qllds_accumulate(l, cur, l.in_shape.length, acc); break;
      case QKind::conv1d: qconv_accumulate(l, cur, l.in_shape.length, acc); break;
      case QKind::dense: qdense_accumulate(l, cur, acc); break;
      case QKind::maxpool: break;
    }
    if (l.is_output) {
      std::vector<std::int32_t> logits(out_n);
      for (std::size_t i = 0; i < out_n; ++i) logits[i] = finish_activation(l, acc[i], qm.mode, nullptr);
      return logits;
    }
    std::vector<std::int16_t> next(out_n);
    for (std::size_t i = 0; i < out_n; ++i) {
      bool sat = false;
      next[i] = static_cast<std::int16_t>(finish_activation(l, acc[i], qm.mode, &sat));
      if (trace) trace->saturated += sat ? 1 : 0;
    }
    if (trace) trace->values += out_n;
    cur = std::move(next);
    if (trace) trace->activations.push_back(cur);
  }
  throw ConfigError("quantized model has no output layer");
}

std::vector<std::int32_t> quantized_forward(const QuantizedModel& qm, std::span<const double> frame,
                                            QuantTrace* trace) {
  return quantized_forward_int(qm, quantize_input(qm, frame), trace);
}

std::vector<std::uint8_t> serialize_quantized(const QuantizedModel& qm, const std::string& extra_json) {
  if (!qm.calibrated) throw ConfigError("cannot save an uncalibrated quantized model");
  json manifest = {{"format", "HTCQ"},
                   {"config", json::parse(qm.config.to_json())},
                   {"rounding", mode_name(qm.mode)},
                   {"weight_bits", 8},
                   {"activation_bits", 12},
                   {"calibration_frames", qm.calibration_frames}};
  manifest["meta"] = extra_json.empty() ? json::object() : json::parse(extra_json);
  const std::string text = manifest.dump(1);
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.text(text);
  w.i64(qm.input_scale.num);
  w.i64(qm.input_scale.den);
  std::uint32_t nparam = 0;
  for (const QLayer& l : qm.layers) nparam += l.kind == QKind::maxpool ? 0 : 1;
  w.u32(nparam);
  for (const QLayer& l : qm.layers) {
    if (l.kind == QKind::maxpool) continue;
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.i64(l.weight_scale.num);
    w.i64(l.weight_scale.den);
    w.u32(static_cast<std::uint32_t>(l.weights.size()));
    for (std::int8_t v : l.weights) w.u8(static_cast<std::uint8_t>(v));
    w.u32(static_cast<std::uint32_t>(l.bias.size()));
    for (std::int32_t v : l.bias) w.i32(v);
    w.i64(l.out_scale.num);
    w.i64(l.out_scale.den);
  }
  w.u32(crc32(w.buffer()));
  return std::move(w.buffer());
}

QuantizedModel deserialize_quantized(std::span<const std::uint8_t> bytes, std::string* manifest_out) {
  if (bytes.size() < 4 || !std::equal(kMagic.begin(), kMagic.begin() + 4, bytes.begin())) {
    throw FormatError("not a quantized model (bad magic)");
  }
  if (bytes.size() < 9) throw FormatError("truncated quantized model");
  if (bytes[4] != kMagic[4]) throw FormatError("unsupported quantized model version " + std::to_string(bytes[4]));
  const std::uint32_t stored = ByteReader(bytes.subspan(bytes.size() - 4)).u32();
  if (stored != crc32(bytes.subspan(0, bytes.size() - 4))) throw FormatError("quantized model checksum mismatch");
  ByteReader r(bytes.subspan(0, bytes.size() - 4));
  r.bytes(5);
  const std::string text = r.text(r.u32());
  if (manifest_out) *manifest_out = text;
  QuantizedModel qm;
  try {
    const json m = json::parse(text);
    qm.config = nn::DetectorConfig::from_json(m.at("config").dump());
    qm.mode = mode_from_name(m.at("rounding").get<std::string>());
    qm.calibration_frames = m.value("calibration_frames", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad quantized model manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad quantized model manifest: ") + e.what());
  }
  const nn::Model shape_model(qm.config);
  qm.layers = skeleton(shape_model);
  qm.input_scale.num = r.i64();
  qm.input_scale.den = r.i64();
  std::uint32_t expected = 0;
  for (const QLayer& l : qm.layers) expected += l.kind == QKind::maxpool ? 0 : 1;
  if (r.u32() != expected) throw FormatError("quantized layer count does not match its architecture");
  for (QLayer& l : qm.layers) {
    if (l.kind == QKind::maxpool) continue;
    if (r.u8() != static_cast<std::uint8_t>(l.kind)) throw FormatError("quantized layer kind mismatch at " + l.name);
    l.weight_scale.num = r.i64();
    l.weight_scale.den = r.i64();
    const std::uint32_t nw = r.u32();
    const std::size_t want_w = l.kind == QKind::llds_input ? 16
                               : l.kind == QKind::dense
                                   ? static_cast<std::size_t>(l.dense_in) * static_cast<std::size_t>(l.dense_out)
                                   : static_cast<std::size_t>(l.geom.cout * l.geom.cin * l.geom.kernel);
    if (nw != want_w) throw FormatError("weight count mismatch at " + l.name);
    const auto blob = r.bytes(nw);
    l.weights.resize(nw);
    for (std::size_t i = 0; i < nw; ++i) {
      l.weights[i] = static_cast<std::int8_t>(blob[i]);
      if (l.weights[i] < -kWeightMax) throw FormatError("weight outside [-127, 127] at " + l.name);
    }
    widen(l);
    const std::uint32_t nb = r.u32();
    const std::size_t want_b = l.kind == QKind::llds_input ? 2
                               : l.kind == QKind::dense    ? static_cast<std::size_t>(l.dense_out)
                                                           : static_cast<std::size_t>(l.geom.cout);
    if (nb != want_b) throw FormatError("bias count mismatch at " + l.name);
    l.bias.resize(nb);
    for (auto& b : l.bias) b = r.i32();
    l.out_scale.num = r.i64();
    l.out_scale.den = r.i64();
  }
  if (!r.at_end()) throw FormatError("trailing bytes in quantized model");
  refresh_requant(qm);
  qm.calibrated = true;
  return qm;
}

void save_quantized(const QuantizedModel& qm, const std::string& extra_json, const std::string& path) {
  write_file(path, serialize_quantized(qm, extra_json));
}

QuantizedModel load_quantized(const std::string& path, std::string* manifest) {
  return deserialize_quantized(read_file(path), manifest);
}

}  // namespace htcc::quant
