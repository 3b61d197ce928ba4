#include "htcc/dataset/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <limits>
#include <json.hpp>
#include <regex>

#include "htcc/common/byte_io.hpp"
#include "htcc/common/error.hpp"
#include "htcc/common/parallel.hpp"
#include "htcc/common/rng.hpp"

namespace htcc::dataset {

using nlohmann::json;
using ofdm::Complex;

namespace {

constexpr std::array<std::uint8_t, 5> kMagic = {0x48, 0x54, 0x43, 0x43, 0x01};

json real_to_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double real_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ConfigError("bad real value '" + s + "'");
  }
  return j.get<double>();
}

}  // namespace

GenerationConfig GenerationConfig::full_scale() {
  GenerationConfig c;
  c.scale = "full";
  c.frames_per_element = 2000;
  return c;
}

GenerationConfig GenerationConfig::desk_scale() { return GenerationConfig{}; }

void GenerationConfig::validate() const {
  if (frames_per_element <= 0 || frames_per_element % channel::kSubAcquisitions != 0) {
    throw ConfigError("frames_per_element must be a positive multiple of 10");
  }
  if (acquisitions < 1 || acquisitions > 6553) throw ConfigError("acquisitions must lie in [1,6553]");
  if (snr_grid.empty()) throw ConfigError("snr_grid must not be empty");
  for (double s : snr_grid) {
    if (std::isnan(s) || s == -std::numeric_limits<double>::infinity()) throw ConfigError("bad SNR grid value");
  }
  if (classes.empty()) throw ConfigError("at least one class is required");
  covert::AttackSpec probe = attack;
  probe.validate();
}

std::string GenerationConfig::to_json() const {
  json j;
  j["format"] = "HTCC1";
  j["scale"] = scale;
  j["frames_per_element"] = frames_per_element;
  j["acquisitions"] = acquisitions;
  j["sub_acquisitions"] = channel::kSubAcquisitions;
  json grid = json::array();
  for (double s : snr_grid) grid.push_back(real_to_json(s));
  j["snr_grid"] = grid;
  json cls = json::array();
  for (auto c : classes) cls.push_back(std::string(covert::attack_name(c)));
  j["classes"] = cls;
  j["master_seed"] = std::to_string(master_seed);
  j["attack"] = {{"alpha", attack.alpha},
                 {"phase_step_deg", attack.phase_step_deg},
                 {"dirty_count_per_symbol", attack.dirty_count_per_symbol},
                 {"dispersion_radius", attack.dispersion_radius},
                 {"jitter_sigma_ratio", attack.jitter_sigma_ratio},
                 {"theta_step_deg", attack.theta_step_deg},
                 {"envelope_factor", attack.envelope_factor},
                 {"evm_distortion_db", real_to_json(attack.evm_distortion_db)}};
  j["impairments"] = impairments;
  j["ranges"] = {{"cfo_max", ranges.cfo_max},
                 {"dc_max", ranges.dc_max},
                 {"gain_max", ranges.gain_max},
                 {"phase_deg_max", ranges.phase_deg_max},
                 {"phase_noise_std", ranges.phase_noise_std}};
  j["fixed_reference_power"] = fixed_reference_power;
  const auto msg = covert::CovertMessage::random(master_seed);
  std::string hex;
  for (auto b : msg.bytes()) {
    static const char* digits = "0123456789abcdef";
    hex += digits[b >> 4];
    hex += digits[b & 15];
  }
  j["covert_message"] = hex;
  return j.dump(1);
}

GenerationConfig GenerationConfig::from_json(const std::string& text) {
  GenerationConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
  }
  try {
    c.scale = j.value("scale", c.scale);
    c.frames_per_element = j.at("frames_per_element").get<int>();
    c.acquisitions = j.at("acquisitions").get<int>();
    c.snr_grid.clear();
    for (const auto& s : j.at("snr_grid")) c.snr_grid.push_back(real_from_json(s));
    c.classes.clear();
    for (const auto& s : j.at("classes")) c.classes.push_back(covert::attack_from_name(s.get<std::string>()));
    c.master_seed = std::stoull(j.at("master_seed").get<std::string>());
    const auto& a = j.at("attack");
    c.attack.alpha = a.at("alpha").get<double>();
    c.attack.phase_step_deg = a.at("phase_step_deg").get<double>();
    c.attack.dirty_count_per_symbol = a.at("dirty_count_per_symbol").get<int>();
    c.attack.dispersion_radius = a.at("dispersion_radius").get<double>();
    c.attack.jitter_sigma_ratio = a.at("jitter_sigma_ratio").get<double>();
    c.attack.theta_step_deg = a.at("theta_step_deg").get<double>();
    c.attack.envelope_factor = a.at("envelope_factor").get<double>();
    c.attack.evm_distortion_db = real_from_json(a.at("evm_distortion_db"));
    c.impairments = j.at("impairments").get<bool>();
    const auto& r = j.at("ranges");
    c.ranges.cfo_max = r.at("cfo_max").get<double>();
    c.ranges.dc_max = r.at("dc_max").get<double>();
    c.ranges.gain_max = r.at("gain_max").get<double>();
    c.ranges.phase_deg_max = r.at("phase_deg_max").get<double>();
    c.ranges.phase_noise_std = r.at("phase_noise_std").get<double>();
    c.fixed_reference_power = j.at("fixed_reference_power").get<bool>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest is missing generation fields: ") + e.what());
  }
  return c;
}

ofdm::IqFrame DatasetElement::frame_iq(std::size_t i) const {
  ofdm::IqFrame f;
  const auto v = frame(i);
  for (std::size_t n = 0; n < f.samples.size(); ++n) f.samples[n] = Complex(v[2 * n], v[2 * n + 1]);
  return f;
}

int DatasetElement::sub_acquisition(std::size_t frame_index) const {
  if (frame_count % channel::kSubAcquisitions != 0) return 0;
  return static_cast<int>(frame_index / (frame_count / channel::kSubAcquisitions));
}

std::size_t DatasetStore::frame_count() const {
  std::size_t n = 0;
  for (const auto& e : elements) n += e.frame_count;
  return n;
}

std::uint64_t frame_seed(std::uint64_t master, AttackKind label, std::size_t snr_index, std::size_t acq,
                         std::size_t frame_index) {
  return derive_seed({master, static_cast<std::uint64_t>(label), snr_index, acq, frame_index});
}

FrameRecord synthesize_frame(const GenerationConfig& cfg, AttackKind label, std::size_t snr_index,
                             std::size_t acq, std::size_t frame_index) {
  const std::uint64_t seed = frame_seed(cfg.master_seed, label, snr_index, acq, frame_index);
  FrameRecord rec;

  Rng payload_rng(derive_seed({seed, 1}));
  std::vector<std::uint8_t> payload(ofdm::kPayloadBits);
  for (auto& b : payload) b = static_cast<std::uint8_t>(payload_rng.bit());
  rec.clean = ofdm::build_frame(payload);

  covert::AttackSpec spec = cfg.attack;
  spec.kind = label;
  // Each element restarts the message stream, so frame i leaks bits
  // [i * bits_per_frame, (i + 1) * bits_per_frame) of the repeating message.
  covert::CovertMessage msg(covert::CovertMessage::random(cfg.master_seed).bytes(),
                            frame_index * static_cast<std::size_t>(spec.bits_per_frame()));
  auto inj = covert::inject(rec.clean, spec, msg, derive_seed({seed, 2}));
  rec.injected = inj.frame;
  rec.leaked_bits = std::move(inj.leaked_bits);

  ofdm::IqFrame f = rec.injected;
  if (cfg.impairments) {
    const std::size_t per_sub = static_cast<std::size_t>(cfg.frames_per_element / channel::kSubAcquisitions);
    const std::size_t regime = acq * channel::kSubAcquisitions + frame_index / per_sub;
    const auto params = channel::draw_acquisition_impairments(cfg.master_seed, regime, cfg.ranges);
    f = channel::apply_impairments(f, params, derive_seed({seed, 3}));
  }
  const double ref_power = cfg.fixed_reference_power ? channel::mean_power(rec.clean) : 0.0;
  rec.received = channel::apply_awgn(f, cfg.snr_grid[snr_index], derive_seed({seed, 4}), ref_power);
  return rec;
}

DatasetStore generate(const GenerationConfig& cfg) {
  cfg.validate();
  DatasetStore store;
  store.manifest = cfg.to_json();

  struct Cell {
    AttackKind label;
    std::size_t snr_index;
    std::size_t acq;
  };
  std::vector<Cell> cells;
  for (auto label : cfg.classes) {
    for (std::size_t s = 0; s < cfg.snr_grid.size(); ++s) {
      for (std::size_t a = 0; a < static_cast<std::size_t>(cfg.acquisitions); ++a) cells.push_back({label, s, a});
    }
  }
  store.elements.resize(cells.size());
  run_parallel(cells.size(), cfg.threads, [&](std::size_t i) {
    const Cell& c = cells[i];
    DatasetElement& e = store.elements[i];
    e.label = c.label;
    e.snr_db = static_cast<float>(cfg.snr_grid[c.snr_index]);
    e.acquisition_id = static_cast<std::uint16_t>(c.acq);
    e.frame_count = static_cast<std::uint32_t>(cfg.frames_per_element);
    e.frames.resize(static_cast<std::size_t>(cfg.frames_per_element) * kValuesPerFrame);
    for (std::size_t f = 0; f < e.frame_count; ++f) {
      FrameRecord rec = synthesize_frame(cfg, c.label, c.snr_index, c.acq, f);
      float* out = e.frames.data() + f * kValuesPerFrame;
      for (std::size_t n = 0; n < rec.received.samples.size(); ++n) {
        out[2 * n] = static_cast<float>(rec.received.samples[n].real());
        out[2 * n + 1] = static_cast<float>(rec.received.samples[n].imag());
      }
      e.leaked_bits.insert(e.leaked_bits.end(), rec.leaked_bits.begin(), rec.leaked_bits.end());
    }
  });
  return store;
}

std::vector<std::uint8_t> serialize(const DatasetStore& store) {
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(static_cast<std::uint32_t>(store.manifest.size()));
  w.text(store.manifest);
  for (const auto& e : store.elements) {
    if (e.frames.size() != static_cast<std::size_t>(e.frame_count) * kValuesPerFrame) {
      throw FormatError("element frame buffer does not match its frame count");
    }
    const std::size_t start = w.size();
    w.u8(static_cast<std::uint8_t>(e.label));
    w.f32(e.snr_db);
    w.u16(e.acquisition_id);
    w.u32(e.frame_count);
    for (float v : e.frames) w.f32(v);
    w.u32(static_cast<std::uint32_t>(e.leaked_bits.size()));
    std::vector<std::uint8_t> packed((e.leaked_bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < e.leaked_bits.size(); ++i) {
      if (e.leaked_bits[i]) packed[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    }
    w.bytes(packed);
    const auto& buf = w.buffer();
    w.u32(crc32(std::span(buf).subspan(start, buf.size() - start)));
  }
  return std::move(w.buffer());
}

DatasetStore deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.begin() + 4, bytes.begin())) {
    throw FormatError("not an HTCC dataset (bad magic)");
  }
  r.bytes(4);
  const std::uint8_t version = r.u8();
  if (version != kMagic[4]) throw FormatError("unsupported HTCC version " + std::to_string(version));
  DatasetStore store;
  store.manifest = r.text(r.u32());
  while (!r.at_end()) {
    const std::size_t start = r.position();
    DatasetElement e;
    const std::uint8_t label = r.u8();
    if (label >= covert::kNumClasses) throw FormatError("bad class label " + std::to_string(label));
    e.label = static_cast<AttackKind>(label);
    e.snr_db = r.f32();
    e.acquisition_id = r.u16();
    e.frame_count = r.u32();
    const std::size_t n_values = static_cast<std::size_t>(e.frame_count) * kValuesPerFrame;
    if (n_values * 4 > r.remaining()) throw FormatError("truncated element frame data");
    e.frames.resize(n_values);
    for (float& v : e.frames) v = r.f32();
    const std::uint32_t n_bits = r.u32();
    const auto packed = r.bytes((n_bits + 7) / 8);
    e.leaked_bits.resize(n_bits);
    for (std::size_t i = 0; i < n_bits; ++i) e.leaked_bits[i] = (packed[i / 8] >> (7 - i % 8)) & 1;
    const std::uint32_t expect = crc32(bytes.subspan(start, r.position() - start));
    if (r.u32() != expect) throw FormatError("element checksum mismatch");
    store.elements.push_back(std::move(e));
  }
  return store;
}

void write(const DatasetStore& store, const std::string& path) { write_file(path, serialize(store)); }

DatasetStore read(const std::string& path) { return deserialize(read_file(path)); }

RawLayout::Encoding parse_encoding(const std::string& s) {
  if (s == "f32" || s == "float32") return RawLayout::Encoding::f32;
  if (s == "i16" || s == "int16") return RawLayout::Encoding::i16;
  throw ConfigError("unknown sample encoding '" + s + "'");
}

DatasetStore ingest_raw(const std::string& path, const RawLayout& layout) {
  const auto bytes = read_file(path);
  const std::size_t width = layout.encoding == RawLayout::Encoding::f32 ? 4 : 2;
  if (bytes.size() % width != 0) throw FormatError("raw file size is not a whole number of samples");
  const std::size_t n_values = bytes.size() / width;
  if (n_values % kValuesPerFrame != 0) {
    throw FormatError("raw file holds " + std::to_string(n_values) + " values, not a multiple of 1280");
  }
  const std::size_t n_frames = n_values / kValuesPerFrame;
  if (layout.frames_per_file > 0 && n_frames != static_cast<std::size_t>(layout.frames_per_file)) {
    throw FormatError("raw file holds " + std::to_string(n_frames) + " frames, layout expects " +
                      std::to_string(layout.frames_per_file));
  }

  const std::string name = std::filesystem::path(path).filename().string();
  std::smatch m;
  const std::regex re(layout.filename_pattern);
  if (!std::regex_search(name, m, re) || m.size() < 3) {
    throw ConfigError("file name '" + name + "' does not match the label/SNR pattern");
  }
  DatasetElement e;
  const std::string label = m[1].str();
  if (label.size() == 1 && label[0] >= '0' && label[0] <= '4') {
    e.label = static_cast<AttackKind>(label[0] - '0');
  } else {
    e.label = covert::attack_from_name(label);
  }
  e.snr_db = std::stof(m[2].str());
  e.acquisition_id = layout.acquisition_id;
  e.frame_count = static_cast<std::uint32_t>(n_frames);

  auto value_at = [&](std::size_t i) -> float {
    const std::uint8_t* p = bytes.data() + i * width;
    if (layout.encoding == RawLayout::Encoding::f32) {
      std::uint32_t u = 0;
      for (std::size_t b = 0; b < 4; ++b) {
        const std::size_t src = layout.big_endian ? 3 - b : b;
        u |= std::uint32_t{p[src]} << (8 * b);
      }
      return std::bit_cast<float>(u);
    }
    std::uint16_t u = layout.big_endian ? static_cast<std::uint16_t>((p[0] << 8) | p[1])
                                        : static_cast<std::uint16_t>((p[1] << 8) | p[0]);
    return static_cast<float>(static_cast<std::int16_t>(u) * layout.int16_scale);
  };

  e.frames.resize(n_values);
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t base = f * kValuesPerFrame;
    for (std::size_t n = 0; n < static_cast<std::size_t>(ofdm::kFrameLength); ++n) {
      if (layout.interleave == RawLayout::Interleave::iq_pairs) {
        e.frames[base + 2 * n] = value_at(base + 2 * n);
        e.frames[base + 2 * n + 1] = value_at(base + 2 * n + 1);
      } else {
        e.frames[base + 2 * n] = value_at(base + n);
        e.frames[base + 2 * n + 1] = value_at(base + ofdm::kFrameLength + n);
      }
    }
  }

  json manifest = {{"format", "HTCC1"}, {"source", "raw"}, {"file", name}};
  DatasetStore store;
  store.manifest = manifest.dump(1);
  store.elements.push_back(std::move(e));
  return store;
}

Split split(const DatasetStore& store, std::array<double, 3> ratios, std::uint64_t seed) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  int max_acq = 0;
  for (const auto& e : store.elements) max_acq = std::max<int>(max_acq, e.acquisition_id);
  const std::size_t n_regimes = static_cast<std::size_t>(max_acq + 1) * channel::kSubAcquisitions;

  std::array<std::size_t, 3> counts{};
  counts[0] = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n_regimes)));
  counts[1] = static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n_regimes)));
  if (counts[0] + counts[1] > n_regimes) counts[1] = n_regimes - counts[0];
  counts[2] = n_regimes - counts[0] - counts[1];
  for (std::size_t p = 0; p < 3; ++p) {
    if (ratios[p] > 0.0 && counts[p] == 0) {
      throw ConfigError("split ratio " + std::to_string(ratios[p]) + " leaves a partition without frames in a cell");
    }
  }

  std::vector<std::size_t> order(n_regimes);
  for (std::size_t i = 0; i < n_regimes; ++i) order[i] = i;
  Rng rng(derive_seed({seed, 0x5B1Du}));
  for (std::size_t i = n_regimes; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<int> part(n_regimes);
  for (std::size_t i = 0; i < n_regimes; ++i) part[order[i]] = i < counts[0] ? 0 : (i < counts[0] + counts[1] ? 1 : 2);

  Split out;
  for (std::size_t ei = 0; ei < store.elements.size(); ++ei) {
    const auto& e = store.elements[ei];
    for (std::size_t f = 0; f < e.frame_count; ++f) {
      const std::size_t regime = static_cast<std::size_t>(e.acquisition_id) * channel::kSubAcquisitions +
                                 static_cast<std::size_t>(e.sub_acquisition(f));
      FrameRef ref{static_cast<std::uint32_t>(ei), static_cast<std::uint32_t>(f)};
      switch (part[regime]) {
        case 0:
          out.train.push_back(ref);
          break;
        case 1:
          out.val.push_back(ref);
          break;
        default:
          out.test.push_back(ref);
          break;
      }
    }
  }
  return out;
}

void LabeledSet::append(std::span<const float> interleaved, int label, float snr) {
  const std::size_t base = inputs.size();
  inputs.resize(base + kValuesPerFrame);
  for (std::size_t n = 0; n < static_cast<std::size_t>(ofdm::kFrameLength); ++n) {
    inputs[base + n] = interleaved[2 * n];
    inputs[base + ofdm::kFrameLength + n] = interleaved[2 * n + 1];
  }
  labels.push_back(label);
  snr_db.push_back(snr);
}

LabeledSet gather(const DatasetStore& store, std::span<const FrameRef> refs) {
  LabeledSet set;
  set.inputs.reserve(refs.size() * kValuesPerFrame);
  for (const FrameRef& r : refs) {
    const auto& e = store.elements.at(r.element);
    set.append(e.frame(r.frame), static_cast<int>(e.label), e.snr_db);
  }
  return set;
}

LabeledSet collapse_binary(LabeledSet set) {
  for (int& l : set.labels) l = l == 0 ? 0 : 1;
  return set;
}

}  // namespace htcc::dataset
