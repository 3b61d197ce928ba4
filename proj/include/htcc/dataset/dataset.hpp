#pragma once
// Labeled HT-CC frame corpus: synthesis, the HTCC1 container format,
// raw-capture ingestion and leakage-guarded splitting.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "htcc/channel/channel.hpp"
#include "htcc/covert/injector.hpp"
#include "htcc/ofdm/phy.hpp"

namespace htcc::dataset {

using covert::AttackKind;

inline constexpr int kValuesPerFrame = 2 * ofdm::kFrameLength;  // 1280

struct GenerationConfig {
  std::string scale = "desk";
  int frames_per_element = 200;
  int acquisitions = 2;
  std::vector<double> snr_grid = {1, 5, 9, 13, 17, 21, 25, 29};
  std::vector<AttackKind> classes = {AttackKind::cc_free, AttackKind::ht1, AttackKind::ht2, AttackKind::ht3,
                                     AttackKind::ht4};
  std::uint64_t master_seed = 1;
  covert::AttackSpec attack;  // kind is overwritten per class
  bool impairments = true;
  channel::ImpairmentRanges ranges;
  // Noise referenced to a fixed nominal power instead of each frame's power.
  bool fixed_reference_power = false;
  int threads = 1;

  static GenerationConfig full_scale();
  static GenerationConfig desk_scale();

  void validate() const;
  std::string to_json() const;
  static GenerationConfig from_json(const std::string& text);
};

struct DatasetElement {
  AttackKind label = AttackKind::cc_free;
  float snr_db = 0.0f;
  std::uint16_t acquisition_id = 0;
  std::uint32_t frame_count = 0;
  // frame_count * 1280 floats, interleaved I0,Q0,I1,Q1,...
  std::vector<float> frames;
  // Concatenated per-frame covert bits (empty for CC_FREE).
  std::vector<std::uint8_t> leaked_bits;

  std::span<const float> frame(std::size_t i) const {
    return std::span(frames).subspan(i * kValuesPerFrame, kValuesPerFrame);
  }
  ofdm::IqFrame frame_iq(std::size_t i) const;
  int sub_acquisition(std::size_t frame_index) const;

  friend bool operator==(const DatasetElement&, const DatasetElement&) = default;
};

struct DatasetStore {
  std::string manifest;  // UTF-8 JSON
  std::vector<DatasetElement> elements;

  std::size_t frame_count() const;
  friend bool operator==(const DatasetStore&, const DatasetStore&) = default;
};

// Deterministic per-frame seed.
std::uint64_t frame_seed(std::uint64_t master, AttackKind label, std::size_t snr_index, std::size_t acq,
                         std::size_t frame_index);

struct FrameRecord {
  ofdm::IqFrame clean;     // before injection
  ofdm::IqFrame injected;  // after injection, before the channel
  ofdm::IqFrame received;  // after impairments and AWGN
  std::vector<std::uint8_t> leaked_bits;
};

// Re-synthesizes one frame exactly as generate() does, exposing each stage.
FrameRecord synthesize_frame(const GenerationConfig& cfg, AttackKind label, std::size_t snr_index,
                             std::size_t acq, std::size_t frame_index);

DatasetStore generate(const GenerationConfig& cfg);

// HTCC1 container.
std::vector<std::uint8_t> serialize(const DatasetStore& store);
DatasetStore deserialize(std::span<const std::uint8_t> bytes);
void write(const DatasetStore& store, const std::string& path);
DatasetStore read(const std::string& path);

struct RawLayout {
  enum class Encoding { f32, i16 };
  enum class Interleave { iq_pairs, planar };  // planar: per frame 640 I then 640 Q
  Encoding encoding = Encoding::f32;
  Interleave interleave = Interleave::iq_pairs;
  bool big_endian = false;
  int frames_per_file = 0;  // 0: infer from file size
  double int16_scale = 1.0 / 32768.0;
  // ECMAScript regex applied to the file name; group 1 = label, group 2 = SNR.
  std::string filename_pattern = R"((CC_FREE|HT[1-4])[_-]snr(-?[0-9.]+))";
  std::uint16_t acquisition_id = 0;
};

RawLayout::Encoding parse_encoding(const std::string& s);
DatasetStore ingest_raw(const std::string& path, const RawLayout& layout);

struct FrameRef {
  std::uint32_t element = 0;
  std::uint32_t frame = 0;
  friend bool operator==(const FrameRef&, const FrameRef&) = default;
};

struct Split {
  std::vector<FrameRef> train, val, test;
};

// Stratified by (class, SNR). Sub-acquisition regimes are assigned to one
// partition as a whole, so no impairment regime straddles train and test.
Split split(const DatasetStore& store, std::array<double, 3> ratios, std::uint64_t seed);

// Frames converted to the model's channels-first layout (row I, row Q).
struct LabeledSet {
  std::vector<double> inputs;  // N * 1280
  std::vector<int> labels;
  std::vector<float> snr_db;

  std::size_t size() const { return labels.size(); }
  std::span<const double> input(std::size_t i) const {
    return std::span(inputs).subspan(i * kValuesPerFrame, kValuesPerFrame);
  }
  void append(std::span<const float> interleaved, int label, float snr);
};

LabeledSet gather(const DatasetStore& store, std::span<const FrameRef> refs);
// Maps HT1..HT4 to 1 for the binary task.
LabeledSet collapse_binary(LabeledSet set);

}  // namespace htcc::dataset
