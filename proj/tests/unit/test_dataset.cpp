#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cstdio>
#include <filesystem>
#include <set>

#include "htcc/common/byte_io.hpp"
#include "htcc/common/error.hpp"
#include "htcc/dataset/dataset.hpp"
#include "htcc/eve/decoder.hpp"

using namespace htcc;
using namespace htcc::dataset;

namespace {

GenerationConfig tiny_config() {
  GenerationConfig c;
  c.frames_per_element = 20;
  c.acquisitions = 2;
  c.snr_grid = {5, 29};
  c.master_seed = 42;
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("htcc_test_" + name)).string();
}

}  // namespace

TEST_CASE("config validation") {
  GenerationConfig c = tiny_config();
  CHECK_NOTHROW(c.validate());
  c.frames_per_element = 25;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config();
  c.snr_grid.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config();
  c.attack.alpha = 2.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(GenerationConfig::full_scale().frames_per_element == 2000);
  CHECK(GenerationConfig::desk_scale().frames_per_element == 200);
}

TEST_CASE("config survives its JSON manifest") {
  GenerationConfig c = tiny_config();
  c.snr_grid.push_back(channel::kNoiseless);
  c.attack.evm_distortion_db = -INFINITY;
  c.master_seed = 0xFFFFFFFFFFFFFFF0ull;
  const GenerationConfig back = GenerationConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.master_seed == c.master_seed);
  CHECK(std::isinf(back.snr_grid.back()));
  CHECK_THROWS_AS(GenerationConfig::from_json("{not json"), FormatError);
}

TEST_CASE("generation structure and determinism") {
  const GenerationConfig c = tiny_config();
  const DatasetStore a = generate(c);
  CHECK(a.elements.size() == 5 * 2 * 2);
  CHECK(a.frame_count() == 5 * 2 * 2 * 20);
  for (const auto& e : a.elements) {
    CHECK(e.frame_count == 20);
    CHECK(e.frames.size() == 20u * 1280u);
    covert::AttackSpec s;
    s.kind = e.label;
    CHECK(e.leaked_bits.size() == 20u * static_cast<std::size_t>(s.bits_per_frame()));
    for (float v : e.frames) CHECK(std::isfinite(v));
    CHECK(e.sub_acquisition(0) == 0);
    CHECK(e.sub_acquisition(19) == 9);
  }
  CHECK(a == generate(c));

  GenerationConfig threaded = c;
  threaded.threads = 4;
  CHECK(generate(threaded).elements == a.elements);

  GenerationConfig other = c;
  other.master_seed = 43;
  CHECK_FALSE(generate(other).elements == a.elements);

  // Full/desk structural counts follow from the defaults.
  const auto desk = GenerationConfig::desk_scale();
  CHECK(desk.classes.size() * desk.snr_grid.size() * desk.acquisitions * desk.frames_per_element == 16000);
  const auto full = GenerationConfig::full_scale();
  CHECK(full.classes.size() * full.snr_grid.size() * full.acquisitions == 80);
  CHECK(full.classes.size() * full.snr_grid.size() * full.acquisitions * full.frames_per_element == 160000);
}

TEST_CASE("leaked bits follow the repeating message") {
  const GenerationConfig c = tiny_config();
  const DatasetStore s = generate(c);
  const auto msg = covert::CovertMessage::random(c.master_seed);
  CHECK(msg.bytes().size() == 11);
  for (const auto& e : s.elements) {
    for (std::size_t i = 0; i < e.leaked_bits.size(); ++i) CHECK(e.leaked_bits[i] == msg.bit_at(i));
  }
}

TEST_CASE("noiseless regeneration decodes to the recorded bits") {
  GenerationConfig c = tiny_config();
  c.snr_grid = {channel::kNoiseless};
  c.impairments = false;
  const DatasetStore s = generate(c);
  for (const auto& e : s.elements) {
    if (e.label == covert::AttackKind::cc_free || e.label == covert::AttackKind::ht3) continue;
    covert::AttackSpec spec;
    spec.kind = e.label;
    for (std::size_t f = 0; f < e.frame_count; ++f) {
      const FrameRecord rec = synthesize_frame(c, e.label, 0, e.acquisition_id, f);
      const auto bits = eve::decode_bits(rec.received, spec);
      CHECK(std::equal(bits.begin(), bits.end(), e.leaked_bits.begin() + static_cast<long>(f * 8)));
    }
  }
}

TEST_CASE("sub-acquisitions carry distinct impairment regimes") {
  GenerationConfig c = tiny_config();
  c.snr_grid = {channel::kNoiseless};
  c.classes = {covert::AttackKind::cc_free};
  c.acquisitions = 1;
  // With the CFO dominating, the regime shows up as the LTS phase drift.
  c.ranges = {0.05, 0.0, 0.0, 0.0, 0.0};
  std::set<long> regimes;
  for (std::size_t f = 0; f < 20; ++f) {
    const auto rec = synthesize_frame(c, covert::AttackKind::cc_free, 0, 0, f);
    const auto drift = rec.received.samples[256] / rec.clean.samples[256] /
                       (rec.received.samples[192] / rec.clean.samples[192]);
    regimes.insert(std::lround(std::arg(drift) * 1e6));
  }
  CHECK(regimes.size() == 10);
}

TEST_CASE("HTCC1 round trip and corruption") {
  const DatasetStore s = generate(tiny_config());
  const auto bytes = serialize(s);
  CHECK(bytes[0] == 0x48);
  CHECK(bytes[4] == 0x01);
  CHECK(deserialize(bytes) == s);

  const std::string path = temp_path("roundtrip.htcc");
  write(s, path);
  CHECK(read(path) == s);
  std::filesystem::remove(path);

  auto bad_magic = bytes;
  bad_magic[1] = 'X';
  CHECK_THROWS_AS(deserialize(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  CHECK_THROWS_AS(deserialize(bad_version), FormatError);
  auto flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x10;
  CHECK_THROWS_AS(deserialize(flipped), FormatError);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  CHECK_THROWS_AS(deserialize(truncated), FormatError);

  DatasetStore empty;
  empty.manifest = "{}";
  CHECK(deserialize(serialize(empty)) == empty);
  CHECK_THROWS_AS(read(temp_path("does_not_exist")), IoError);
}

TEST_CASE("raw ingestion") {
  const DatasetStore s = generate(tiny_config());
  const DatasetElement& e = s.elements[3];
  const std::size_t n_frames = e.frame_count;

  const std::string il = temp_path("HT2_snr13.5_il.bin");
  {
    ByteWriter w;
    for (float v : e.frames) w.f32(v);
    write_file(il, w.buffer());
  }
  RawLayout layout;
  const DatasetStore a = ingest_raw(il, layout);
  REQUIRE(a.elements.size() == 1);
  CHECK(a.elements[0].frame_count == n_frames);
  CHECK(a.elements[0].frames == e.frames);
  CHECK(a.elements[0].label == covert::AttackKind::ht2);
  CHECK(a.elements[0].snr_db == 13.5f);

  const std::string pl = temp_path("HT2_snr13.5_planar_be.bin");
  {
    std::vector<std::uint8_t> buf;
    auto put_be = [&](float v) {
      const auto u = std::bit_cast<std::uint32_t>(v);
      for (int b = 3; b >= 0; --b) buf.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
    };
    for (std::size_t f = 0; f < n_frames; ++f) {
      const auto fr = e.frame(f);
      for (int n = 0; n < 640; ++n) put_be(fr[2 * n]);
      for (int n = 0; n < 640; ++n) put_be(fr[2 * n + 1]);
    }
    write_file(pl, buf);
  }
  layout.interleave = RawLayout::Interleave::planar;
  layout.big_endian = true;
  layout.frames_per_file = static_cast<int>(n_frames);
  CHECK(ingest_raw(pl, layout).elements[0].frames == e.frames);
  layout.frames_per_file = 3;
  CHECK_THROWS_AS(ingest_raw(pl, layout), FormatError);

  const std::string i16 = temp_path("CC_FREE_snr1.bin");
  {
    ByteWriter w;
    for (int i = 0; i < 1280; ++i) w.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(i - 640)));
    write_file(i16, w.buffer());
  }
  RawLayout l16;
  l16.encoding = parse_encoding("i16");
  const auto c16 = ingest_raw(i16, l16);
  CHECK(c16.elements[0].frames[0] == doctest::Approx(-640.0 / 32768.0));

  const std::string odd = temp_path("HT1_snr5.bin");
  {
    ByteWriter w;
    for (int i = 0; i < 1281; ++i) w.f32(0.0f);
    write_file(odd, w.buffer());
  }
  CHECK_THROWS_AS(ingest_raw(odd, RawLayout{}), FormatError);
  CHECK_THROWS_AS(parse_encoding("f64"), ConfigError);

  const std::string unlabeled = temp_path("capture.bin");
  std::filesystem::copy_file(il, unlabeled, std::filesystem::copy_options::overwrite_existing);
  CHECK_THROWS_AS(ingest_raw(unlabeled, RawLayout{}), ConfigError);
  for (const auto& p : {il, pl, i16, odd, unlabeled}) std::filesystem::remove(p);
}

TEST_CASE("split keeps regimes whole and is deterministic") {
  GenerationConfig c = tiny_config();
  c.frames_per_element = 200;
  c.snr_grid = {9};
  c.classes = {covert::AttackKind::cc_free, covert::AttackKind::ht4};
  const DatasetStore s = generate(c);
  const Split a = split(s, {0.7, 0.15, 0.15}, 1);
  CHECK(a.train.size() + a.val.size() + a.test.size() == s.frame_count());

  // Per (class, SNR) cell: 400 frames -> 280 / 60 / 60.
  for (auto label : c.classes) {
    std::array<std::size_t, 3> n{};
    const std::array<const std::vector<FrameRef>*, 3> parts = {&a.train, &a.val, &a.test};
    for (int p = 0; p < 3; ++p) {
      for (const auto& r : *parts[p]) n[p] += s.elements[r.element].label == label;
    }
    CHECK(n[0] == 280);
    CHECK(n[1] == 60);
    CHECK(n[2] == 60);
  }

  auto regime = [&](const FrameRef& r) {
    const auto& e = s.elements[r.element];
    return e.acquisition_id * 10 + e.sub_acquisition(r.frame);
  };
  std::set<int> train_regimes, test_regimes;
  for (const auto& r : a.train) train_regimes.insert(regime(r));
  for (const auto& r : a.test) test_regimes.insert(regime(r));
  for (int r : test_regimes) CHECK(train_regimes.count(r) == 0);

  const Split b = split(s, {0.7, 0.15, 0.15}, 1);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  const Split other = split(s, {0.7, 0.15, 0.15}, 2);
  CHECK_FALSE(other.train == a.train);

  CHECK_THROWS_AS(split(s, {0.7, 0.2, 0.2}, 1), ConfigError);
  CHECK_THROWS_AS(split(s, {0.98, 0.01, 0.01}, 1), ConfigError);
}

TEST_CASE("gather converts to channels-first and collapses labels") {
  const DatasetStore s = generate(tiny_config());
  std::vector<FrameRef> refs = {{0, 0}, {static_cast<std::uint32_t>(s.elements.size() - 1), 3}};
  const LabeledSet set = gather(s, refs);
  CHECK(set.size() == 2);
  const auto& e = s.elements.back();
  CHECK(set.input(1)[0] == e.frame(3)[0]);
  CHECK(set.input(1)[640] == e.frame(3)[1]);
  CHECK(set.input(1)[639] == e.frame(3)[1278]);
  CHECK(set.labels[1] == static_cast<int>(e.label));
  const LabeledSet bin = collapse_binary(set);
  CHECK(bin.labels[0] == 0);
  CHECK(bin.labels[1] == 1);
}
