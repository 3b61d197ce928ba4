#include <doctest.h>

#include <cmath>

#include "htcc/channel/channel.hpp"
#include "htcc/common/error.hpp"
#include "htcc/common/rng.hpp"
#include "htcc/eve/decoder.hpp"

using namespace htcc;
using namespace htcc::ofdm;
using namespace htcc::covert;

namespace {

IqFrame clean_frame(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint8_t> p(kPayloadBits);
  for (auto& b : p) b = static_cast<std::uint8_t>(rng.bit());
  return build_frame(p);
}

double max_diff(const IqFrame& a, const IqFrame& b) {
  double m = 0.0;
  for (int n = 0; n < kFrameLength; ++n) m = std::max(m, std::abs(a.samples[n] - b.samples[n]));
  return m;
}

}  // namespace

TEST_CASE("equalizer inverts a single complex tap") {
  const IqFrame f = clean_frame(1);
  CHECK(max_diff(eve::equalize_phase(f), f) < 1e-9);

  IqFrame rot = f;
  for (auto& x : rot.samples) x *= std::polar(1.0, 0.3);
  CHECK(max_diff(eve::equalize_phase(rot), f) < 1e-9);

  IqFrame half = f;
  for (auto& x : half.samples) x *= 0.5;
  const auto fit = eve::fit_channel(half);
  CHECK(std::abs(fit.a - Complex(0.5, 0.0)) < 1e-12);
  CHECK(max_diff(eve::equalize_phase(half), f) < 1e-9);

  CHECK_THROWS_AS(eve::equalize_phase(IqFrame{}), NumericError);
}

TEST_CASE("equalizer removes IQ imbalance and DC") {
  const IqFrame f = clean_frame(2);
  channel::ImpairmentParams p;
  p.iq_gain_imbalance = 0.05;
  p.iq_phase_imbalance_deg = -3.0;
  p.dc_offset = Complex(0.02, -0.01);
  const IqFrame y = channel::apply_impairments(f, p, 0);
  CHECK(max_diff(eve::equalize_phase(y), f) < 1e-9);
}

TEST_CASE("exhaustive noiseless byte round trips") {
  const IqFrame f = clean_frame(3);
  AttackSpec spec;
  for (int b = 0; b < 256; ++b) {
    const auto byte = static_cast<std::uint8_t>(b);
    CHECK(eve::decode_ht1(eve::equalize_phase(inject_ht1(f, byte)), spec) == byte);
    CHECK(eve::decode_ht2(eve::equalize_phase(inject_ht2(f, byte)), spec) == byte);
    CHECK(eve::decode_ht4(inject_ht4(f, byte), spec) == byte);
  }
  CHECK(eve::decode_ht4(inject_ht4(f, 0x00), spec) == 0x00);
  CHECK(eve::decode_ht4(inject_ht4(f, 0xFF), spec) == 0xFF);
}

TEST_CASE("HT3 round trip over 1000 random patterns") {
  AttackSpec spec;
  spec.kind = AttackKind::ht3;
  spec.dispersion_radius = 0.0;
  spec.evm_distortion_db = -INFINITY;
  Rng rng(77);
  int errors = 0;
  for (int t = 0; t < 1000; ++t) {
    const IqFrame f = clean_frame(1000 + static_cast<std::uint64_t>(t));
    std::vector<std::uint8_t> bits(30);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng.bit());
    const auto got = eve::decode_ht3(eve::equalize_phase(inject_ht3(f, bits, spec, rng.next_u64())), spec);
    for (int i = 0; i < 30; ++i) errors += got[i] != bits[i];
  }
  CHECK(errors == 0);
}

TEST_CASE("HT3 decoding with default jitter is mostly right noiselessly") {
  AttackSpec spec;
  spec.kind = AttackKind::ht3;
  Rng rng(78);
  int errors = 0;
  for (int t = 0; t < 200; ++t) {
    const IqFrame f = clean_frame(5000 + static_cast<std::uint64_t>(t));
    std::vector<std::uint8_t> bits(30);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng.bit());
    const auto got = eve::decode_ht3(eve::equalize_phase(inject_ht3(f, bits, spec, rng.next_u64())), spec);
    for (int i = 0; i < 30; ++i) errors += got[i] != bits[i];
  }
  CHECK(errors < 0.25 * 200 * 30);
}

TEST_CASE("decoders tolerate covert-free and garbage frames") {
  const IqFrame f = clean_frame(4);
  for (auto kind : {AttackKind::ht1, AttackKind::ht2, AttackKind::ht3, AttackKind::ht4}) {
    AttackSpec spec;
    spec.kind = kind;
    CHECK_NOTHROW(eve::decode_bits(f, spec));
    CHECK_NOTHROW(eve::decode_bits(IqFrame{}, spec));
    CHECK(eve::decode_bits(f, spec).size() == static_cast<std::size_t>(spec.bits_per_frame()));
  }
}

TEST_CASE("BER sweep on a small dataset") {
  dataset::GenerationConfig c;
  c.frames_per_element = 30;
  c.acquisitions = 1;
  c.snr_grid = {channel::kNoiseless, 1, 29};
  c.attack.dispersion_radius = 0.0;
  c.attack.evm_distortion_db = -INFINITY;
  const auto store = dataset::generate(c);
  const auto report = eve::sweep_covert_ber(store, c.attack, 2);
  CHECK(report.rows.size() == 4 * 3);
  for (auto kind : {AttackKind::ht1, AttackKind::ht2, AttackKind::ht3, AttackKind::ht4}) {
    const auto* inf = report.find(kind, INFINITY);
    REQUIRE(inf != nullptr);
    CHECK(inf->errors == 0);
    const auto* lo = report.find(kind, 1);
    const auto* hi = report.find(kind, 29);
    REQUIRE(lo != nullptr);
    REQUIRE(hi != nullptr);
    CHECK(hi->ber() <= lo->ber());
    AttackSpec s;
    s.kind = kind;
    CHECK(hi->bits == 30u * static_cast<std::uint64_t>(s.bits_per_frame()));
    CHECK(hi->ber() >= 0.0);
    CHECK(hi->ber() <= 1.0);
  }
  const std::string csv = report.to_csv();
  CHECK(csv.rfind("attack,snr_db,bits,errors,ber\n", 0) == 0);
}
