#include <doctest.h>

#include <cmath>
#include <numbers>

#include "htcc/channel/channel.hpp"
#include "htcc/common/rng.hpp"

using namespace htcc;
using namespace htcc::ofdm;
using namespace htcc::channel;

namespace {

IqFrame clean_frame(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint8_t> p(kPayloadBits);
  for (auto& b : p) b = static_cast<std::uint8_t>(rng.bit());
  return build_frame(p);
}

}  // namespace

TEST_CASE("noiseless AWGN is the identity") {
  const IqFrame f = clean_frame(1);
  CHECK(apply_awgn(f, kNoiseless, 5) == f);
  CHECK(apply_awgn(f, 10.0, 5) == apply_awgn(f, 10.0, 5));
  CHECK_FALSE(apply_awgn(f, 10.0, 5) == apply_awgn(f, 10.0, 6));
}

TEST_CASE("AWGN power tracks the SNR target") {
  const IqFrame f = clean_frame(2);
  const double p = mean_power(f);
  for (double snr : {0.0, 1.0, 5.0, 9.0, 13.0, 17.0, 21.0, 25.0, 29.0}) {
    double noise = 0.0;
    const int frames = 10000;
    for (int i = 0; i < frames; ++i) {
      const IqFrame y = apply_awgn(f, snr, derive_seed({7, static_cast<std::uint64_t>(i)}));
      for (int n = 0; n < kFrameLength; ++n) noise += std::norm(y.samples[n] - f.samples[n]);
    }
    const double ratio = noise / frames / kFrameLength / p;
    CAPTURE(snr);
    if (snr == 0.0) {
      CHECK(ratio >= 0.97);
      CHECK(ratio <= 1.03);
    }
    CHECK(std::abs(-10.0 * std::log10(ratio) - snr) < 0.3);
  }
}

TEST_CASE("AWGN reference power override") {
  const IqFrame f = clean_frame(3);
  double noise = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const IqFrame y = apply_awgn(f, 0.0, static_cast<std::uint64_t>(i), 4.0);
    for (int n = 0; n < kFrameLength; ++n) noise += std::norm(y.samples[n] - f.samples[n]);
  }
  CHECK(noise / 2000 / kFrameLength == doctest::Approx(4.0).epsilon(0.03));
}

TEST_CASE("noise is uncorrelated across seeds") {
  const IqFrame zero{};
  IqFrame ref = zero;
  for (auto& x : ref.samples) x = 1.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const auto a = apply_awgn(ref, 0.0, 2 * i + 1).samples[17] - 1.0;
    const auto b = apply_awgn(ref, 0.0, 2 * i + 2).samples[17] - 1.0;
    sxy += a.real() * b.real();
    sxx += a.real() * a.real();
    syy += b.real() * b.real();
  }
  CHECK(std::abs(sxy / std::sqrt(sxx * syy)) < 0.02);
}

TEST_CASE("impairments: zero params are the identity") {
  const IqFrame f = clean_frame(4);
  ImpairmentParams p;
  CHECK(p.is_identity());
  CHECK(apply_impairments(f, p, 9) == f);
}

TEST_CASE("impairments: individual stages") {
  const IqFrame f = clean_frame(5);
  ImpairmentParams cfo;
  cfo.cfo_rad_per_sample = std::numbers::pi;
  const IqFrame c = apply_impairments(f, cfo, 0);
  for (int n = 0; n < kFrameLength; ++n) {
    CHECK(std::abs(c.samples[n] - f.samples[n] * std::polar(1.0, std::numbers::pi * n)) < 1e-12);
  }
  CHECK(std::abs(std::abs(c.samples[2]) - std::abs(f.samples[2])) < 1e-15);

  ImpairmentParams dc;
  dc.dc_offset = Complex(0.1, 0.0);
  const IqFrame d = apply_impairments(f, dc, 0);
  double mi0 = 0.0, mi1 = 0.0;
  for (int n = 0; n < kFrameLength; ++n) {
    mi0 += f.samples[n].real();
    mi1 += d.samples[n].real();
    CHECK(d.samples[n].imag() == f.samples[n].imag());
  }
  CHECK((mi1 - mi0) / kFrameLength == doctest::Approx(0.1).epsilon(1e-12));

  ImpairmentParams iq;
  iq.iq_gain_imbalance = 0.05;
  iq.iq_phase_imbalance_deg = 3.0;
  const IqFrame q = apply_impairments(f, iq, 0);
  const double phi = 3.0 * std::numbers::pi / 180.0;
  for (int n = 0; n < kFrameLength; ++n) {
    const double i = f.samples[n].real(), qq = f.samples[n].imag();
    CHECK(q.samples[n].real() == i);
    CHECK(std::abs(q.samples[n].imag() - 1.05 * (qq * std::cos(phi) - i * std::sin(phi))) < 1e-15);
  }

  ImpairmentParams pn;
  pn.phase_noise_std = 1e-3;
  const IqFrame r = apply_impairments(f, pn, 1);
  CHECK(r == apply_impairments(f, pn, 1));
  for (int n = 0; n < kFrameLength; ++n) CHECK(std::abs(std::abs(r.samples[n]) - std::abs(f.samples[n])) < 1e-12);
}

TEST_CASE("acquisition impairment draws") {
  const auto a = draw_acquisition_impairments(1, 0);
  CHECK(a == draw_acquisition_impairments(1, 0));
  CHECK_FALSE(a == draw_acquisition_impairments(1, 1));
  CHECK_FALSE(a == draw_acquisition_impairments(2, 0));
  ImpairmentRanges r;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto p = draw_acquisition_impairments(3, i, r);
    CHECK(std::abs(p.cfo_rad_per_sample) <= r.cfo_max);
    CHECK(std::abs(p.dc_offset.real()) <= r.dc_max);
    CHECK(std::abs(p.iq_gain_imbalance) <= r.gain_max);
    CHECK(std::abs(p.iq_phase_imbalance_deg) <= r.phase_deg_max);
    CHECK(p.phase_noise_std == r.phase_noise_std);
  }
  CHECK(kSubAcquisitions == 10);
}
