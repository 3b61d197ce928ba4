#include "htcc/channel/channel.hpp"

#include <cmath>
#include <numbers>

#include "htcc/common/rng.hpp"

namespace htcc::channel {

bool ImpairmentParams::is_identity() const {
  return cfo_rad_per_sample == 0.0 && dc_offset == Complex{} && iq_gain_imbalance == 0.0 &&
         iq_phase_imbalance_deg == 0.0 && phase_noise_std == 0.0;
}

double mean_power(const IqFrame& frame) { return ofdm::energy(frame.samples) / ofdm::kFrameLength; }

IqFrame apply_awgn(const IqFrame& frame, double snr_db, std::uint64_t seed, double reference_power) {
  if (std::isinf(snr_db) && snr_db > 0.0) return frame;
  const double p = reference_power > 0.0 ? reference_power : mean_power(frame);
  const double sigma = std::sqrt(p / std::pow(10.0, snr_db / 10.0) / 2.0);
  Rng rng(seed);
  IqFrame out = frame;
  for (Complex& x : out.samples) {
    const double ni = rng.normal();
    const double nq = rng.normal();
    x += Complex(sigma * ni, sigma * nq);
  }
  return out;
}

IqFrame apply_impairments(const IqFrame& frame, const ImpairmentParams& p, std::uint64_t seed) {
  IqFrame out = frame;
  if (p.iq_gain_imbalance != 0.0 || p.iq_phase_imbalance_deg != 0.0) {
    const double g = 1.0 + p.iq_gain_imbalance;
    const double phi = p.iq_phase_imbalance_deg * std::numbers::pi / 180.0;
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    for (Complex& x : out.samples) x = Complex(x.real(), g * (x.imag() * c - x.real() * s));
  }
  if (p.cfo_rad_per_sample != 0.0) {
    for (std::size_t n = 0; n < out.samples.size(); ++n) {
      out.samples[n] *= std::polar(1.0, p.cfo_rad_per_sample * static_cast<double>(n));
    }
  }
  if (p.phase_noise_std != 0.0) {
    Rng rng(seed);
    double phase = 0.0;
    for (Complex& x : out.samples) {
      x *= std::polar(1.0, phase);
      phase += p.phase_noise_std * rng.normal();
    }
  }
  if (p.dc_offset != Complex{}) {
    for (Complex& x : out.samples) x += p.dc_offset;
  }
  return out;
}

ImpairmentParams draw_acquisition_impairments(std::uint64_t master_seed, std::uint64_t acq_index,
                                              const ImpairmentRanges& r) {
  Rng rng(derive_seed({master_seed, 0xA11Cu, acq_index}));
  ImpairmentParams p;
  p.cfo_rad_per_sample = rng.uniform(-r.cfo_max, r.cfo_max);
  const double dc_i = rng.uniform(-r.dc_max, r.dc_max);
  const double dc_q = rng.uniform(-r.dc_max, r.dc_max);
  p.dc_offset = Complex(dc_i, dc_q);
  p.iq_gain_imbalance = rng.uniform(-r.gain_max, r.gain_max);
  p.iq_phase_imbalance_deg = rng.uniform(-r.phase_deg_max, r.phase_deg_max);
  p.phase_noise_std = r.phase_noise_std;
  return p;
}

}  // namespace htcc::channel
