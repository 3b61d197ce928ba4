#pragma once
// Synthetic stand-in for the loopback acquisition chain: per-acquisition
// RF/hardware impairments followed by AWGN at a per-frame SNR.

#include <cstdint>
#include <limits>

#include "htcc/ofdm/phy.hpp"

namespace htcc::channel {

using ofdm::Complex;
using ofdm::IqFrame;

inline constexpr double kNoiseless = std::numeric_limits<double>::infinity();

struct ImpairmentParams {
  double cfo_rad_per_sample = 0.0;
  Complex dc_offset{};
  double iq_gain_imbalance = 0.0;
  double iq_phase_imbalance_deg = 0.0;
  double phase_noise_std = 0.0;  // random-walk step, rad/sample

  bool is_identity() const;
  friend bool operator==(const ImpairmentParams&, const ImpairmentParams&) = default;
};

// Half-widths of the uniform draws (phase noise is used as-is).
struct ImpairmentRanges {
  double cfo_max = 1e-5;
  double dc_max = 0.02;
  double gain_max = 0.05;
  double phase_deg_max = 3.0;
  double phase_noise_std = 2e-5;
};

inline constexpr int kSubAcquisitions = 10;

// Adds circular complex Gaussian noise with variance P / 10^(snr/10), where P
// is the frame's mean sample power, or `reference_power` when positive.
// snr_db = +inf returns the input unchanged.
IqFrame apply_awgn(const IqFrame& frame, double snr_db, std::uint64_t seed, double reference_power = 0.0);

// IQ imbalance, CFO rotation, phase-noise random walk, DC offset, in that
// order. Stages whose parameters are zero are skipped, so all-zero params
// return a bit-identical frame.
IqFrame apply_impairments(const IqFrame& frame, const ImpairmentParams& params, std::uint64_t seed);

ImpairmentParams draw_acquisition_impairments(std::uint64_t master_seed, std::uint64_t acq_index,
                                              const ImpairmentRanges& ranges = {});

double mean_power(const IqFrame& frame);

}  // namespace htcc::channel
