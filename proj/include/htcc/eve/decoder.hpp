#pragma once
// Eavesdropper-side decoders: recover the leaked covert bits from received
// frames, assuming full knowledge of the attack parameters.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "htcc/covert/injector.hpp"
#include "htcc/dataset/dataset.hpp"

namespace htcc::eve {

using covert::AttackKind;
using covert::AttackSpec;
using ofdm::Complex;
using ofdm::IqFrame;

// Fits y = a*x + b*conj(x) + c over the known LTS and SIGNAL fields and
// inverts it on the whole frame. With b = c = 0 this is the plain single-tap
// equalizer; the conjugate term absorbs IQ imbalance and c the DC offset.
// Throws NumericError when the reference fields carry (near) no energy.
IqFrame equalize_phase(const IqFrame& frame);

struct ChannelFit {
  Complex a{1.0, 0.0};
  Complex b{};
  Complex c{};
};
ChannelFit fit_channel(const IqFrame& frame);

std::uint8_t decode_ht1(const IqFrame& equalized, const AttackSpec& spec = {});
std::uint8_t decode_ht2(const IqFrame& equalized, const AttackSpec& spec = {});
std::vector<std::uint8_t> decode_ht3(const IqFrame& equalized, const AttackSpec& spec = {});
// Operates on the received frame before equalization: the envelope keying
// also scales the LTS, which an equalizer would normalize away.
std::uint8_t decode_ht4(const IqFrame& received, const AttackSpec& spec = {});

// Per-segment RMS relative to the clean-frame nominal, over the last 64
// samples of each 80-sample segment.
std::array<double, 8> ht4_segment_ratios(const IqFrame& received);

// Equalizes (falling back to the raw frame if that fails) and decodes.
std::vector<std::uint8_t> decode_bits(const IqFrame& received, const AttackSpec& spec);

struct BerRow {
  AttackKind attack = AttackKind::ht1;
  double snr_db = 0.0;
  std::uint64_t bits = 0;
  std::uint64_t errors = 0;
  double ber() const { return bits ? static_cast<double>(errors) / static_cast<double>(bits) : 0.0; }
};

struct CovertBerReport {
  std::vector<BerRow> rows;  // sorted by (attack, snr)

  const BerRow* find(AttackKind attack, double snr_db) const;
  std::string to_csv() const;
};

// Decodes every infected frame of `store` against its stored ground truth.
CovertBerReport sweep_covert_ber(const dataset::DatasetStore& store, const AttackSpec& spec = {}, int threads = 1);

}  // namespace htcc::eve
