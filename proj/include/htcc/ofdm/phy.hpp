#pragma once
// Simplified IEEE 802.11a/g OFDM PPDU synthesis: 64-point orthonormal DFT,
// Gray QPSK, and a fixed 640-sample frame (STS | LTS | SIGNAL | 3 x DATA).

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace htcc::ofdm {

using Complex = std::complex<double>;

inline constexpr int kFftSize = 64;
inline constexpr int kCyclicPrefix = 16;
inline constexpr int kSymbolLength = kFftSize + kCyclicPrefix;  // 80
inline constexpr int kDataSymbols = 3;
inline constexpr int kDataSubcarriers = 48;
inline constexpr int kPayloadBits = kDataSymbols * kDataSubcarriers * 2;  // 288

// Field boundaries within the 640-sample frame.
inline constexpr int kStsBegin = 0;
inline constexpr int kStsEnd = 160;
inline constexpr int kLtsBegin = 160;
inline constexpr int kLtsEnd = 320;
inline constexpr int kSignalBegin = 320;
inline constexpr int kSignalEnd = 400;
inline constexpr int kDataBegin = 400;
inline constexpr int kFrameLength = 640;

// Nominal STS subcarrier magnitude per axis (stored rounded, as tabulated).
inline constexpr double kStsLevel = 1.472;

// 64 frequency bins indexed by subcarrier k in [-32, 31]. Storage position is
// k + 32, i.e. bins are kept in ascending-frequency order, not FFT order.
class SubcarrierVector {
 public:
  SubcarrierVector() { bins_.fill(Complex{}); }

  Complex& at(int k) { return bins_[static_cast<std::size_t>(k + 32)]; }
  const Complex& at(int k) const { return bins_[static_cast<std::size_t>(k + 32)]; }

  std::array<Complex, kFftSize>& storage() { return bins_; }
  const std::array<Complex, kFftSize>& storage() const { return bins_; }

  friend bool operator==(const SubcarrierVector&, const SubcarrierVector&) = default;

 private:
  std::array<Complex, kFftSize> bins_;
};

using TimeSymbol = std::array<Complex, kFftSize>;

struct IqFrame {
  std::array<Complex, kFrameLength> samples{};

  std::span<Complex> field(int begin, int end) {
    return std::span(samples).subspan(static_cast<std::size_t>(begin), static_cast<std::size_t>(end - begin));
  }
  std::span<const Complex> field(int begin, int end) const {
    return std::span(samples).subspan(static_cast<std::size_t>(begin), static_cast<std::size_t>(end - begin));
  }
  std::span<const Complex> sts() const { return field(kStsBegin, kStsEnd); }
  std::span<const Complex> lts() const { return field(kLtsBegin, kLtsEnd); }
  std::span<const Complex> signal() const { return field(kSignalBegin, kSignalEnd); }
  std::span<const Complex> data() const { return field(kDataBegin, kFrameLength); }

  friend bool operator==(const IqFrame&, const IqFrame&) = default;
};

// Start sample of DATA symbol `s` (cyclic prefix included).
constexpr int data_symbol_begin(int s) { return kDataBegin + s * kSymbolLength; }

SubcarrierVector build_sts_freq();
// Legacy long training sequence, k = -26..26, values +-1, zero at DC.
SubcarrierVector build_lts_freq();

// Orthonormal transforms: both directions scale by 1/sqrt(64).
// Inputs must hold exactly 64 values; std::invalid_argument otherwise.
TimeSymbol idft64(std::span<const Complex> freq_centered);
SubcarrierVector dft64(std::span<const Complex> time);
inline TimeSymbol idft64(const SubcarrierVector& v) { return idft64(std::span<const Complex>(v.storage())); }

// Subcarrier sets in ascending k.
const std::array<int, kDataSubcarriers>& data_subcarriers();
const std::array<int, 4>& pilot_subcarriers();
const std::array<int, 12>& sts_nonzero_subcarriers();

Complex qpsk_map(int b0, int b1);
std::array<int, 2> qpsk_demap(Complex point);

// One OFDM symbol with its 16-sample cyclic prefix written to out[0..80).
void write_symbol(const SubcarrierVector& freq, std::span<Complex> out);
// Frequency content of the 64 post-prefix samples of an 80-sample symbol.
SubcarrierVector read_symbol(std::span<const Complex> symbol80);

// 160-sample STS field from a frequency-domain STS (2.5 periods of the IDFT).
void write_sts_field(const SubcarrierVector& sts_freq, std::span<Complex> out160);
// 160-sample LTS field: 32-sample guard interval + two 64-sample symbols.
void write_lts_field(std::span<Complex> out160);

// Frequency content of the fixed SIGNAL symbol (BPSK header + pilots).
SubcarrierVector signal_freq();
// Frequency content of DATA symbol `s` carrying 96 payload bits.
SubcarrierVector data_symbol_freq(std::span<const std::uint8_t> payload, int s);

// Builds a clean frame. Payload must contain exactly 288 bits (0/1 values);
// std::invalid_argument otherwise.
IqFrame build_frame(std::span<const std::uint8_t> payload);

// Hard-decision QPSK demodulation of the DATA field (no equalization).
std::vector<std::uint8_t> demodulate_payload(const IqFrame& frame);

double energy(std::span<const Complex> samples);

}  // namespace htcc::ofdm
