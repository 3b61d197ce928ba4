#include "htcc/ofdm/phy.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace htcc::ofdm {
namespace {

constexpr double kInvSqrt64 = 0.125;

struct Twiddles {
  std::array<Complex, kFftSize / 2> w{};
  std::array<int, kFftSize> bitrev{};
  Twiddles() {
    for (int i = 0; i < kFftSize / 2; ++i) {
      const double a = -2.0 * std::numbers::pi * i / kFftSize;
      w[static_cast<std::size_t>(i)] = Complex(std::cos(a), std::sin(a));
    }
    for (int i = 0; i < kFftSize; ++i) {
      int r = 0;
      for (int b = 0; b < 6; ++b) r |= ((i >> b) & 1) << (5 - b);
      bitrev[static_cast<std::size_t>(i)] = r;
    }
  }
};

const Twiddles& twiddles() {
  static const Twiddles t;
  return t;
}

// In-place radix-2 DIT FFT on natural-order data; `inverse` conjugates twiddles.
void fft64(std::array<Complex, kFftSize>& a, bool inverse) {
  const Twiddles& t = twiddles();
  for (int i = 0; i < kFftSize; ++i) {
    const int j = t.bitrev[static_cast<std::size_t>(i)];
    if (i < j) std::swap(a[static_cast<std::size_t>(i)], a[static_cast<std::size_t>(j)]);
  }
  for (int len = 2; len <= kFftSize; len <<= 1) {
    const int step = kFftSize / len;
    for (int i = 0; i < kFftSize; i += len) {
      for (int j = 0; j < len / 2; ++j) {
        Complex w = t.w[static_cast<std::size_t>(j * step)];
        if (inverse) w = std::conj(w);
        Complex& u = a[static_cast<std::size_t>(i + j)];
        Complex& v = a[static_cast<std::size_t>(i + j + len / 2)];
        const Complex x = v * w;
        v = u - x;
        u += x;
      }
    }
  }
}

void require_64(std::size_t n, const char* what) {
  if (n != static_cast<std::size_t>(kFftSize)) {
    throw std::invalid_argument(std::string(what) + ": expected 64 values, got " + std::to_string(n));
  }
}

}  // namespace

SubcarrierVector build_sts_freq() {
  SubcarrierVector v;
  const Complex pos(kStsLevel, kStsLevel);
  for (int k : {-24, -16, -4, 12, 16, 20, 24}) v.at(k) = pos;
  for (int k : {-20, -12, -8, 4, 8}) v.at(k) = -pos;
  return v;
}

SubcarrierVector build_lts_freq() {
  static constexpr std::array<int, 53> kLts = {
      1, 1,  -1, -1, 1,  1,  -1, 1,  -1, 1,  1,  1,  1,  1,  1, -1, -1, 1,
      1, -1, 1,  -1, 1,  1,  1,  1,  0,  1,  -1, -1, 1,  1,  -1, 1, -1, 1,
      -1, -1, -1, -1, -1, 1,  1,  -1, -1, 1,  -1, 1,  -1, 1,  1,  1,  1};
  SubcarrierVector v;
  for (int k = -26; k <= 26; ++k) v.at(k) = Complex(kLts[static_cast<std::size_t>(k + 26)], 0.0);
  return v;
}

TimeSymbol idft64(std::span<const Complex> freq) {
  require_64(freq.size(), "idft64");
  std::array<Complex, kFftSize> a{};
  for (int k = -32; k < 32; ++k) a[static_cast<std::size_t>((k + kFftSize) % kFftSize)] = freq[static_cast<std::size_t>(k + 32)];
  fft64(a, true);
  for (auto& x : a) x *= kInvSqrt64;
  return a;
}

SubcarrierVector dft64(std::span<const Complex> time) {
  require_64(time.size(), "dft64");
  std::array<Complex, kFftSize> a{};
  std::copy(time.begin(), time.end(), a.begin());
  fft64(a, false);
  SubcarrierVector v;
  for (int k = -32; k < 32; ++k) v.at(k) = a[static_cast<std::size_t>((k + kFftSize) % kFftSize)] * kInvSqrt64;
  return v;
}

const std::array<int, kDataSubcarriers>& data_subcarriers() {
  static const std::array<int, kDataSubcarriers> idx = [] {
    std::array<int, kDataSubcarriers> out{};
    std::size_t n = 0;
    for (int k = -26; k <= 26; ++k) {
      if (k == 0 || k == -21 || k == -7 || k == 7 || k == 21) continue;
      out[n++] = k;
    }
    return out;
  }();
  return idx;
}

const std::array<int, 4>& pilot_subcarriers() {
  static const std::array<int, 4> idx = {-21, -7, 7, 21};
  return idx;
}

const std::array<int, 12>& sts_nonzero_subcarriers() {
  static const std::array<int, 12> idx = {-24, -20, -16, -12, -8, -4, 4, 8, 12, 16, 20, 24};
  return idx;
}

Complex qpsk_map(int b0, int b1) {
  return Complex(1 - 2 * b0, 1 - 2 * b1) * (std::numbers::sqrt2 / 2.0);
}

std::array<int, 2> qpsk_demap(Complex p) { return {p.real() < 0.0 ? 1 : 0, p.imag() < 0.0 ? 1 : 0}; }

void write_symbol(const SubcarrierVector& freq, std::span<Complex> out) {
  const TimeSymbol t = idft64(freq);
  for (int n = 0; n < kCyclicPrefix; ++n) out[static_cast<std::size_t>(n)] = t[static_cast<std::size_t>(kFftSize - kCyclicPrefix + n)];
  for (int n = 0; n < kFftSize; ++n) out[static_cast<std::size_t>(kCyclicPrefix + n)] = t[static_cast<std::size_t>(n)];
}

SubcarrierVector read_symbol(std::span<const Complex> symbol80) {
  return dft64(symbol80.subspan(kCyclicPrefix, kFftSize));
}

void write_sts_field(const SubcarrierVector& sts_freq, std::span<Complex> out160) {
  const TimeSymbol t = idft64(sts_freq);
  for (std::size_t n = 0; n < 160; ++n) out160[n] = t[n % kFftSize];
}

void write_lts_field(std::span<Complex> out160) {
  const TimeSymbol t = idft64(build_lts_freq());
  for (std::size_t n = 0; n < 32; ++n) out160[n] = t[kFftSize - 32 + n];
  for (std::size_t n = 0; n < 128; ++n) out160[32 + n] = t[n % kFftSize];
}

SubcarrierVector signal_freq() {
  // RATE=1101 (6 Mb/s), reserved, LENGTH=36 (LSB first), even parity, tail.
  static constexpr std::array<std::uint8_t, 24> kHeader = {1, 1, 0, 1, 0, 0, 0, 1, 0, 0, 1, 0,
                                                           0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0};
  SubcarrierVector v;
  const auto& data = data_subcarriers();
  for (std::size_t i = 0; i < data.size(); ++i) v.at(data[i]) = Complex(kHeader[i / 2] ? 1.0 : -1.0, 0.0);
  for (std::size_t i = 0; i < 4; ++i) v.at(pilot_subcarriers()[i]) = Complex(i == 3 ? -1.0 : 1.0, 0.0);
  return v;
}

SubcarrierVector data_symbol_freq(std::span<const std::uint8_t> payload, int s) {
  SubcarrierVector v;
  const auto& data = data_subcarriers();
  const std::size_t base = static_cast<std::size_t>(s) * kDataSubcarriers * 2;
  for (std::size_t i = 0; i < data.size(); ++i) v.at(data[i]) = qpsk_map(payload[base + 2 * i], payload[base + 2 * i + 1]);
  for (std::size_t i = 0; i < 4; ++i) v.at(pilot_subcarriers()[i]) = Complex(i == 3 ? -1.0 : 1.0, 0.0);
  return v;
}

IqFrame build_frame(std::span<const std::uint8_t> payload) {
  if (payload.size() != static_cast<std::size_t>(kPayloadBits)) {
    throw std::invalid_argument("build_frame: payload must hold 288 bits, got " + std::to_string(payload.size()));
  }
  for (std::uint8_t b : payload) {
    if (b > 1) throw std::invalid_argument("build_frame: payload values must be 0 or 1");
  }
  IqFrame f;
  write_sts_field(build_sts_freq(), f.field(kStsBegin, kStsEnd));
  write_lts_field(f.field(kLtsBegin, kLtsEnd));
  write_symbol(signal_freq(), f.field(kSignalBegin, kSignalEnd));
  for (int s = 0; s < kDataSymbols; ++s) {
    write_symbol(data_symbol_freq(payload, s), f.field(data_symbol_begin(s), data_symbol_begin(s) + kSymbolLength));
  }
  return f;
}

std::vector<std::uint8_t> demodulate_payload(const IqFrame& frame) {
  std::vector<std::uint8_t> bits;
  bits.reserve(kPayloadBits);
  for (int s = 0; s < kDataSymbols; ++s) {
    const SubcarrierVector v = read_symbol(frame.field(data_symbol_begin(s), data_symbol_begin(s) + kSymbolLength));
    for (int k : data_subcarriers()) {
      const auto b = qpsk_demap(v.at(k));
      bits.push_back(static_cast<std::uint8_t>(b[0]));
      bits.push_back(static_cast<std::uint8_t>(b[1]));
    }
  }
  return bits;
}

double energy(std::span<const Complex> samples) {
  double e = 0.0;
  for (const Complex& x : samples) e += std::norm(x);
  return e;
}

}  // namespace htcc::ofdm
