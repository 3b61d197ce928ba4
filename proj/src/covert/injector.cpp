#include "htcc/covert/injector.hpp"

#include <numbers>
#include <stdexcept>
#include <string>

#include "htcc/common/error.hpp"
#include "htcc/common/rng.hpp"

namespace htcc::covert {

using namespace htcc::ofdm;

std::string_view attack_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::cc_free:
      return "CC_FREE";
    case AttackKind::ht1:
      return "HT1";
    case AttackKind::ht2:
      return "HT2";
    case AttackKind::ht3:
      return "HT3";
    case AttackKind::ht4:
      return "HT4";
  }
  return "?";
}

AttackKind attack_from_name(std::string_view name) {
  for (int i = 0; i < kNumClasses; ++i) {
    const auto k = static_cast<AttackKind>(i);
    if (attack_name(k) == name) return k;
  }
  throw ConfigError("unknown attack kind '" + std::string(name) + "'");
}

void AttackSpec::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
  if (!(envelope_factor > 0.0 && envelope_factor < 1.0)) throw ConfigError("envelope_factor must lie in (0,1)");
  if (dirty_count_per_symbol < 1 || dirty_count_per_symbol > kDataSubcarriers) {
    throw ConfigError("dirty_count_per_symbol must lie in [1,48]");
  }
  if (!(dispersion_radius >= 0.0)) throw ConfigError("dispersion_radius must be >= 0");
  if (!(jitter_sigma_ratio >= 0.0)) throw ConfigError("jitter_sigma_ratio must be >= 0");
  if (!(phase_step_deg > 0.0)) throw ConfigError("phase_step_deg must be > 0");
  if (std::isnan(evm_distortion_db) || evm_distortion_db > 0.0) {
    throw ConfigError("evm_distortion_db must be <= 0 dB or -inf");
  }
}

int AttackSpec::bits_per_frame() const {
  switch (kind) {
    case AttackKind::cc_free:
      return 0;
    case AttackKind::ht3:
      return 2 * dirty_count_per_symbol * kDataSymbols;
    default:
      return 8;
  }
}

const std::array<int, 8>& ht1_subcarriers() {
  static const std::array<int, 8> idx = {-24, -20, -16, -12, -8, -4, 4, 8};
  return idx;
}

CovertMessage CovertMessage::random(std::uint64_t seed) {
  Rng rng(derive_seed({seed, 0x11u}));
  std::array<std::uint8_t, kLength> b{};
  for (auto& x : b) x = static_cast<std::uint8_t>(rng.next_u64() >> 56);
  return CovertMessage(b);
}

int CovertMessage::bit_at(std::size_t stream_index) const {
  const std::size_t i = stream_index % (kLength * 8);
  return (bytes_[i / 8] >> (7 - i % 8)) & 1;
}

std::vector<std::uint8_t> CovertMessage::next_bits(std::size_t n) {
  std::vector<std::uint8_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::uint8_t>(bit_at(cursor_ + i));
  cursor_ = (cursor_ + n) % (kLength * 8);
  return out;
}

std::uint8_t pack_byte(std::span<const std::uint8_t> bits8) {
  std::uint8_t b = 0;
  for (std::size_t i = 0; i < 8; ++i) b = static_cast<std::uint8_t>((b << 1) | (bits8[i] & 1));
  return b;
}

std::array<std::uint8_t, 8> unpack_byte(std::uint8_t byte) {
  std::array<std::uint8_t, 8> bits{};
  for (std::size_t i = 0; i < 8; ++i) bits[i] = static_cast<std::uint8_t>((byte >> (7 - i)) & 1);
  return bits;
}

IqFrame inject_ht1(const IqFrame& frame, std::uint8_t byte, double alpha) {
  if (byte == 0) return frame;
  SubcarrierVector sts = dft64(frame.sts().subspan(0, kFftSize));
  const auto bits = unpack_byte(byte);
  for (std::size_t i = 0; i < 8; ++i) {
    if (bits[i]) sts.at(ht1_subcarriers()[i]) *= alpha;
  }
  IqFrame out = frame;
  write_sts_field(sts, out.field(kStsBegin, kStsEnd));
  return out;
}

IqFrame inject_ht2(const IqFrame& frame, std::uint8_t byte, double phase_step_deg) {
  if (byte == 0) return frame;
  // Rotating every STS bin by the same angle is the same rotation in time.
  const double phi = byte * phase_step_deg * std::numbers::pi / 180.0;
  const Complex rot = std::polar(1.0, phi);
  IqFrame out = frame;
  for (Complex& x : out.field(kStsBegin, kStsEnd)) x *= rot;
  return out;
}

namespace ht3 {

Complex covert_point(Complex cover, int b0, int b1) {
  auto axis = [](double c, int bit) {
    const double dir = bit ? -1.0 : 1.0;
    const double s = c < 0.0 ? -1.0 : 1.0;
    return s * (dir * s > 0.0 ? kOuterLevel : kInnerLevel);
  };
  return {axis(cover.real(), b0), axis(cover.imag(), b1)};
}

std::array<Complex, 4> candidates(Complex received) {
  const Complex cover(received.real() < 0.0 ? -(std::numbers::sqrt2 / 2.0) : (std::numbers::sqrt2 / 2.0),
                      received.imag() < 0.0 ? -(std::numbers::sqrt2 / 2.0) : (std::numbers::sqrt2 / 2.0));
  return {covert_point(cover, 0, 0), covert_point(cover, 0, 1), covert_point(cover, 1, 0),
          covert_point(cover, 1, 1)};
}

std::vector<int> dirty_subcarriers(int count) {
  const auto& data = data_subcarriers();
  return {data.begin(), data.begin() + count};
}

double theta_rad(int dirty_counter, double theta_step_deg) {
  return (dirty_counter % 24) * theta_step_deg * std::numbers::pi / 180.0;
}

}  // namespace ht3

IqFrame inject_ht3(const IqFrame& frame, std::span<const std::uint8_t> bits, const AttackSpec& spec,
                   std::uint64_t rng_seed) {
  const std::size_t expected = static_cast<std::size_t>(2 * spec.dirty_count_per_symbol * kDataSymbols);
  if (bits.size() != expected) {
    throw std::invalid_argument("inject_ht3: expected " + std::to_string(expected) + " covert bits, got " +
                                std::to_string(bits.size()));
  }
  Rng rng(rng_seed);
  const std::vector<int> dirty = ht3::dirty_subcarriers(spec.dirty_count_per_symbol);
  const double sigma = spec.dispersion_radius * spec.jitter_sigma_ratio;
  const double r2 = spec.dispersion_radius * spec.dispersion_radius;
  const bool distort = std::isfinite(spec.evm_distortion_db);
  // Complex Gaussian with E|e|^2 = 10^(EVM/10) relative to unit symbol power.
  const double dist_sigma = distort ? std::sqrt(std::pow(10.0, spec.evm_distortion_db / 10.0) / 2.0) : 0.0;

  IqFrame out = frame;
  int counter = 0;
  for (int s = 0; s < kDataSymbols; ++s) {
    auto sym = out.field(data_symbol_begin(s), data_symbol_begin(s) + kSymbolLength);
    SubcarrierVector v = read_symbol(sym);
    for (std::size_t d = 0; d < dirty.size(); ++d, ++counter) {
      const int k = dirty[d];
      const std::size_t bi = static_cast<std::size_t>(counter) * 2;
      Complex p = ht3::covert_point(v.at(k), bits[bi], bits[bi + 1]);
      if (sigma > 0.0 && r2 > 0.0) {
        Complex j;
        do {
          j = Complex(sigma * rng.normal(), sigma * rng.normal());
        } while (std::norm(j) > r2);
        p += j * std::polar(1.0, ht3::theta_rad(counter, spec.theta_step_deg));
      }
      v.at(k) = p;
    }
    if (distort) {
      for (int k : data_subcarriers()) v.at(k) += Complex(dist_sigma * rng.normal(), dist_sigma * rng.normal());
    }
    write_symbol(v, sym);
  }
  return out;
}

IqFrame inject_ht4(const IqFrame& frame, std::uint8_t byte, double envelope_factor) {
  IqFrame out = frame;
  const auto bits = unpack_byte(byte);
  for (std::size_t seg = 0; seg < 8; ++seg) {
    if (bits[seg]) continue;
    for (Complex& x : out.field(static_cast<int>(seg) * kSymbolLength, static_cast<int>(seg + 1) * kSymbolLength)) {
      x *= envelope_factor;
    }
  }
  return out;
}

Injection inject(const IqFrame& frame, const AttackSpec& spec, CovertMessage& msg, std::uint64_t seed) {
  Injection result{frame, msg.next_bits(static_cast<std::size_t>(spec.bits_per_frame()))};
  const auto& bits = result.leaked_bits;
  switch (spec.kind) {
    case AttackKind::cc_free:
      break;
    case AttackKind::ht1:
      result.frame = inject_ht1(frame, pack_byte(bits), spec.alpha);
      break;
    case AttackKind::ht2:
      result.frame = inject_ht2(frame, pack_byte(bits), spec.phase_step_deg);
      break;
    case AttackKind::ht3:
      result.frame = inject_ht3(frame, bits, spec, seed);
      break;
    case AttackKind::ht4:
      result.frame = inject_ht4(frame, pack_byte(bits), spec.envelope_factor);
      break;
  }
  return result;
}

}  // namespace htcc::covert
