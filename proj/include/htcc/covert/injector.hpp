#pragma once
// Hardware-Trojan covert channels embedded into clean OFDM frames.
//
//   HT1  STS amplitude keying: 8 corrupted STS bins scaled by alpha per '1'.
//   HT2  STS phase keying: all STS bins rotated CCW by byte * 360/256 deg.
//   HT3  "dirty" constellations: 5 DATA subcarriers per symbol pushed to the
//        neighbouring 64-QAM point in the covert quadrant, jittered, plus
//        cover distortion on every data subcarrier.
//   HT4  envelope keying: 80-sample segment i scaled by 0.8 for a '0' bit.
//
// Bits are consumed MSB-first within each message byte.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "htcc/ofdm/phy.hpp"

namespace htcc::covert {

using ofdm::Complex;
using ofdm::IqFrame;

enum class AttackKind : std::uint8_t { cc_free = 0, ht1 = 1, ht2 = 2, ht3 = 3, ht4 = 4 };

inline constexpr int kNumClasses = 5;

std::string_view attack_name(AttackKind kind);
AttackKind attack_from_name(std::string_view name);

struct AttackSpec {
  AttackKind kind = AttackKind::cc_free;
  double alpha = 0.9;
  double phase_step_deg = 360.0 / 256.0;
  int dirty_count_per_symbol = 5;
  double dispersion_radius = 0.21821789023599236;  // sqrt(2/42)
  // Per-axis std of the HT3 jitter as a fraction of the dispersion radius.
  double jitter_sigma_ratio = 0.5;
  double theta_step_deg = 15.0;
  double envelope_factor = 0.8;
  // -inf disables the HT3 cover distortion.
  double evm_distortion_db = -25.0;

  // Throws ConfigError when a field is outside its valid range.
  void validate() const;
  int bits_per_frame() const;
};

// Corrupted STS bins used by HT1, ascending; bit i of the byte drives entry i.
const std::array<int, 8>& ht1_subcarriers();

// Repeating 11-byte secret; next_bits() walks it MSB-first and wraps.
class CovertMessage {
 public:
  static constexpr std::size_t kLength = 11;

  explicit CovertMessage(std::array<std::uint8_t, kLength> bytes, std::size_t cursor = 0)
      : bytes_(bytes), cursor_(cursor % (kLength * 8)) {}
  static CovertMessage random(std::uint64_t seed);

  int bit_at(std::size_t stream_index) const;
  std::vector<std::uint8_t> next_bits(std::size_t n);

  std::size_t cursor() const { return cursor_; }
  const std::array<std::uint8_t, kLength>& bytes() const { return bytes_; }

 private:
  std::array<std::uint8_t, kLength> bytes_;
  std::size_t cursor_;
};

std::uint8_t pack_byte(std::span<const std::uint8_t> bits8);
std::array<std::uint8_t, 8> unpack_byte(std::uint8_t byte);

IqFrame inject_ht1(const IqFrame& frame, std::uint8_t byte, double alpha = 0.9);
IqFrame inject_ht2(const IqFrame& frame, std::uint8_t byte, double phase_step_deg = 360.0 / 256.0);
// `bits` must hold 2 * dirty_count_per_symbol * 3 values (30 by default);
// std::invalid_argument otherwise.
IqFrame inject_ht3(const IqFrame& frame, std::span<const std::uint8_t> bits, const AttackSpec& spec,
                   std::uint64_t rng_seed);
IqFrame inject_ht4(const IqFrame& frame, std::uint8_t byte, double envelope_factor = 0.8);

struct Injection {
  IqFrame frame;
  std::vector<std::uint8_t> leaked_bits;
};

// Dispatches on spec.kind, consuming bits_per_frame() bits from `msg`.
Injection inject(const IqFrame& frame, const AttackSpec& spec, CovertMessage& msg, std::uint64_t seed);

// HT3 geometry shared with the eavesdropper's decoder.
namespace ht3 {

// 64-QAM levels bracketing the QPSK coordinate 1/sqrt(2).
inline const double kInnerLevel = 3.0 / std::sqrt(42.0);
inline const double kOuterLevel = 5.0 / std::sqrt(42.0);

// The 64-QAM point adjacent to `cover` in the direction of the covert
// quadrant selected by (b0, b1) under the QPSK Gray map.
Complex covert_point(Complex cover, int b0, int b1);

// Four covert candidates in the quadrant of `received`, ordered by (b0, b1)
// = 00, 01, 10, 11 relative to the cover point of that quadrant.
std::array<Complex, 4> candidates(Complex received);

// Dirty data subcarriers of one DATA symbol (lowest indices).
std::vector<int> dirty_subcarriers(int count);

double theta_rad(int dirty_counter, double theta_step_deg);

}  // namespace ht3

}  // namespace htcc::covert
