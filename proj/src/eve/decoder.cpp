#include "htcc/eve/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include "htcc/common/error.hpp"
#include "htcc/common/parallel.hpp"

namespace htcc::eve {

using namespace ofdm;

namespace {

const IqFrame& clean_template() {
  static const IqFrame f = [] {
    std::vector<std::uint8_t> zeros(kPayloadBits, 0);
    return build_frame(zeros);
  }();
  return f;
}

// Solves the 3x3 complex system m * x = v by Gaussian elimination with
// partial pivoting.
std::array<Complex, 3> solve3(std::array<std::array<Complex, 3>, 3> m, std::array<Complex, 3> v) {
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    }
    std::swap(m[col], m[piv]);
    std::swap(v[col], v[piv]);
    if (std::abs(m[col][col]) < 1e-12) throw NumericError("equalizer: singular reference fit");
    for (int r = col + 1; r < 3; ++r) {
      const Complex f = m[r][col] / m[col][col];
      for (int c = col; c < 3; ++c) m[r][c] -= f * m[col][c];
      v[r] -= f * v[col];
    }
  }
  std::array<Complex, 3> x{};
  for (int r = 2; r >= 0; --r) {
    Complex acc = v[r];
    for (int c = r + 1; c < 3; ++c) acc -= m[r][c] * x[c];
    x[r] = acc / m[r][r];
  }
  return x;
}

// Averaged DFT of the two full STS periods.
SubcarrierVector sts_spectrum(const IqFrame& f) {
  SubcarrierVector a = dft64(f.sts().subspan(0, kFftSize));
  const SubcarrierVector b = dft64(f.sts().subspan(kFftSize, kFftSize));
  for (int k = -32; k < 32; ++k) a.at(k) = 0.5 * (a.at(k) + b.at(k));
  return a;
}

}  // namespace

ChannelFit fit_channel(const IqFrame& frame) {
  const IqFrame& ref = clean_template();
  std::array<std::array<Complex, 3>, 3> m{};
  std::array<Complex, 3> v{};
  double ref_energy = 0.0;
  double rx_energy = 0.0;
  for (int n = kLtsBegin; n < kSignalEnd; ++n) {
    const Complex x = ref.samples[n];
    const Complex y = frame.samples[n];
    const std::array<Complex, 3> basis = {x, std::conj(x), Complex(1.0, 0.0)};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) m[i][j] += std::conj(basis[i]) * basis[j];
      v[i] += std::conj(basis[i]) * y;
    }
    ref_energy += std::norm(x);
    rx_energy += std::norm(y);
  }
  if (!(rx_energy > 1e-9 * ref_energy)) throw NumericError("equalizer: reference fields carry no energy");
  const auto s = solve3(m, v);
  return {s[0], s[1], s[2]};
}

IqFrame equalize_phase(const IqFrame& frame) {
  const ChannelFit fit = fit_channel(frame);
  const double det = std::norm(fit.a) - std::norm(fit.b);
  if (!(det > 1e-9) || !std::isfinite(det)) throw NumericError("equalizer: channel estimate is not invertible");
  IqFrame out;
  for (int n = 0; n < kFrameLength; ++n) {
    const Complex z = frame.samples[n] - fit.c;
    out.samples[n] = (std::conj(fit.a) * z - fit.b * std::conj(z)) / det;
  }
  return out;
}

std::uint8_t decode_ht1(const IqFrame& equalized, const AttackSpec& spec) {
  const SubcarrierVector sts = sts_spectrum(equalized);
  // Non-zero STS bins the Trojan never touches.
  const std::array<int, 4> reference_bins = {12, 16, 20, 24};
  double ref = 0.0;
  for (int k : reference_bins) ref += std::abs(sts.at(k));
  ref /= reference_bins.size();
  const double threshold = 0.5 * (1.0 + spec.alpha) * ref;
  std::array<std::uint8_t, 8> bits{};
  for (std::size_t i = 0; i < 8; ++i) bits[i] = std::abs(sts.at(covert::ht1_subcarriers()[i])) < threshold ? 1 : 0;
  return covert::pack_byte(bits);
}

std::uint8_t decode_ht2(const IqFrame& equalized, const AttackSpec& spec) {
  const SubcarrierVector sts = sts_spectrum(equalized);
  const SubcarrierVector nominal = build_sts_freq();
  Complex acc{};
  for (int k : sts_nonzero_subcarriers()) acc += sts.at(k) * std::conj(nominal.at(k));
  double deg = std::arg(acc) * 180.0 / std::numbers::pi;
  if (deg < 0.0) deg += 360.0;
  const long steps = std::lround(deg / spec.phase_step_deg);
  const long period = std::lround(360.0 / spec.phase_step_deg);
  return static_cast<std::uint8_t>(((steps % period) + period) % period);
}

std::vector<std::uint8_t> decode_ht3(const IqFrame& equalized, const AttackSpec& spec) {
  const std::vector<int> dirty = covert::ht3::dirty_subcarriers(spec.dirty_count_per_symbol);
  std::vector<std::uint8_t> bits;
  bits.reserve(dirty.size() * kDataSymbols * 2);
  for (int s = 0; s < kDataSymbols; ++s) {
    const SubcarrierVector v =
        read_symbol(equalized.field(data_symbol_begin(s), data_symbol_begin(s) + kSymbolLength));
    for (int k : dirty) {
      // The jitter rotation by theta_k preserves the jitter's radial law, so
      // de-rotating it does not change which candidate is nearest.
      const Complex y = v.at(k);
      const auto cands = covert::ht3::candidates(y);
      std::size_t best = 0;
      for (std::size_t c = 1; c < cands.size(); ++c) {
        if (std::norm(y - cands[c]) < std::norm(y - cands[best])) best = c;
      }
      bits.push_back(static_cast<std::uint8_t>(best >> 1));
      bits.push_back(static_cast<std::uint8_t>(best & 1));
    }
  }
  return bits;
}

std::array<double, 8> ht4_segment_ratios(const IqFrame& received) {
  static const std::array<double, 8> nominal = [] {
    std::array<double, 8> e{};
    for (int seg = 0; seg < 8; ++seg) {
      e[seg] = energy(clean_template().field(seg * kSymbolLength + kCyclicPrefix, (seg + 1) * kSymbolLength));
    }
    return e;
  }();
  std::array<double, 8> r{};
  for (int seg = 0; seg < 8; ++seg) {
    r[seg] = std::sqrt(energy(received.field(seg * kSymbolLength + kCyclicPrefix, (seg + 1) * kSymbolLength)) /
                       nominal[seg]);
  }
  return r;
}

std::uint8_t decode_ht4(const IqFrame& received, const AttackSpec& spec) {
  const auto r = ht4_segment_ratios(received);
  const double f = spec.envelope_factor;

  // Best two-level split of the sorted ratios (1-D k-means, exhaustive).
  std::array<double, 8> sorted = r;
  std::sort(sorted.begin(), sorted.end());
  double best_cost = INFINITY;
  double lo = 0.0, hi = 0.0;
  for (int cut = 1; cut < 8; ++cut) {
    double m0 = 0.0, m1 = 0.0;
    for (int i = 0; i < cut; ++i) m0 += sorted[i];
    for (int i = cut; i < 8; ++i) m1 += sorted[i];
    m0 /= cut;
    m1 /= 8 - cut;
    double cost = 0.0;
    for (int i = 0; i < 8; ++i) cost += std::pow(sorted[i] - (i < cut ? m0 : m1), 2);
    if (cost < best_cost) {
      best_cost = cost;
      lo = m0;
      hi = m1;
    }
  }

  std::array<std::uint8_t, 8> bits{};
  if (hi - lo < 0.5 * (1.0 - f)) {
    // One level only: absolute power against the nominal decides.
    double mean = 0.0;
    for (double x : r) mean += x;
    mean /= 8.0;
    bits.fill(mean > 0.5 * (1.0 + f) ? 1 : 0);
  } else {
    const double threshold = 0.5 * (lo + hi);
    for (int i = 0; i < 8; ++i) bits[i] = r[i] >= threshold ? 1 : 0;
  }
  return covert::pack_byte(bits);
}

std::vector<std::uint8_t> decode_bits(const IqFrame& received, const AttackSpec& spec) {
  if (spec.kind == AttackKind::ht4) {
    const auto b = covert::unpack_byte(decode_ht4(received, spec));
    return {b.begin(), b.end()};
  }
  if (spec.kind == AttackKind::cc_free) return {};
  IqFrame eq = received;
  try {
    eq = equalize_phase(received);
  } catch (const NumericError&) {
  }
  if (spec.kind == AttackKind::ht3) return decode_ht3(eq, spec);
  const std::uint8_t byte = spec.kind == AttackKind::ht1 ? decode_ht1(eq, spec) : decode_ht2(eq, spec);
  const auto b = covert::unpack_byte(byte);
  return {b.begin(), b.end()};
}

const BerRow* CovertBerReport::find(AttackKind attack, double snr_db) const {
  for (const auto& r : rows) {
    if (r.attack == attack && (r.snr_db == snr_db || std::abs(r.snr_db - snr_db) < 1e-6)) return &r;
  }
  return nullptr;
}

std::string CovertBerReport::to_csv() const {
  std::ostringstream os;
  os << "attack,snr_db,bits,errors,ber\n";
  for (const auto& r : rows) {
    os << covert::attack_name(r.attack) << ',' << r.snr_db << ',' << r.bits << ',' << r.errors << ',' << r.ber()
       << '\n';
  }
  return os.str();
}

CovertBerReport sweep_covert_ber(const dataset::DatasetStore& store, const AttackSpec& spec, int threads) {
  std::map<std::pair<int, double>, BerRow> acc;
  std::mutex mu;
  run_parallel(store.elements.size(), threads, [&](std::size_t ei) {
    const auto& e = store.elements[ei];
    if (e.label == AttackKind::cc_free) return;
    AttackSpec s = spec;
    s.kind = e.label;
    const std::size_t per_frame = static_cast<std::size_t>(s.bits_per_frame());
    if (e.leaked_bits.size() != per_frame * e.frame_count) throw FormatError("element lacks ground-truth covert bits");
    std::uint64_t errors = 0;
    for (std::size_t f = 0; f < e.frame_count; ++f) {
      const auto bits = decode_bits(e.frame_iq(f), s);
      for (std::size_t i = 0; i < per_frame; ++i) errors += bits[i] != e.leaked_bits[f * per_frame + i];
    }
    std::lock_guard lock(mu);
    BerRow& row = acc[{static_cast<int>(e.label), e.snr_db}];
    row.attack = e.label;
    row.snr_db = e.snr_db;
    row.bits += per_frame * e.frame_count;
    row.errors += errors;
  });

  CovertBerReport report;
  for (auto& [key, row] : acc) report.rows.push_back(row);
  return report;
}

}  // namespace htcc::eve
