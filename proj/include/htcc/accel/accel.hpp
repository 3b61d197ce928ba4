#pragma once
// Cycle-level model of the detector accelerator.
//
// Stage A (LLDS): weight stationary, one I/Q sample per cycle, every MAC of
// a shift in parallel. Compressed columns go into a FIFO.
// Stage B (conv1, conv2): input stationary, each shift spread over
// `cnn_partition` cycles with 1/partition of the filters (conv1) or input
// channels (conv2) per cycle. Max pooling sits between them.
// Stage C (dense + output): `fc_mac_lanes` MACs per cycle over a
// double-buffered feature map.
//
// Arithmetic is the fixed-point contract of the quantizer, so the logits
// match quantized_forward bit for bit.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "htcc/quant/quantizer.hpp"

namespace htcc::accel {

inline constexpr int kFrameCycles = 640;

struct AccelConfig {
  double clock_hz = 200e6;
  int cnn_partition = 3;
  int fifo_depth = 0;    // values; 0 means 2 x LLDS output length
  int fc_mac_lanes = 0;  // 0 means ceil(dense MACs / 640)
  int line_buffer_columns = 0;  // pooled columns held for conv2; 0 means kernel + 1

  // Fills the defaults and checks partition divisibility. Throws ConfigError.
  AccelConfig resolved(const quant::QuantizedModel& qm) const;
};

struct StageStats {
  std::string name;
  std::uint64_t executed_macs = 0;
  std::uint64_t busy_cycles = 0;
  std::uint64_t macs_per_cycle = 0;  // MAC units wired to the stage
  std::uint64_t macs_per_shift = 0;  // MACs one full shift requires
  // Executed MACs per busy cycle over MACs per shift, as an exact fraction.
  std::uint64_t er_num() const { return executed_macs; }
  std::uint64_t er_den() const { return busy_cycles * macs_per_shift; }
  double er_ratio() const { return er_den() == 0 ? 0.0 : static_cast<double>(er_num()) / static_cast<double>(er_den()); }
};

struct FrameTiming {
  std::uint64_t frame = 0;
  std::uint64_t first_sample_cycle = 0;
  std::uint64_t done_cycle = 0;
  std::uint64_t latency() const { return done_cycle - first_sample_cycle + 1; }
};

struct AccelReport {
  std::uint64_t frames = 0;
  std::uint64_t total_cycles = 0;
  std::uint64_t cycles_per_frame = kFrameCycles;
  std::uint64_t latency_max = 0;
  std::uint64_t latency_min = 0;
  std::uint64_t executed_macs = 0;
  std::uint64_t required_macs = 0;  // static per-frame count x frames
  std::vector<StageStats> stages;   // llds, conv1, conv2, dense
  int fifo_depth = 0;
  int fifo_max_occupancy = 0;
  std::uint64_t fifo_overflows = 0;
  std::uint64_t stall_count = 0;
  int fc_mac_lanes = 0;
  double clock_hz = 0.0;
  std::vector<FrameTiming> timing;

  const StageStats& stage(const std::string& name) const;
  // Conv1 and conv2 pooled into one fraction.
  double cnn_er_ratio() const;
  std::string to_csv() const;         // one summary row
  std::string timing_csv() const;     // one row per frame
  std::string summary() const;        // human-readable
};

struct Performance {
  double samples_per_second = 0.0;
  double frames_per_second = 0.0;
  double macs_per_frame = 0.0;
  double macs_per_second = 0.0;
  double gops = 0.0;  // 2 ops per MAC
  double avg_macs_per_cycle = 0.0;
  std::string to_text() const;
};

// Static MACs per frame of the quantized network (padding taps included).
std::uint64_t static_macs(const quant::QuantizedModel& qm);

struct SimResult {
  std::vector<std::vector<std::int32_t>> logits;  // per frame
  AccelReport report;
};

// Frames are channels-first doubles (1280 values), arriving back to back.
SimResult simulate_stream(const quant::QuantizedModel& qm, const std::vector<std::span<const double>>& frames,
                          const AccelConfig& cfg = {});
SimResult simulate_stream_int(const quant::QuantizedModel& qm, const std::vector<std::vector<std::int16_t>>& inputs,
                              const AccelConfig& cfg = {});
SimResult simulate_frame(const quant::QuantizedModel& qm, std::span<const double> frame, const AccelConfig& cfg = {});

Performance report_performance(const AccelReport& report);

struct DepthSweepRow {
  int depth = 0;
  std::uint64_t overflows = 0;
  std::uint64_t stalls = 0;
  int max_occupancy = 0;
};
struct DepthSweep {
  std::vector<DepthSweepRow> rows;
  int min_safe_depth = -1;  // smallest swept depth with no overflow, -1 if none
  std::string to_csv() const;
};
DepthSweep sweep_fifo_depth(const quant::QuantizedModel& qm, const std::vector<std::vector<std::int16_t>>& inputs,
                            const std::vector<int>& depths, const AccelConfig& cfg = {});

}  // namespace htcc::accel
