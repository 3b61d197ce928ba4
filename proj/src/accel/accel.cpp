#include "htcc/accel/accel.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <map>
#include <sstream>

#include "htcc/common/error.hpp"

namespace htcc::accel {

using quant::QKind;
using quant::QLayer;
using quant::QuantizedModel;

namespace {

struct Topology {
  const QLayer* llds = nullptr;
  const QLayer* down = nullptr;
  const QLayer* conv1 = nullptr;
  const QLayer* pool = nullptr;
  const QLayer* conv2 = nullptr;
  const QLayer* fc = nullptr;
  const QLayer* out = nullptr;
};

Topology topology(const QuantizedModel& qm) {
  const auto& L = qm.layers;
  const bool ok = L.size() == 7 && L[0].kind == QKind::llds_input && L[1].kind == QKind::conv1d &&
                  L[2].kind == QKind::conv1d && L[3].kind == QKind::maxpool && L[4].kind == QKind::conv1d &&
                  L[5].kind == QKind::dense && L[6].kind == QKind::dense && L[6].is_output;
  if (!ok) throw ConfigError("accelerator expects llds, llds_down, conv1, maxpool, conv2, dense, output");
  if (L[1].geom.pad != 0 || L[1].geom.cin != 2 || L[1].geom.cout != 2) {
    throw ConfigError("accelerator expects an unpadded 2-to-2 LLDS down-sampler");
  }
  if (L[2].geom.stride != 1 || L[4].geom.stride != 1) throw ConfigError("accelerator expects stride-1 CNN layers");
  if (!qm.calibrated) throw ConfigError("quantized model is not calibrated");
  return {&L[0], &L[1], &L[2], &L[3], &L[4], &L[5], &L[6]};
}

struct FifoEntry {
  std::uint64_t frame;
  int col;
  std::int16_t v[2];
};

struct FrameState {
  std::vector<std::int16_t> input;   // 2 x 640, channels first
  std::vector<std::int16_t> q1;      // 2 x 640
  std::vector<std::int64_t> down_acc;
  std::vector<std::int16_t> cols;    // LLDS output columns held by conv1, 2 x lout
  int cols_loaded = 0;
  std::vector<std::int16_t> pool_max;
  std::vector<std::int16_t> pooled;  // c1 filters x pooled length
  int pooled_ready = 0;
  int pooled_freed = 0;
  std::vector<std::int16_t> c2out;   // flattened dense input
  std::vector<std::int64_t> hid_acc;
  std::vector<std::int16_t> hid;
  std::vector<std::int64_t> out_acc;
};

class Simulator {
 public:
  Simulator(const QuantizedModel& qm, const AccelConfig& cfg, const std::vector<std::vector<std::int16_t>>& inputs)
      : qm_(qm), t_(topology(qm)), cfg_(cfg.resolved(qm)), inputs_(inputs) {
    lout_ = t_.down->out_shape.length;
    cf_ = t_.down->geom.stride;
    c1_len_ = t_.conv1->out_shape.length;
    pool_w_ = t_.pool->pool;
    p_len_ = t_.pool->out_shape.length;
    c2_len_ = t_.conv2->out_shape.length;
    c1_group_ = t_.conv1->geom.cout / cfg_.cnn_partition;
    c2_group_ = t_.conv2->geom.cin / cfg_.cnn_partition;
    // Largest number of down-sampler windows one LLDS output falls into.
    max_overlap_ = 0;
    for (int t = 0; t < kFrameCycles; ++t) max_overlap_ = std::max(max_overlap_, windows_at(t));
    stages_ = {{"llds", 0, 0, 16u + 4u * static_cast<std::uint64_t>(max_overlap_), 0},
               {"conv1", 0, 0, mac_conv1_per_cycle(), mac_conv1_per_cycle() * cfg_.cnn_partition},
               {"conv2", 0, 0, mac_conv2_per_cycle(), mac_conv2_per_cycle() * cfg_.cnn_partition},
               {"dense", 0, 0, static_cast<std::uint64_t>(cfg_.fc_mac_lanes), static_cast<std::uint64_t>(cfg_.fc_mac_lanes)}};
    stages_[0].macs_per_shift = stages_[0].macs_per_cycle;
    for (const auto& in : inputs_) {
      if (in.size() != 2 * static_cast<std::size_t>(kFrameCycles)) throw ConfigError("frame must hold 1280 values");
    }
  }

  SimResult run() {
    SimResult res;
    const std::uint64_t n = inputs_.size();
    res.logits.resize(n);
    res.report.timing.resize(n);
    std::uint64_t done = 0;
    const std::uint64_t limit = (n + 8) * kFrameCycles * 8;
    for (cycle_ = 0; done < n; ++cycle_) {
      if (cycle_ > limit) throw NumericError("accelerator simulation did not drain");
      // Downstream first, so values produced this cycle become visible next cycle.
      done += step_dense(res);
      step_conv2();
      step_conv1();
      step_llds();
    }
    AccelReport& r = res.report;
    r.frames = n;
    r.total_cycles = cycle_;
    r.stages = stages_;
    for (const auto& s : stages_) r.executed_macs += s.executed_macs;
    r.required_macs = static_macs(qm_) * n;
    r.fifo_depth = cfg_.fifo_depth;
    r.fifo_max_occupancy = fifo_max_;
    r.fifo_overflows = overflows_;
    r.stall_count = stalls_;
    r.fc_mac_lanes = cfg_.fc_mac_lanes;
    r.clock_hz = cfg_.clock_hz;
    if (n > 0) {
      r.latency_min = ~std::uint64_t{0};
      for (const auto& ft : r.timing) {
        r.latency_max = std::max(r.latency_max, ft.latency());
        r.latency_min = std::min(r.latency_min, ft.latency());
      }
    }
    return res;
  }

 private:
  int windows_at(int t) const {
    int c = 0;
    for (int o = 0; o < lout_; ++o) c += (t >= o * cf_ && t < o * cf_ + t_.down->geom.kernel) ? 1 : 0;
    return c;
  }
  std::uint64_t mac_conv1_per_cycle() const {
    const auto& g = t_.conv1->geom;
    return static_cast<std::uint64_t>(c1_group_ * g.cin * g.kernel);
  }
  std::uint64_t mac_conv2_per_cycle() const {
    const auto& g = t_.conv2->geom;
    return static_cast<std::uint64_t>(g.cout * c2_group_ * g.kernel);
  }

  FrameState& create_frame(std::uint64_t f) {
    FrameState& fs = frames_[f];
    fs.input = inputs_[f];
    fs.q1.assign(2 * kFrameCycles, 0);
    fs.down_acc.resize(2 * static_cast<std::size_t>(lout_));
    for (int co = 0; co < 2; ++co) {
      std::fill_n(fs.down_acc.begin() + co * lout_, lout_, std::int64_t{t_.down->bias[static_cast<std::size_t>(co)]});
    }
    fs.cols.assign(2 * static_cast<std::size_t>(lout_), 0);
    fs.pool_max.assign(static_cast<std::size_t>(t_.conv1->geom.cout), 0);
    fs.pooled.assign(static_cast<std::size_t>(t_.conv1->geom.cout * p_len_), 0);
    fs.c2out.assign(static_cast<std::size_t>(t_.conv2->geom.cout * c2_len_), 0);
    return fs;
  }

  // Stage A: LLDS output t of frame f is computed at cycle 640 f + t + 2,
  // once sample t + 2 (the last tap of the 1x5 filter) has arrived.
  void step_llds() {
    if (cycle_ % kFrameCycles == 0 && cycle_ / kFrameCycles < inputs_.size()) create_frame(cycle_ / kFrameCycles);
    if (cycle_ < 2) return;
    const std::uint64_t f = (cycle_ - 2) / kFrameCycles;
    if (f >= inputs_.size()) return;
    const int t = static_cast<int>((cycle_ - 2) % kFrameCycles);
    FrameState& fs = frames_.at(f);
    const QLayer& l1 = *t_.llds;
    std::uint64_t macs = 0;
    for (int c = 0; c < 2; ++c) {
      const std::int16_t* x = fs.input.data() + c * kFrameCycles;
      std::int64_t acc = l1.bias[static_cast<std::size_t>(c)];
      for (int j = 0; j < 3; ++j) {
        const int idx = t + j - 1;
        if (idx >= 0 && idx < kFrameCycles) acc += std::int64_t{l1.weights[static_cast<std::size_t>(c * 3 + j)]} * x[idx];
      }
      for (int j = 0; j < 5; ++j) {
        const int idx = t + j - 2;
        if (idx >= 0 && idx < kFrameCycles) acc += std::int64_t{l1.weights[static_cast<std::size_t>(6 + c * 5 + j)]} * x[idx];
      }
      macs += 8;
      fs.q1[static_cast<std::size_t>(c * kFrameCycles + t)] =
          static_cast<std::int16_t>(quant::finish_activation(l1, acc, qm_.mode, nullptr));
    }
    const QLayer& d = *t_.down;
    const int k = d.geom.kernel;
    for (int o = 0; o < lout_; ++o) {
      const int j = t - o * cf_;
      if (j < 0 || j >= k) continue;
      for (int co = 0; co < 2; ++co) {
        std::int64_t& acc = fs.down_acc[static_cast<std::size_t>(co * lout_ + o)];
        for (int ci = 0; ci < 2; ++ci) {
          acc += std::int64_t{d.weights[static_cast<std::size_t>((co * 2 + ci) * k + j)]} *
                 fs.q1[static_cast<std::size_t>(ci * kFrameCycles + t)];
        }
        macs += 2;
      }
      if (j == k - 1) {
        FifoEntry e{f, o, {0, 0}};
        for (int co = 0; co < 2; ++co) {
          e.v[co] = static_cast<std::int16_t>(
              quant::finish_activation(d, fs.down_acc[static_cast<std::size_t>(co * lout_ + o)], qm_.mode, nullptr));
        }
        fifo_.push_back(e);
        const int occ = static_cast<int>(fifo_.size()) * 2;
        if (occ > cfg_.fifo_depth) ++overflows_;
        fifo_max_ = std::max(fifo_max_, occ);
      }
    }
    stages_[0].executed_macs += macs;
    stages_[0].busy_cycles += 1;
  }

  // Stage B, first half: conv1 shift t of frame f over `partition` cycles.
  void step_conv1() {
    const auto& g = t_.conv1->geom;
    if (!c1_.active) {
      if (c1_.frame >= inputs_.size()) return;
      auto it = frames_.find(c1_.frame);
      if (it == frames_.end()) return;
      FrameState& fs = it->second;
      const int need = std::min(c1_.pos + g.kernel - 1 - g.pad, lout_ - 1);
      while (fs.cols_loaded <= need && !fifo_.empty() && fifo_.front().frame == c1_.frame &&
             fifo_.front().col == fs.cols_loaded) {
        fs.cols[static_cast<std::size_t>(fs.cols_loaded)] = fifo_.front().v[0];
        fs.cols[static_cast<std::size_t>(lout_ + fs.cols_loaded)] = fifo_.front().v[1];
        ++fs.cols_loaded;
        fifo_.pop_front();
      }
      if (fs.cols_loaded <= need) return;
      const bool emits_pool = (c1_.pos + 1) % pool_w_ == 0 && c1_.pos < p_len_ * pool_w_;
      if (emits_pool && line_buffer_ >= cfg_.line_buffer_columns) {
        ++stalls_;
        return;
      }
      c1_.active = true;
      c1_.phase = 0;
      c1_.acc.assign(static_cast<std::size_t>(g.cout), 0);
      for (int co = 0; co < g.cout; ++co) c1_.acc[static_cast<std::size_t>(co)] = t_.conv1->bias[static_cast<std::size_t>(co)];
    }
    FrameState& fs = frames_.at(c1_.frame);
    const int t = c1_.pos;
    for (int co = c1_.phase * c1_group_; co < (c1_.phase + 1) * c1_group_; ++co) {
      std::int64_t acc = 0;
      for (int ci = 0; ci < g.cin; ++ci) {
        for (int j = 0; j < g.kernel; ++j) {
          const int idx = t + j - g.pad;
          if (idx < 0 || idx >= lout_) continue;
          acc += std::int64_t{t_.conv1->weights[static_cast<std::size_t>((co * g.cin + ci) * g.kernel + j)]} *
                 fs.cols[static_cast<std::size_t>(ci * lout_ + idx)];
        }
      }
      c1_.acc[static_cast<std::size_t>(co)] += acc;
    }
    stages_[1].executed_macs += stages_[1].macs_per_cycle;
    stages_[1].busy_cycles += 1;
    if (++c1_.phase < cfg_.cnn_partition) return;

    // Shift complete: activation, requantization and the running pool max.
    const int slot = t % pool_w_;
    const bool in_range = t < p_len_ * pool_w_;
    for (int co = 0; co < g.cout; ++co) {
      const auto v = static_cast<std::int16_t>(
          quant::finish_activation(*t_.conv1, c1_.acc[static_cast<std::size_t>(co)], qm_.mode, nullptr));
      auto& m = fs.pool_max[static_cast<std::size_t>(co)];
      m = slot == 0 ? v : std::max(m, v);
      if (in_range && slot == pool_w_ - 1) fs.pooled[static_cast<std::size_t>(co * p_len_ + t / pool_w_)] = m;
    }
    if (in_range && slot == pool_w_ - 1) {
      ++fs.pooled_ready;
      ++line_buffer_;
    }
    c1_.active = false;
    if (++c1_.pos == c1_len_) {
      c1_.pos = 0;
      ++c1_.frame;
    }
  }

  // Stage B, second half: conv2 shift u, one group of input channels per cycle.
  void step_conv2() {
    const auto& g = t_.conv2->geom;
    if (!c2_.active) {
      if (c2_.frame >= inputs_.size()) return;
      auto it = frames_.find(c2_.frame);
      if (it == frames_.end()) return;
      FrameState& fs = it->second;
      const int need = std::min(c2_.pos + g.kernel - 1 - g.pad, p_len_ - 1);
      if (fs.pooled_ready <= need) return;
      if (c2_.pos == 0 && dense_pending_) {
        ++stalls_;
        return;
      }
      // Columns left of the window are no longer needed.
      const int keep_from = std::max(0, c2_.pos - g.pad);
      if (keep_from > fs.pooled_freed) {
        line_buffer_ -= keep_from - fs.pooled_freed;
        fs.pooled_freed = keep_from;
      }
      c2_.active = true;
      c2_.phase = 0;
      c2_.acc.assign(static_cast<std::size_t>(g.cout), 0);
      for (int co = 0; co < g.cout; ++co) c2_.acc[static_cast<std::size_t>(co)] = t_.conv2->bias[static_cast<std::size_t>(co)];
    }
    FrameState& fs = frames_.at(c2_.frame);
    const int u = c2_.pos;
    for (int co = 0; co < g.cout; ++co) {
      std::int64_t acc = 0;
      for (int ci = c2_.phase * c2_group_; ci < (c2_.phase + 1) * c2_group_; ++ci) {
        for (int j = 0; j < g.kernel; ++j) {
          const int idx = u + j - g.pad;
          if (idx < 0 || idx >= p_len_) continue;
          acc += std::int64_t{t_.conv2->weights[static_cast<std::size_t>((co * g.cin + ci) * g.kernel + j)]} *
                 fs.pooled[static_cast<std::size_t>(ci * p_len_ + idx)];
        }
      }
      c2_.acc[static_cast<std::size_t>(co)] += acc;
    }
    stages_[2].executed_macs += stages_[2].macs_per_cycle;
    stages_[2].busy_cycles += 1;
    if (++c2_.phase < cfg_.cnn_partition) return;

    for (int co = 0; co < g.cout; ++co) {
      fs.c2out[static_cast<std::size_t>(co * c2_len_ + u)] = static_cast<std::int16_t>(
          quant::finish_activation(*t_.conv2, c2_.acc[static_cast<std::size_t>(co)], qm_.mode, nullptr));
    }
    c2_.active = false;
    if (++c2_.pos == c2_len_) {
      line_buffer_ -= p_len_ - fs.pooled_freed;
      fs.pooled_freed = p_len_;
      dense_pending_ = true;
      dense_pending_frame_ = c2_.frame;
      c2_.pos = 0;
      ++c2_.frame;
    }
  }

  // Stage C: hidden layer then output layer, `lanes` MACs per cycle.
  std::uint64_t step_dense(SimResult& res) {
    const QLayer& h = *t_.fc;
    const QLayer& o = *t_.out;
    if (!fc_.active) {
      if (!dense_pending_) return 0;
      fc_.active = true;
      fc_.frame = dense_pending_frame_;
      fc_.index = 0;
      fc_.output_phase = false;
      dense_pending_ = false;
      FrameState& fs = frames_.at(fc_.frame);
      fs.hid_acc.assign(h.bias.begin(), h.bias.end());
      fs.out_acc.assign(o.bias.begin(), o.bias.end());
    }
    FrameState& fs = frames_.at(fc_.frame);
    const QLayer& l = fc_.output_phase ? o : h;
    const std::span<const std::int16_t> x = fc_.output_phase ? std::span<const std::int16_t>(fs.hid)
                                                             : std::span<const std::int16_t>(fs.c2out);
    std::vector<std::int64_t>& acc = fc_.output_phase ? fs.out_acc : fs.hid_acc;
    const std::uint64_t total = static_cast<std::uint64_t>(l.dense_in) * static_cast<std::uint64_t>(l.dense_out);
    const std::uint64_t end = std::min(total, fc_.index + static_cast<std::uint64_t>(cfg_.fc_mac_lanes));
    for (std::uint64_t m = fc_.index; m < end; ++m) {
      const auto row = m / static_cast<std::uint64_t>(l.dense_in);
      const auto col = m % static_cast<std::uint64_t>(l.dense_in);
      acc[row] += std::int64_t{l.weights[m]} * x[col];
    }
    stages_[3].executed_macs += end - fc_.index;
    stages_[3].busy_cycles += 1;
    fc_.index = end;
    if (end < total) return 0;
    if (!fc_.output_phase) {
      fs.hid.resize(acc.size());
      for (std::size_t i = 0; i < acc.size(); ++i) {
        fs.hid[i] = static_cast<std::int16_t>(quant::finish_activation(h, acc[i], qm_.mode, nullptr));
      }
      fc_.output_phase = true;
      fc_.index = 0;
      return 0;
    }
    auto& logits = res.logits[fc_.frame];
    logits.resize(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) logits[i] = quant::finish_activation(o, acc[i], qm_.mode, nullptr);
    res.report.timing[fc_.frame] = {fc_.frame, fc_.frame * kFrameCycles, cycle_};
    frames_.erase(fc_.frame);
    fc_.active = false;
    return 1;
  }

  struct ConvEngine {
    bool active = false;
    std::uint64_t frame = 0;
    int pos = 0;
    int phase = 0;
    std::vector<std::int64_t> acc;
  };
  struct DenseEngine {
    bool active = false;
    std::uint64_t frame = 0;
    std::uint64_t index = 0;
    bool output_phase = false;
  };

  const QuantizedModel& qm_;
  Topology t_;
  AccelConfig cfg_;
  const std::vector<std::vector<std::int16_t>>& inputs_;
  int lout_ = 0, cf_ = 0, c1_len_ = 0, pool_w_ = 0, p_len_ = 0, c2_len_ = 0;
  int c1_group_ = 0, c2_group_ = 0, max_overlap_ = 0;
  std::vector<StageStats> stages_;
  std::map<std::uint64_t, FrameState> frames_;
  std::deque<FifoEntry> fifo_;
  int fifo_max_ = 0;
  std::uint64_t overflows_ = 0;
  std::uint64_t stalls_ = 0;
  int line_buffer_ = 0;
  ConvEngine c1_, c2_;
  DenseEngine fc_;
  bool dense_pending_ = false;
  std::uint64_t dense_pending_frame_ = 0;
  std::uint64_t cycle_ = 0;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

AccelConfig AccelConfig::resolved(const QuantizedModel& qm) const {
  const Topology t = topology(qm);
  AccelConfig c = *this;
  if (!(c.clock_hz > 0.0)) throw ConfigError("clock_hz must be positive");
  if (c.cnn_partition < 1) throw ConfigError("cnn_partition must be at least 1");
  if (t.conv1->geom.cout % c.cnn_partition != 0 || t.conv2->geom.cin % c.cnn_partition != 0) {
    throw ConfigError("partition mismatch: " + std::to_string(c.cnn_partition) + " does not divide conv1 filters (" +
                      std::to_string(t.conv1->geom.cout) + ") and conv2 input channels (" +
                      std::to_string(t.conv2->geom.cin) + ")");
  }
  if (c.fifo_depth < 0 || c.fc_mac_lanes < 0 || c.line_buffer_columns < 0) {
    throw ConfigError("accelerator sizes must be non-negative");
  }
  if (c.fifo_depth == 0) c.fifo_depth = 2 * t.down->out_shape.length;
  if (c.fc_mac_lanes == 0) {
    const std::uint64_t dense = static_cast<std::uint64_t>(t.fc->dense_in) * t.fc->dense_out +
                                static_cast<std::uint64_t>(t.out->dense_in) * t.out->dense_out;
    c.fc_mac_lanes = static_cast<int>((dense + kFrameCycles - 1) / kFrameCycles);
  }
  if (c.line_buffer_columns == 0) c.line_buffer_columns = t.conv2->geom.kernel + 1;
  return c;
}

std::uint64_t static_macs(const QuantizedModel& qm) {
  std::uint64_t n = 0;
  for (const QLayer& l : qm.layers) {
    switch (l.kind) {
      case QKind::llds_input: n += static_cast<std::uint64_t>(l.in_shape.length) * 16; break;
      case QKind::conv1d:
        n += static_cast<std::uint64_t>(l.geom.cout) * l.geom.cin * l.geom.kernel * l.out_shape.length;
        break;
      case QKind::dense: n += static_cast<std::uint64_t>(l.dense_in) * l.dense_out; break;
      case QKind::maxpool: break;
    }
  }
  return n;
}

SimResult simulate_stream_int(const QuantizedModel& qm, const std::vector<std::vector<std::int16_t>>& inputs,
                              const AccelConfig& cfg) {
  return Simulator(qm, cfg, inputs).run();
}

SimResult simulate_stream(const QuantizedModel& qm, const std::vector<std::span<const double>>& frames,
                          const AccelConfig& cfg) {
  std::vector<std::vector<std::int16_t>> inputs;
  inputs.reserve(frames.size());
  for (const auto& f : frames) inputs.push_back(quant::quantize_input(qm, f));
  return simulate_stream_int(qm, inputs, cfg);
}

SimResult simulate_frame(const QuantizedModel& qm, std::span<const double> frame, const AccelConfig& cfg) {
  return simulate_stream(qm, {frame}, cfg);
}

const StageStats& AccelReport::stage(const std::string& name) const {
  for (const auto& s : stages) {
    if (s.name == name) return s;
  }
  throw ConfigError("no accelerator stage named " + name);
}

double AccelReport::cnn_er_ratio() const {
  const auto& a = stage("conv1");
  const auto& b = stage("conv2");
  const std::uint64_t den = a.er_den() + b.er_den();
  return den == 0 ? 0.0 : static_cast<double>(a.er_num() + b.er_num()) / static_cast<double>(den);
}

std::string AccelReport::to_csv() const {
  std::ostringstream os;
  os << "frames,total_cycles,cycles_per_frame,latency_min,latency_max,executed_macs,required_macs,"
        "er_llds,er_conv1,er_conv2,er_cnn,fifo_depth,fifo_max_occupancy,fifo_overflows,stall_count,"
        "fc_mac_lanes,clock_hz\n";
  os << frames << ',' << total_cycles << ',' << cycles_per_frame << ',' << latency_min << ',' << latency_max << ','
     << executed_macs << ',' << required_macs << ',' << fmt(stage("llds").er_ratio()) << ','
     << fmt(stage("conv1").er_ratio()) << ',' << fmt(stage("conv2").er_ratio()) << ',' << fmt(cnn_er_ratio()) << ','
     << fifo_depth << ',' << fifo_max_occupancy << ',' << fifo_overflows << ',' << stall_count << ','
     << fc_mac_lanes << ',' << fmt(clock_hz) << '\n';
  return os.str();
}

std::string AccelReport::timing_csv() const {
  std::ostringstream os;
  os << "frame,first_sample_cycle,done_cycle,latency_cycles\n";
  for (const auto& t : timing) os << t.frame << ',' << t.first_sample_cycle << ',' << t.done_cycle << ',' << t.latency() << '\n';
  return os.str();
}

std::string AccelReport::summary() const {
  std::ostringstream os;
  os << "frames               " << frames << "\n"
     << "total cycles         " << total_cycles << "\n"
     << "latency (cycles)     min " << latency_min << ", max " << latency_max << " (bound " << 3 * kFrameCycles
     << ")\n"
     << "MACs executed        " << executed_macs << " (static " << required_macs << ")\n";
  for (const auto& s : stages) {
    os << "stage " << s.name << std::string(s.name.size() < 6 ? 6 - s.name.size() : 0, ' ') << "       E/R "
       << fmt(s.er_ratio()) << ", " << s.macs_per_cycle << " MACs/cycle, busy " << s.busy_cycles << " cycles\n";
  }
  os << "FIFO                 max " << fifo_max_occupancy << " of " << fifo_depth << " values, overflows "
     << fifo_overflows << "\n"
     << "stalls               " << stall_count << "\n";
  return os.str();
}

Performance report_performance(const AccelReport& r) {
  Performance p;
  p.samples_per_second = r.clock_hz;  // one complex sample per cycle
  p.frames_per_second = r.clock_hz / static_cast<double>(kFrameCycles);
  p.macs_per_frame = r.frames == 0 ? 0.0 : static_cast<double>(r.executed_macs) / static_cast<double>(r.frames);
  p.macs_per_second = p.macs_per_frame * p.frames_per_second;
  p.gops = 2.0 * p.macs_per_second / 1e9;
  p.avg_macs_per_cycle = r.total_cycles == 0 ? 0.0 : static_cast<double>(r.executed_macs) / static_cast<double>(r.total_cycles);
  return p;
}

std::string Performance::to_text() const {
  std::ostringstream os;
  os << "input rate           " << fmt(samples_per_second / 1e6) << " MS/s\n"
     << "frame rate           " << fmt(frames_per_second) << " frames/s\n"
     << "MACs per frame       " << fmt(macs_per_frame) << "\n"
     << "MAC rate             " << fmt(macs_per_second / 1e9) << " GMAC/s\n"
     << "performance          " << fmt(gops) << " GOPs (2 ops per MAC)\n"
     << "average MACs/cycle   " << fmt(avg_macs_per_cycle) << "\n"
     << "reference design  67 MS/s, 86.5 GOPs at 200 MHz (not asserted)\n";
  return os.str();
}

DepthSweep sweep_fifo_depth(const QuantizedModel& qm, const std::vector<std::vector<std::int16_t>>& inputs,
                            const std::vector<int>& depths, const AccelConfig& cfg) {
  DepthSweep out;
  std::vector<int> sorted = depths;
  std::sort(sorted.begin(), sorted.end());
  for (int d : sorted) {
    if (d <= 0) throw ConfigError("swept FIFO depths must be positive");
    AccelConfig c = cfg;
    c.fifo_depth = d;
    const SimResult r = simulate_stream_int(qm, inputs, c);
    out.rows.push_back({d, r.report.fifo_overflows, r.report.stall_count, r.report.fifo_max_occupancy});
    if (out.min_safe_depth < 0 && r.report.fifo_overflows == 0) out.min_safe_depth = d;
  }
  return out;
}

std::string DepthSweep::to_csv() const {
  std::ostringstream os;
  os << "fifo_depth,overflows,stalls,max_occupancy,safe\n";
  for (const auto& r : rows) {
    os << r.depth << ',' << r.overflows << ',' << r.stalls << ',' << r.max_occupancy << ','
       << (r.overflows == 0 ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace htcc::accel
