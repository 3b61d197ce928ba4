#include "htcc/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "htcc/accel/accel.hpp"
#include "htcc/common/byte_io.hpp"
#include "htcc/common/error.hpp"
#include "htcc/dataset/dataset.hpp"
#include "htcc/eval/eval.hpp"
#include "htcc/eve/decoder.hpp"
#include "htcc/nn/ablation.hpp"
#include "htcc/nn/train.hpp"
#include "htcc/quant/quantizer.hpp"
#include "htcc/simd/kernels.hpp"

namespace htcc::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::array<double, 3> kSplitRatios = {0.7, 0.15, 0.15};
constexpr int kMinCalibrationFrames = 256;
const std::vector<double> kHighSnr = {21.0, 25.0, 29.0};

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string basename(const std::string& p) { return fs::path(p).filename().string(); }

std::string file_hash(const std::string& path) { return hash_hex(read_file(path)); }

// Sidecar manifest for one artifact (a file, or a directory of files).
void write_manifest(const RunConfig& cfg, const std::string& artifact, const std::string& command,
                    const std::string& lineage, const std::map<std::string, std::string>& inputs,
                    const std::vector<std::string>& files) {
  json f = json::object();
  for (const auto& p : files) f[fs::relative(p, cfg.out_dir).generic_string()] = file_hash(p);
  json m = {{"artifact", artifact},
            {"command", command},
            {"config", json::parse(cfg.to_json())},
            {"config_hash", cfg.hash()},
            {"lineage", lineage},
            {"inputs", inputs},
            {"files", f}};
  write_text_file(cfg.out(artifact + ".manifest.json"), m.dump(1) + "\n");
}

void ensure_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.out_dir + ": " + ec.message());
}

dataset::GenerationConfig generation_config(const RunConfig& cfg) {
  dataset::GenerationConfig g;
  if (cfg.scale == "full") {
    g = dataset::GenerationConfig::full_scale();
  } else if (cfg.scale == "desk") {
    g = dataset::GenerationConfig::desk_scale();
  } else {
    throw ConfigError("unknown scale '" + cfg.scale + "' (desk, full)");
  }
  if (cfg.frames_per_element > 0) g.frames_per_element = cfg.frames_per_element;
  g.acquisitions = cfg.acquisitions;
  if (!cfg.snr_grid.empty()) g.snr_grid = cfg.snr_grid;
  g.master_seed = cfg.seed;
  g.impairments = cfg.impairments;
  g.fixed_reference_power = cfg.fixed_reference_power;
  g.attack.alpha = cfg.alpha;
  g.attack.jitter_sigma_ratio = cfg.jitter_sigma_ratio;
  g.attack.evm_distortion_db = cfg.evm_distortion_db;
  g.attack.envelope_factor = cfg.envelope_factor;
  g.threads = cfg.threads;
  g.validate();
  return g;
}

std::string dataset_lineage(const dataset::DatasetStore& store) { return hash_hex(store.manifest); }

struct ModelMeta {
  std::string lineage;
  std::uint64_t split_seed = 1;
  nn::Task task = nn::Task::multiclass;
  json raw;
};

ModelMeta parse_meta(const std::string& manifest, const std::string& what) {
  try {
    const json m = json::parse(manifest);
    const json& meta = m.at("meta");
    ModelMeta out;
    out.raw = meta;
    out.lineage = meta.at("lineage").get<std::string>();
    out.split_seed = std::stoull(meta.at("split_seed").get<std::string>());
    out.task = nn::task_from_name(meta.at("task").get<std::string>());
    return out;
  } catch (const json::exception& e) {
    throw FormatError(what + " lacks pipeline metadata: " + e.what());
  } catch (const std::logic_error& e) {
    throw FormatError(what + " has malformed pipeline metadata: " + e.what());
  }
}

void require_lineage(const ModelMeta& meta, const std::string& lineage, const std::string& what) {
  if (meta.lineage != lineage) {
    throw ConfigError(what + " was built from dataset " + meta.lineage + " but the dataset given is " + lineage);
  }
}

struct Sets {
  dataset::LabeledSet train, val, test;
};

Sets load_sets(const dataset::DatasetStore& store, std::uint64_t split_seed, nn::Task task) {
  const auto sp = dataset::split(store, kSplitRatios, split_seed);
  Sets s{dataset::gather(store, sp.train), dataset::gather(store, sp.val), dataset::gather(store, sp.test)};
  if (task == nn::Task::binary) {
    s.train = dataset::collapse_binary(std::move(s.train));
    s.val = dataset::collapse_binary(std::move(s.val));
    s.test = dataset::collapse_binary(std::move(s.test));
  }
  return s;
}

quant::RequantMode rounding_mode(const std::string& s) {
  if (s == "truncate") return quant::RequantMode::truncate;
  if (s == "round_nearest") return quant::RequantMode::round_nearest;
  throw ConfigError("unknown rounding '" + s + "' (truncate, round_nearest)");
}

accel::AccelConfig accel_config(const RunConfig& cfg) {
  accel::AccelConfig a;
  a.clock_hz = cfg.clock_hz;
  a.fifo_depth = cfg.fifo_depth;
  a.fc_mac_lanes = cfg.fc_mac_lanes;
  return a;
}

struct CheckLog {
  std::ostream& log;
  bool ok = true;
  void expect(bool pass, const std::string& what) {
    log << (pass ? "PASS " : "FAIL ") << what << "\n";
    ok = ok && pass;
  }
};

std::string read_text_if(const std::string& path) {
  if (!fs::exists(path)) return {};
  const auto b = read_file(path);
  return std::string(b.begin(), b.end());
}

}  // namespace

std::string RunConfig::to_json() const {
  json grid = json::array();
  for (double s : snr_grid) grid.push_back(s);
  json j = {{"seed", std::to_string(seed)},
            {"scale", scale},
            {"isa", isa},
            {"dataset",
             {{"frames_per_element", frames_per_element},
              {"acquisitions", acquisitions},
              {"snr_grid", grid},
              {"impairments", impairments},
              {"fixed_reference_power", fixed_reference_power}}},
            {"attack",
             {{"alpha", alpha},
              {"jitter_sigma_ratio", jitter_sigma_ratio},
              {"evm_distortion_db", evm_distortion_db},
              {"envelope_factor", envelope_factor}}},
            {"train",
             {{"task", task},
              {"cf", cf},
              {"epochs", epochs},
              {"lr", lr},
              {"batch_size", batch_size},
              {"llds_activation", llds_activation}}},
            {"quantize", {{"rounding", rounding}, {"calibration_frames", calibration_frames}}},
            {"accel",
             {{"clock_hz", clock_hz},
              {"fifo_depth", fifo_depth},
              {"fc_mac_lanes", fc_mac_lanes},
              {"frames", frames},
              {"sweep_depths", sweep_depths}}},
            {"eval", {{"paths", paths}}},
            {"ablate",
             {{"kind", ablation}, {"cf_list", cf_list}, {"activations", activations}, {"seeds", ablation_seeds}}}};
  return j.dump();
}

std::string RunConfig::hash() const { return hash_hex(to_json()); }

void RunConfig::validate() const {
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (scale != "desk" && scale != "full") throw ConfigError("unknown scale '" + scale + "' (desk, full)");
  if (frames_per_element < 0) throw ConfigError("frames must be non-negative");
  if (epochs < 1 || batch_size < 1 || !(lr > 0.0)) throw ConfigError("epochs, batch size and lr must be positive");
  if (frames < 1) throw ConfigError("accelerator frame count must be positive");
  if (ablation_seeds < 1) throw ConfigError("ablation needs at least one seed");
  nn::task_from_name(task);
  nn::activation_from_name(llds_activation);
  rounding_mode(rounding);
  for (const auto& p : paths) eval::path_from_name(p);
  if (ablation != "cf" && ablation != "activation") throw ConfigError("ablation must be cf or activation");
}

std::string RunConfig::out(const std::string& name) const { return (fs::path(out_dir) / name).string(); }
std::string RunConfig::data_path() const { return data.empty() ? out(kDatasetFile) : data; }
std::string RunConfig::model_path() const { return model.empty() ? out(kModelFile) : model; }
std::string RunConfig::qmodel_path() const { return qmodel.empty() ? out(kQuantizedFile) : qmodel; }

void apply_isa(const std::string& isa) {
  if (isa == "auto") return;
  simd::Isa want;
  if (isa == "scalar") {
    want = simd::Isa::scalar;
  } else if (isa == "avx2") {
    want = simd::Isa::avx2;
  } else {
    throw ConfigError("unknown isa '" + isa + "' (auto, scalar, avx2)");
  }
  if (!simd::force_isa(want)) throw ConfigError("isa " + isa + " is not available on this machine or build");
}

int cmd_generate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  ensure_out_dir(cfg);
  const auto g = generation_config(cfg);
  const auto store = dataset::generate(g);
  const std::string path = cfg.data_path();
  dataset::write(store, path);
  write_manifest(cfg, basename(path), "generate", dataset_lineage(store), {}, {path});
  log << "generated " << store.frame_count() << " frames in " << store.elements.size() << " elements -> " << path
      << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  ensure_out_dir(cfg);
  const std::string data = cfg.data_path();
  const auto store = dataset::read(data);
  const auto task = nn::task_from_name(cfg.task);
  const Sets sets = load_sets(store, cfg.seed, task);
  nn::DetectorConfig dc;
  dc.cf = cfg.cf;
  dc.num_classes = task == nn::Task::binary ? 2 : covert::kNumClasses;
  dc.llds_activation = nn::activation_from_name(cfg.llds_activation);
  nn::Model model = nn::build_detector(dc);
  nn::TrainConfig tc;
  tc.lr = cfg.lr;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.seed = cfg.seed;
  tc.task = task;
  log << "training " << model.param_count() << "-parameter model on " << sets.train.size() << " frames ("
      << sets.val.size() << " validation)\n";
  const auto history = nn::train(model, sets.train, sets.val, tc, [&](const nn::EpochStats& e) {
    log << "epoch " << e.epoch << " train loss " << fmt(e.train_loss, 4) << " acc " << fmt(e.train_acc, 4)
        << "  val loss " << fmt(e.val_loss, 4) << " acc " << fmt(e.val_acc, 4) << "\n";
  });
  log << "kept weights of epoch " << history.best_epoch << "\n";

  const std::string lineage = dataset_lineage(store);
  const json meta = {{"lineage", lineage},
                     {"config_hash", cfg.hash()},
                     {"split_seed", std::to_string(cfg.seed)},
                     {"task", nn::task_name(task)},
                     {"train", json::parse(tc.to_json())},
                     {"best_epoch", history.best_epoch},
                     {"dataset_hash", file_hash(data)}};
  const std::string mpath = cfg.model_path();
  nn::save_checkpoint(model, meta.dump(), mpath);
  const std::string hpath = cfg.out("train_history.csv");
  write_text_file(hpath, history.to_csv());
  write_manifest(cfg, basename(mpath), "train", lineage, {{basename(data), file_hash(data)}}, {mpath, hpath});
  log << "saved " << mpath << "\n";
  return 0;
}

int cmd_quantize(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  ensure_out_dir(cfg);
  if (cfg.calibration_frames < kMinCalibrationFrames) {
    throw ConfigError("calibration needs at least " + std::to_string(kMinCalibrationFrames) + " frames");
  }
  const std::string mpath = cfg.model_path();
  const auto cp = nn::load_checkpoint(mpath);
  const ModelMeta meta = parse_meta(cp.manifest, mpath);
  const std::string data = cfg.data_path();
  const auto store = dataset::read(data);
  require_lineage(meta, dataset_lineage(store), mpath);
  const Sets sets = load_sets(store, meta.split_seed, meta.task);
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(cfg.calibration_frames), sets.train.size());
  if (n < static_cast<std::size_t>(kMinCalibrationFrames)) {
    throw ConfigError("training split has only " + std::to_string(sets.train.size()) + " frames for calibration");
  }
  std::vector<std::span<const double>> cal;
  for (std::size_t i = 0; i < n; ++i) cal.push_back(sets.train.input(i));
  auto qm = quant::quantize_weights(cp.model, rounding_mode(cfg.rounding));
  quant::calibrate_activations(qm, cp.model, cal);

  quant::QuantTrace trace;
  for (const auto& f : cal) {
    trace.activations.clear();
    quant::quantized_forward(qm, f, &trace);
  }
  const double sat = trace.values == 0 ? 0.0 : static_cast<double>(trace.saturated) / static_cast<double>(trace.values);
  const bool flagged = sat >= 1e-3;
  log << "calibrated on " << n << " frames; saturation " << fmt(100.0 * sat, 3) << "% of activations"
      << (flagged ? " (flagged: above 0.1%)" : "") << "\n";

  json qmeta = meta.raw;
  qmeta["config_hash"] = cfg.hash();
  qmeta["model_hash"] = file_hash(mpath);
  qmeta["calibration_saturation"] = sat;
  qmeta["calibration_flagged"] = flagged;
  const std::string qpath = cfg.qmodel_path();
  quant::save_quantized(qm, qmeta.dump(), qpath);
  write_manifest(cfg, basename(qpath), "quantize", meta.lineage,
                 {{basename(mpath), file_hash(mpath)}, {basename(data), file_hash(data)}}, {qpath});
  log << "saved " << qpath << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  ensure_out_dir(cfg);
  const std::string data = cfg.data_path();
  const auto store = dataset::read(data);
  const std::string lineage = dataset_lineage(store);
  std::map<std::string, std::string> inputs = {{basename(data), file_hash(data)}};

  std::vector<eval::EvalResult> results;
  std::optional<nn::Checkpoint> cp;
  std::optional<quant::QuantizedModel> qm;
  std::optional<ModelMeta> meta;
  auto load_float = [&] {
    if (cp) return;
    cp = nn::load_checkpoint(cfg.model_path());
    meta = parse_meta(cp->manifest, cfg.model_path());
    require_lineage(*meta, lineage, cfg.model_path());
    inputs[basename(cfg.model_path())] = file_hash(cfg.model_path());
  };
  auto load_quant = [&] {
    if (qm) return;
    std::string manifest;
    qm = quant::load_quantized(cfg.qmodel_path(), &manifest);
    const ModelMeta qmeta = parse_meta(manifest, cfg.qmodel_path());
    require_lineage(qmeta, lineage, cfg.qmodel_path());
    if (!meta) meta = qmeta;
    inputs[basename(cfg.qmodel_path())] = file_hash(cfg.qmodel_path());
  };
  for (const auto& p : cfg.paths) {
    if (eval::path_from_name(p) == eval::InferencePath::float_model) {
      load_float();
    } else {
      load_quant();
    }
  }
  const Sets sets = load_sets(store, meta->split_seed, meta->task);
  log << "evaluating on " << sets.test.size() << " held-out frames\n";

  std::vector<std::string> files;
  for (const auto& p : cfg.paths) {
    const auto path = eval::path_from_name(p);
    eval::EvalResult r = path == eval::InferencePath::float_model ? eval::evaluate(cp->model, sets.test, cfg.threads)
                         : path == eval::InferencePath::quantized ? eval::evaluate(*qm, sets.test, cfg.threads)
                                                                  : eval::evaluate_accel(*qm, sets.test, accel_config(cfg));
    log << p << ": mean binary " << fmt(r.avg_binary, 4) << ", mean multiclass " << fmt(r.avg_multiclass, 4) << "\n";
    for (const auto& s : r.per_snr) {
      log << "  " << eval::snr_label(s.snr_db) << " dB  binary " << fmt(s.binary_accuracy, 4) << "  multiclass "
          << fmt(s.multiclass_accuracy, 4) << "\n";
    }
    const std::string jpath = cfg.out("eval_" + p + ".json");
    write_text_file(jpath, r.to_json() + "\n");
    files.push_back(jpath);
    results.push_back(std::move(r));
  }
  for (auto& f : eval::emit_curves(results, cfg.out("eval"))) files.push_back(f);
  write_manifest(cfg, "eval", "eval", lineage, inputs, files);

  if (!cfg.check) return 0;
  CheckLog check{log};
  for (const auto& r : results) {
    const std::string tag = std::string(eval::path_name(r.path)) + ": ";
    if (r.num_classes == covert::kNumClasses) {
      check.expect(r.mean_binary(kHighSnr) >= 0.90, tag + "binary accuracy over 21-29 dB " + fmt(r.mean_binary(kHighSnr), 4) + " >= 0.90");
      check.expect(r.mean_multiclass(kHighSnr) >= 0.85,
                   tag + "multiclass accuracy over 21-29 dB " + fmt(r.mean_multiclass(kHighSnr), 4) + " >= 0.85");
      double worst = 1.0;
      for (const auto& s : r.per_snr) worst = std::min(worst, s.per_class[static_cast<std::size_t>(covert::AttackKind::ht2)]);
      check.expect(worst >= 0.99, tag + "HT2 accuracy at every SNR, worst " + fmt(worst, 4) + " >= 0.99");
    } else {
      check.expect(r.mean_binary(kHighSnr) >= 0.90, tag + "binary accuracy over 21-29 dB " + fmt(r.mean_binary(kHighSnr), 4) + " >= 0.90");
    }
  }
  const bool has_quant = std::any_of(results.begin(), results.end(),
                                     [](const auto& r) { return r.path != eval::InferencePath::float_model; });
  if (has_quant && fs::exists(cfg.model_path())) {
    load_float();
    const auto ref = std::find_if(results.begin(), results.end(),
                                  [](const auto& r) { return r.path == eval::InferencePath::float_model; });
    const eval::EvalResult fr = ref != results.end() ? *ref : eval::evaluate(cp->model, sets.test, cfg.threads);
    for (const auto& r : results) {
      if (r.path == eval::InferencePath::float_model) continue;
      const std::string tag = std::string(eval::path_name(r.path)) + ": ";
      const double gap = 100.0 * std::abs(fr.avg_multiclass - r.avg_multiclass);
      check.expect(gap <= 2.0, tag + "mean multiclass gap to float " + fmt(gap, 3) + " points <= 2");
      for (double snr : {25.0, 29.0}) {
        if (!r.has(snr) || !fr.has(snr)) continue;
        const double g = 100.0 * std::abs(fr.at(snr).multiclass_accuracy - r.at(snr).multiclass_accuracy);
        check.expect(g <= 0.5, tag + "multiclass gap at " + eval::snr_label(snr) + " dB " + fmt(g, 3) + " points <= 0.5");
      }
    }
  }
  return check.ok ? 0 : kCheckFailed;
}

int cmd_sim_accel(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  ensure_out_dir(cfg);
  std::string manifest;
  const std::string qpath = cfg.qmodel_path();
  const auto qm = quant::load_quantized(qpath, &manifest);
  const ModelMeta meta = parse_meta(manifest, qpath);
  const std::string data = cfg.data_path();
  const auto store = dataset::read(data);
  require_lineage(meta, dataset_lineage(store), qpath);
  const Sets sets = load_sets(store, meta.split_seed, meta.task);
  if (sets.test.size() == 0) throw ConfigError("test split is empty");

  std::vector<std::vector<std::int16_t>> inputs;
  for (int i = 0; i < cfg.frames; ++i) {
    inputs.push_back(quant::quantize_input(qm, sets.test.input(static_cast<std::size_t>(i) % sets.test.size())));
  }
  const accel::AccelConfig ac = accel_config(cfg);
  const auto sim = accel::simulate_stream_int(qm, inputs, ac);
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) mismatches += sim.logits[i] != quant::quantized_forward_int(qm, inputs[i]);
  const auto perf = accel::report_performance(sim.report);

  const std::vector<std::int16_t>* first = inputs.data();
  std::vector<std::vector<std::int16_t>> sweep_in(first, first + std::min<std::size_t>(inputs.size(), 100));
  const auto sweep = accel::sweep_fifo_depth(qm, sweep_in, cfg.sweep_depths, ac);

  const std::string rpath = cfg.out("accel_report.csv");
  const std::string tpath = cfg.out("accel_timing.csv");
  const std::string spath = cfg.out("accel_summary.txt");
  const std::string dpath = cfg.out("fifo_sweep.csv");
  std::ostringstream summary;
  summary << sim.report.summary() << perf.to_text() << "logits matching the integer reference " << inputs.size() - mismatches
          << " of " << inputs.size() << "\n"
          << "minimal safe FIFO depth over the sweep " << sweep.min_safe_depth << " values\n";
  write_text_file(rpath, sim.report.to_csv());
  write_text_file(tpath, sim.report.timing_csv());
  write_text_file(spath, summary.str());
  write_text_file(dpath, sweep.to_csv());
  write_manifest(cfg, "accel", "sim-accel", meta.lineage,
                 {{basename(qpath), file_hash(qpath)}, {basename(data), file_hash(data)}}, {rpath, tpath, spath, dpath});
  log << summary.str();

  if (!cfg.check) return 0;
  CheckLog check{log};
  const auto& r = sim.report;
  check.expect(mismatches == 0, "logits bit-equal to the integer reference");
  check.expect(r.stall_count == 0, "zero stalls");
  check.expect(r.fifo_overflows == 0, "no FIFO overflow");
  check.expect(r.latency_max <= 3 * accel::kFrameCycles, "latency " + std::to_string(r.latency_max) + " <= 1920 cycles");
  check.expect(r.stage("llds").er_num() == r.stage("llds").er_den(), "LLDS E/R = 1");
  for (const char* s : {"conv1", "conv2"}) {
    check.expect(3 * r.stage(s).er_num() == r.stage(s).er_den(), std::string(s) + " E/R = 1/3");
  }
  return check.ok ? 0 : kCheckFailed;
}

int cmd_decode_covert(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  ensure_out_dir(cfg);
  const std::string data = cfg.data_path();
  const auto store = dataset::read(data);
  covert::AttackSpec spec;
  try {
    spec = dataset::GenerationConfig::from_json(store.manifest).attack;
  } catch (const Error&) {
    spec = generation_config(cfg).attack;  // ingested captures carry no generation record
  }
  const auto report = eve::sweep_covert_ber(store, spec, cfg.threads);
  const std::string path = cfg.out("covert_ber.csv");
  write_text_file(path, report.to_csv());
  write_manifest(cfg, "covert_ber.csv", "decode-covert", dataset_lineage(store), {{basename(data), file_hash(data)}},
                 {path});
  log << report.to_csv();
  return 0;
}

int cmd_ablate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  ensure_out_dir(cfg);
  const std::string data = cfg.data_path();
  const auto store = dataset::read(data);
  const auto task = nn::task_from_name(cfg.task);
  const Sets sets = load_sets(store, cfg.seed, task);
  nn::DetectorConfig base;
  base.num_classes = task == nn::Task::binary ? 2 : covert::kNumClasses;
  base.cf = cfg.cf;
  nn::TrainConfig tc;
  tc.lr = cfg.lr;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.task = task;
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < cfg.ablation_seeds; ++i) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));
  const nn::AblationData ad{&sets.train, &sets.val, &sets.test};
  nn::AblationTable table;
  if (cfg.ablation == "cf") {
    table = nn::ablate_cf(ad, cfg.cf_list, base, tc, seeds);
  } else {
    std::vector<nn::Activation> acts;
    for (const auto& a : cfg.activations) acts.push_back(nn::activation_from_name(a));
    table = nn::ablate_llds_activation(ad, acts, base, tc, seeds);
  }
  const std::string path = cfg.out("ablation_" + cfg.ablation + ".csv");
  write_text_file(path, table.to_csv());
  write_manifest(cfg, basename(path), "ablate", dataset_lineage(store), {{basename(data), file_hash(data)}}, {path});
  log << table.to_csv();
  return 0;
}

int cmd_report(const RunConfig& cfg, std::ostream& log) {
  if (!fs::is_directory(cfg.out_dir)) throw IoError("no such directory " + cfg.out_dir);
  std::vector<fs::path> manifests;
  for (const auto& e : fs::directory_iterator(cfg.out_dir)) {
    const std::string name = e.path().filename().string();
    if (name.ends_with(".manifest.json") && name != "report.md.manifest.json") manifests.push_back(e.path());
  }
  std::sort(manifests.begin(), manifests.end());
  if (manifests.empty()) throw ConfigError("no artifact manifests in " + cfg.out_dir);

  std::set<std::string> lineages;
  std::map<std::string, std::string> inputs;
  for (const auto& p : manifests) {
    json m;
    try {
      const auto b = read_file(p.string());
      m = json::parse(b.begin(), b.end());
      lineages.insert(m.at("lineage").get<std::string>());
      for (const auto& [rel, h] : m.at("files").items()) {
        const std::string f = cfg.out(rel);
        if (!fs::exists(f)) throw ConfigError("artifact " + rel + " listed in " + p.filename().string() + " is missing");
        if (file_hash(f) != h.get<std::string>()) {
          throw ConfigError("artifact " + rel + " changed since " + p.filename().string() + " was written");
        }
        inputs[rel] = h.get<std::string>();
      }
      for (const auto& [name, h] : m.at("inputs").items()) {
        const std::string f = cfg.out(name);
        if (fs::exists(f) && file_hash(f) != h.get<std::string>()) {
          throw ConfigError(p.filename().string() + " was produced from a different " + name);
        }
      }
    } catch (const json::exception& e) {
      throw FormatError("bad manifest " + p.string() + ": " + e.what());
    }
  }
  if (lineages.size() != 1) {
    std::string all;
    for (const auto& l : lineages) all += (all.empty() ? "" : ", ") + l;
    throw ConfigError("artifacts come from different datasets (lineages " + all + ")");
  }
  const std::string lineage = *lineages.begin();

  std::ostringstream md;
  md << "# Pipeline report\n\nDataset lineage `" << lineage << "`, " << manifests.size() << " artifact manifests.\n";
  const std::string data = cfg.out(kDatasetFile);
  if (fs::exists(data)) {
    const auto store = dataset::read(data);
    md << "\n## Dataset\n\n" << store.frame_count() << " frames in " << store.elements.size() << " elements.\n";
  }
  if (fs::exists(cfg.model_path())) {
    const auto cp = nn::load_checkpoint(cfg.model_path());
    const ModelMeta meta = parse_meta(cp.manifest, cfg.model_path());
    md << "\n## Model\n\n" << cp.model.param_count() << " parameters (" << cp.model.llds_param_count()
       << " in the LLDS block), " << cp.model.macs() << " MACs per frame, task " << nn::task_name(meta.task)
       << ", weights from epoch " << meta.raw.value("best_epoch", 0) << ".\n";
  }
  std::map<std::string, json> evals;
  for (const char* p : {"float", "quantized", "accel_sim"}) {
    const std::string t = read_text_if(cfg.out(std::string("eval_") + p + ".json"));
    if (!t.empty()) evals[p] = json::parse(t);
  }
  if (!evals.empty()) {
    md << "\n## Accuracy versus SNR\n\n| path | SNR (dB) | binary | multiclass |\n|---|---|---|---|\n";
    for (const auto& [p, j] : evals) {
      for (const auto& row : j.at("per_snr")) {
        md << "| " << p << " | " << row.at("snr_db").get<std::string>() << " | "
           << fmt(row.at("binary_accuracy").get<double>(), 4) << " | "
           << fmt(row.at("multiclass_accuracy").get<double>(), 4) << " |\n";
      }
      md << "| " << p << " | mean | " << fmt(j.at("avg_binary").get<double>(), 4) << " | "
         << fmt(j.at("avg_multiclass").get<double>(), 4) << " |\n";
    }
  }
  auto section = [&](const std::string& title, const std::string& file) {
    const std::string t = read_text_if(cfg.out(file));
    if (!t.empty()) md << "\n## " << title << "\n\n```\n" << t << "```\n";
  };
  section("Accelerator", "accel_summary.txt");
  section("Covert channel bit error rate", "covert_ber.csv");
  section("Compression factor ablation", "ablation_cf.csv");
  section("LLDS activation ablation", "ablation_activation.csv");

  const std::string path = cfg.out("report.md");
  write_text_file(path, md.str());
  write_manifest(cfg, "report.md", "report", lineage, inputs, {path});
  log << "wrote " << path << "\n";
  return 0;
}

}  // namespace htcc::cli
