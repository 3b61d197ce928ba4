#pragma once
// Pipeline commands behind the `htcc` tool. Each command reads and writes
// files in RunConfig::out_dir and leaves a `<artifact>.manifest.json` next to
// every artifact it produces (run config, its hash, lineage, input hashes).

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace htcc::cli {

struct RunConfig {
  // general
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int threads = 1;
  std::string scale = "desk";  // desk | full
  std::string isa = "auto";    // auto | scalar | avx2
  bool check = false;

  // dataset
  int frames_per_element = 0;  // 0: scale default
  int acquisitions = 2;
  std::vector<double> snr_grid;  // empty: scale default
  bool impairments = true;
  bool fixed_reference_power = false;

  // attack
  double alpha = 0.9;
  double jitter_sigma_ratio = 0.5;
  double evm_distortion_db = -25.0;
  double envelope_factor = 0.8;

  // input artifacts; empty means the default file in out_dir
  std::string data;
  std::string model;
  std::string qmodel;

  // train
  std::string task = "multiclass";
  int cf = 5;
  int epochs = 30;
  double lr = 1e-3;
  int batch_size = 64;
  std::string llds_activation = "linear";

  // quantize
  std::string rounding = "truncate";
  int calibration_frames = 512;

  // accel
  double clock_hz = 200e6;
  int fifo_depth = 0;
  int fc_mac_lanes = 0;
  int frames = 1000;
  std::vector<int> sweep_depths = {2, 4, 8, 16, 32, 64, 128, 256};

  // eval
  std::vector<std::string> paths = {"float"};

  // ablate
  std::string ablation = "cf";  // cf | activation
  std::vector<int> cf_list = {1, 2, 3, 4, 5, 6};
  std::vector<std::string> activations = {"linear", "relu", "tanh", "sigmoid", "leaky_relu"};
  int ablation_seeds = 1;

  // Result-affecting settings only: no output directory, file locations or
  // thread count, so runs in different directories hash identically.
  std::string to_json() const;
  std::string hash() const;
  void validate() const;  // throws ConfigError

  std::string data_path() const;
  std::string model_path() const;
  std::string qmodel_path() const;
  std::string out(const std::string& name) const;
};

// Default artifact names inside out_dir.
inline constexpr const char* kDatasetFile = "dataset.htcc";
inline constexpr const char* kModelFile = "model.htcm";
inline constexpr const char* kQuantizedFile = "model.htcq";

// Exit status for a failed --check.
inline constexpr int kCheckFailed = 1;

int cmd_generate(const RunConfig& cfg, std::ostream& log);
int cmd_train(const RunConfig& cfg, std::ostream& log);
int cmd_eval(const RunConfig& cfg, std::ostream& log);
int cmd_quantize(const RunConfig& cfg, std::ostream& log);
int cmd_sim_accel(const RunConfig& cfg, std::ostream& log);
int cmd_decode_covert(const RunConfig& cfg, std::ostream& log);
int cmd_ablate(const RunConfig& cfg, std::ostream& log);
int cmd_report(const RunConfig& cfg, std::ostream& log);

// Applies --isa; throws ConfigError for unknown or unavailable ISAs.
void apply_isa(const std::string& isa);

}  // namespace htcc::cli
