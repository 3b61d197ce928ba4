// htcc: dataset synthesis, detector training, quantization, accelerator
// simulation and reporting.
//
// Config files are INI: top-level keys set global options, and a [command]
// section sets that command's options, e.g.
//
//   seed = 7
//   [train]
//   epochs = 20
//
// Flags given on the command line override the file.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "htcc/cli/commands.hpp"
#include "htcc/common/error.hpp"
#include "htcc/simd/kernels.hpp"

namespace {

using htcc::cli::RunConfig;

void dataset_options(CLI::App* c, RunConfig& r) {
  c->add_option("--frames", r.frames_per_element, "Frames per (class, SNR, acquisition); 0 uses the scale default");
  c->add_option("--acquisitions", r.acquisitions, "Acquisitions per (class, SNR)");
  c->add_option("--snr-grid", r.snr_grid, "Comma-separated SNR points in dB")->delimiter(',');
  c->add_option("--impairments", r.impairments, "Apply hardware impairments (true/false)");
  c->add_option("--fixed-reference-power", r.fixed_reference_power, "Reference noise to nominal power");
  c->add_option("--alpha", r.alpha, "HT1 amplitude factor");
  c->add_option("--jitter", r.jitter_sigma_ratio, "HT3 jitter std as a fraction of the dispersion radius");
  c->add_option("--evm-db", r.evm_distortion_db, "HT3 cover distortion EVM in dB");
  c->add_option("--envelope", r.envelope_factor, "HT4 envelope factor for '0' bits");
}

void train_options(CLI::App* c, RunConfig& r) {
  c->add_option("--task", r.task, "binary or multiclass")->check(CLI::IsMember({"binary", "multiclass"}));
  c->add_option("--cf", r.cf, "LLDS compression factor")->check(CLI::Range(1, 64));
  c->add_option("--epochs", r.epochs, "Training epochs");
  c->add_option("--lr", r.lr, "Adam learning rate");
  c->add_option("--batch-size", r.batch_size, "Mini-batch size");
  c->add_option("--llds-activation", r.llds_activation, "LLDS activation");
}

void accel_options(CLI::App* c, RunConfig& r) {
  c->add_option("--clock-hz", r.clock_hz, "Accelerator clock");
  c->add_option("--fifo-depth", r.fifo_depth, "FIFO depth in values; 0 = 2 x LLDS output length");
  c->add_option("--fc-lanes", r.fc_mac_lanes, "Dense MAC lanes; 0 = fit one frame duration");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig r;
  CLI::App app{"Covert-channel detector pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<CLI::ConfigINI>());
  app.set_config("--config", "", "INI config file");
  app.add_option("--out", r.out_dir, "Output directory")->envname("HTCC_OUT_DIR");
  app.add_option("--seed", r.seed, "Master seed");
  app.add_option("--threads", r.threads, "Worker threads; 1 is the bit-reproducible mode")->check(CLI::PositiveNumber);
  app.add_option("--scale", r.scale, "Dataset scale")->check(CLI::IsMember({"desk", "full"}));
  app.add_option("--isa", r.isa, "Kernel ISA")->check(CLI::IsMember({"auto", "scalar", "avx2"}));
  app.add_flag("--check", r.check, "Fail with exit status 1 when acceptance thresholds are missed");
  app.add_option("--data", r.data, "Dataset file (default: <out>/dataset.htcc)");
  app.add_option("--model", r.model, "Float checkpoint (default: <out>/model.htcm)");
  app.add_option("--qmodel", r.qmodel, "Quantized model (default: <out>/model.htcq)");

  auto* gen = app.add_subcommand("generate", "Synthesize the labeled frame corpus");
  dataset_options(gen, r);

  auto* train = app.add_subcommand("train", "Train the detector");
  train_options(train, r);

  auto* ev = app.add_subcommand("eval", "Accuracy versus SNR for float, quantized or accelerator inference");
  ev->add_option("--path", r.paths, "float, quantized, accel_sim (comma-separated)")->delimiter(',');
  accel_options(ev, r);

  auto* q = app.add_subcommand("quantize", "Post-training quantization with activation calibration");
  q->add_option("--rounding", r.rounding, "truncate or round_nearest")
      ->check(CLI::IsMember({"truncate", "round_nearest"}));
  q->add_option("--calibration-frames", r.calibration_frames, "Calibration frames (at least 256)");

  auto* sim = app.add_subcommand("sim-accel", "Cycle-level accelerator simulation");
  sim->add_option("--frames", r.frames, "Back-to-back frames to stream");
  sim->add_option("--sweep", r.sweep_depths, "FIFO depths to sweep (comma-separated)")->delimiter(',');
  accel_options(sim, r);

  auto* dec = app.add_subcommand("decode-covert", "Eavesdropper covert bit error rate per attack and SNR");
  dataset_options(dec, r);

  auto* abl = app.add_subcommand("ablate", "Compression-factor or LLDS-activation sweep");
  abl->add_option("--kind", r.ablation, "cf or activation")->check(CLI::IsMember({"cf", "activation"}));
  abl->add_option("--cf-list", r.cf_list, "Compression factors (comma-separated)")->delimiter(',');
  abl->add_option("--activations", r.activations, "Activations (comma-separated)")->delimiter(',');
  abl->add_option("--seeds", r.ablation_seeds, "Seeds averaged per configuration");
  train_options(abl, r);

  app.add_subcommand("report", "Collect artifacts into report.md, refusing mixed lineages");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(htcc::ErrorKind::config);
  }

  try {
    htcc::cli::apply_isa(r.isa);
    std::clog << "kernels: " << htcc::simd::isa_name(htcc::simd::active_isa()) << "\n";
    std::ostream& log = std::cout;
    if (gen->parsed()) return htcc::cli::cmd_generate(r, log);
    if (train->parsed()) return htcc::cli::cmd_train(r, log);
    if (ev->parsed()) return htcc::cli::cmd_eval(r, log);
    if (q->parsed()) return htcc::cli::cmd_quantize(r, log);
    if (sim->parsed()) return htcc::cli::cmd_sim_accel(r, log);
    if (dec->parsed()) return htcc::cli::cmd_decode_covert(r, log);
    if (abl->parsed()) return htcc::cli::cmd_ablate(r, log);
    return htcc::cli::cmd_report(r, log);
  } catch (const htcc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 70;
  }
}
