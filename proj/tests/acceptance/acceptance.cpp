// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   acceptance [work_dir] [criteria...]
//
// Criteria 6, 7 and 9 drive the full single-threaded pipeline (generate,
// train, quantize, eval, sim-accel, decode-covert, report) twice in
// work_dir/run_a and work_dir/run_b.

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "htcc/accel/accel.hpp"
#include "htcc/cli/commands.hpp"
#include "htcc/common/rng.hpp"
#include "htcc/eve/decoder.hpp"
#include "htcc/nn/train.hpp"
#include "htcc/ofdm/phy.hpp"

using namespace htcc;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::uint8_t> random_payload(Rng& rng) {
  std::vector<std::uint8_t> p(ofdm::kPayloadBits);
  for (auto& b : p) b = static_cast<std::uint8_t>(rng.bit());
  return p;
}

Outcome phy_correctness() {
  Rng rng(101);
  double worst_rt = 0.0, worst_parseval = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::array<ofdm::Complex, 64> x{};
    for (auto& v : x) v = ofdm::Complex(rng.normal(), rng.normal());
    const auto t = ofdm::idft64(std::span<const ofdm::Complex>(x));
    const auto back = ofdm::dft64(t);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 64; ++i) {
      num = std::max(num, std::abs(back.storage()[i] - x[i]));
      den = std::max(den, std::abs(x[i]));
    }
    worst_rt = std::max(worst_rt, num / den);
    const double ef = ofdm::energy(x), et = ofdm::energy(t);
    worst_parseval = std::max(worst_parseval, std::abs(ef - et) / ef);
  }
  std::uint64_t bits = 0, errors = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto payload = random_payload(rng);
    const auto got = ofdm::demodulate_payload(ofdm::build_frame(payload));
    for (std::size_t i = 0; i < payload.size(); ++i) errors += i >= got.size() || got[i] != payload[i];
    bits += payload.size();
  }
  return {worst_rt < 1e-12 && worst_parseval < 1e-12 && errors == 0,
          "round trip " + fmt(worst_rt, 3) + ", Parseval " + fmt(worst_parseval, 3) + ", payload " +
              std::to_string(bits - errors) + "/" + std::to_string(bits) + " bits"};
}

Outcome injection_exactness() {
  Rng rng(202);
  const auto f = ofdm::build_frame(random_payload(rng));
  covert::AttackSpec spec;
  std::uint64_t errs[3] = {0, 0, 0};
  for (int b = 0; b < 256; ++b) {
    const auto byte = static_cast<std::uint8_t>(b);
    const auto d1 = eve::decode_ht1(eve::equalize_phase(covert::inject_ht1(f, byte, spec.alpha)), spec);
    const auto d2 = eve::decode_ht2(eve::equalize_phase(covert::inject_ht2(f, byte, spec.phase_step_deg)), spec);
    const auto d4 = eve::decode_ht4(covert::inject_ht4(f, byte, spec.envelope_factor), spec);
    errs[0] += static_cast<std::uint64_t>(std::popcount(static_cast<unsigned>(d1 ^ byte)));
    errs[1] += static_cast<std::uint64_t>(std::popcount(static_cast<unsigned>(d2 ^ byte)));
    errs[2] += static_cast<std::uint64_t>(std::popcount(static_cast<unsigned>(d4 ^ byte)));
  }
  covert::AttackSpec s3;
  s3.kind = covert::AttackKind::ht3;
  s3.dispersion_radius = 0.0;
  s3.evm_distortion_db = -INFINITY;
  const auto n3 = static_cast<std::size_t>(s3.bits_per_frame());
  std::uint64_t ht3_errors = 0, ht3_bits = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto frame = ofdm::build_frame(random_payload(rng));
    std::vector<std::uint8_t> bits(n3);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng.bit());
    const auto got = eve::decode_ht3(eve::equalize_phase(covert::inject_ht3(frame, bits, s3, rng.next_u64())), s3);
    for (std::size_t i = 0; i < n3; ++i) ht3_errors += got[i] != bits[i];
    ht3_bits += n3;
  }
  const bool ok = errs[0] == 0 && errs[1] == 0 && errs[2] == 0 && ht3_errors == 0;
  return {ok, "bit errors over 256 bytes HT1 " + std::to_string(errs[0]) + ", HT2 " + std::to_string(errs[1]) +
                  ", HT4 " + std::to_string(errs[2]) + "; HT3 " + std::to_string(ht3_errors) + "/" +
                  std::to_string(ht3_bits)};
}

Outcome covert_ber_ordering() {
  dataset::GenerationConfig g = dataset::GenerationConfig::desk_scale();
  g.frames_per_element = 500;
  g.acquisitions = 2;
  g.snr_grid = {13, 29};
  g.master_seed = 303;
  const auto store = dataset::generate(g);
  const auto report = eve::sweep_covert_ber(store, g.attack, 1);
  bool ok = true;
  std::string detail;
  for (auto kind : {covert::AttackKind::ht1, covert::AttackKind::ht2, covert::AttackKind::ht3, covert::AttackKind::ht4}) {
    const auto* lo = report.find(kind, 13);
    const auto* hi = report.find(kind, 29);
    if (lo == nullptr || hi == nullptr) return {false, "missing BER rows"};
    covert::AttackSpec s;
    s.kind = kind;
    const auto frames = hi->bits / static_cast<std::uint64_t>(s.bits_per_frame());
    bool k_ok = frames >= 1000 && hi->ber() <= lo->ber();
    if (kind == covert::AttackKind::ht3) {
      k_ok = k_ok && hi->ber() < 0.25 && hi->ber() < lo->ber();
    } else {
      k_ok = k_ok && hi->errors == 0;
    }
    ok = ok && k_ok;
    detail += std::string(detail.empty() ? "" : "; ") + std::string(covert::attack_name(kind)) + " " +
              fmt(lo->ber(), 3) + " @13dB, " + fmt(hi->ber(), 3) + " @29dB over " + std::to_string(frames) + " frames";
  }
  return {ok, detail};
}

Outcome model_budget() {
  const auto m = nn::build_detector(5, 5);
  const double n = static_cast<double>(m.param_count());
  bool ok = std::abs(n - 36851.0) / 36851.0 <= 0.05 && m.llds_param_count() == 42 &&
            n <= 0.25 * static_cast<double>(nn::kBaselineParams);
  std::string detail = "cf5 " + std::to_string(m.param_count()) + " params, LLDS " +
                       std::to_string(m.llds_param_count()) + " (" +
                       fmt(100.0 * static_cast<double>(m.llds_param_count()) / n, 2) + "%); sweep";
  const std::vector<std::pair<int, double>> table = {{2, 92135}, {3, 61323}, {5, 36851}, {6, 30519}};
  for (const auto& [cf, target] : table) {
    const double c = static_cast<double>(nn::build_detector(cf, 5).param_count());
    const double dev = (c - target) / target;
    ok = ok && std::abs(dev) <= 0.05;
    detail += " cf" + std::to_string(cf) + " " + fmt(100.0 * dev, 2) + "%";
  }
  return {ok, detail};
}

Outcome gradient_correctness() {
  dataset::GenerationConfig c;
  c.frames_per_element = 10;
  c.acquisitions = 1;
  c.snr_grid = {20};
  const auto store = dataset::generate(c);
  std::vector<dataset::FrameRef> refs;
  for (std::uint32_t e = 0; e < store.elements.size(); ++e) refs.push_back({e, 0});
  const auto set = dataset::gather(store, refs);
  nn::Model m = nn::build_detector(5, 5);
  m.init(505);
  const auto r = nn::gradient_check(m, set, 250, 506, 1e-5);
  std::set<std::string> want;
  for (std::size_t i = 0; i < m.num_layers(); ++i) {
    if (m.layer(i).param_count() > 0) want.insert(m.layer(i).name());
  }
  const std::set<std::string> got(r.layers_covered.begin(), r.layers_covered.end());
  return {r.checked >= 200 && r.max_rel_error < 1e-4 && got == want,
          std::to_string(r.checked) + " parameters over " + std::to_string(got.size()) + "/" +
              std::to_string(want.size()) + " layers, max relative error " + fmt(r.max_rel_error, 3)};
}

// Full single-threaded pipeline with default settings.
void run_pipeline(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  cli::RunConfig r;
  r.out_dir = dir.string();
  r.threads = 1;
  std::ofstream log(dir / "pipeline.log");
  const auto t0 = std::chrono::steady_clock::now();
  auto step = [&](const char* name, int (*fn)(const cli::RunConfig&, std::ostream&), const cli::RunConfig& cfg) {
    const int rc = fn(cfg, log);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "  " << dir.filename().string() << ": " << name << " done at " << fmt(s, 4) << " s" << std::endl;
    if (rc != 0) throw std::runtime_error(std::string(name) + " exited with " + std::to_string(rc));
  };
  step("generate", cli::cmd_generate, r);
  step("train", cli::cmd_train, r);
  step("quantize", cli::cmd_quantize, r);
  cli::RunConfig e = r;
  e.paths = {"float", "quantized"};
  step("eval", cli::cmd_eval, e);
  step("sim-accel", cli::cmd_sim_accel, r);
  step("decode-covert", cli::cmd_decode_covert, r);
  step("report", cli::cmd_report, r);
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

double at_snr(const json& eval, const std::string& snr, const char* key) {
  for (const auto& row : eval.at("per_snr")) {
    if (row.at("snr_db").get<std::string>() == snr) return row.at(key).get<double>();
  }
  throw std::runtime_error("no " + snr + " dB row");
}

Outcome detection_accuracy(const fs::path& run) {
  const json f = read_json(run / "eval_float.json");
  double bin = 0.0, mc = 0.0;
  for (const char* s : {"21", "25", "29"}) {
    bin += at_snr(f, s, "binary_accuracy") / 3.0;
    mc += at_snr(f, s, "multiclass_accuracy") / 3.0;
  }
  double ht2 = 1.0;
  std::string ht2_at;
  for (const auto& row : f.at("per_snr")) {
    const double a = row.at("per_class").at(static_cast<std::size_t>(covert::AttackKind::ht2)).get<double>();
    if (a < ht2) ht2 = a, ht2_at = row.at("snr_db").get<std::string>();
  }
  const bool ok = bin >= 0.90 && mc >= 0.85 && ht2 >= 0.99;
  return {ok, "21-29 dB binary " + fmt(bin) + " (>= 0.90), multiclass " + fmt(mc) + " (>= 0.85); worst HT2 " +
                  fmt(ht2) + (ht2_at.empty() ? "" : " at " + ht2_at + " dB") + " (>= 0.99)"};
}

Outcome quantization_gap(const fs::path& run) {
  const json f = read_json(run / "eval_float.json");
  const json q = read_json(run / "eval_quantized.json");
  const double avg_gap = 100.0 * std::abs(f.at("avg_multiclass").get<double>() - q.at("avg_multiclass").get<double>());
  bool ok = avg_gap <= 2.0;
  std::string detail = "mean multiclass gap " + fmt(avg_gap, 3) + " points (<= 2)";
  for (const char* s : {"25", "29"}) {
    const double g = 100.0 * std::abs(at_snr(f, s, "multiclass_accuracy") - at_snr(q, s, "multiclass_accuracy"));
    ok = ok && g <= 0.5;
    detail += ", " + std::string(s) + " dB " + fmt(g, 3) + " (<= 0.5)";
  }
  return {ok, detail};
}

Outcome accelerator(const fs::path& run) {
  const auto qm = quant::load_quantized((run / cli::kQuantizedFile).string());
  const auto store = dataset::read((run / cli::kDatasetFile).string());
  Rng rng(808);
  std::vector<std::vector<double>> frames;
  // 50 held-in dataset frames drawn at random and 50 Gaussian frames.
  for (int i = 0; i < 50; ++i) {
    const auto& el = store.elements[rng.below(store.elements.size())];
    const auto f = el.frame(rng.below(el.frame_count));
    std::vector<double> planar(2 * ofdm::kFrameLength);
    for (int n = 0; n < ofdm::kFrameLength; ++n) {
      planar[static_cast<std::size_t>(n)] = f[static_cast<std::size_t>(2 * n)];
      planar[static_cast<std::size_t>(ofdm::kFrameLength + n)] = f[static_cast<std::size_t>(2 * n + 1)];
    }
    frames.push_back(std::move(planar));
  }
  for (int i = 0; i < 50; ++i) {
    std::vector<double> v(2 * ofdm::kFrameLength);
    for (auto& x : v) x = 0.5 * rng.normal();
    frames.push_back(std::move(v));
  }
  int exact = 0;
  for (const auto& f : frames) exact += accel::simulate_frame(qm, f).logits.at(0) == quant::quantized_forward(qm, f);

  std::vector<std::span<const double>> stream;
  for (int i = 0; i < 1000; ++i) stream.emplace_back(frames[static_cast<std::size_t>(i) % frames.size()]);
  const auto sim = accel::simulate_stream(qm, stream);
  const auto& rep = sim.report;
  bool stream_exact = true;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    stream_exact = stream_exact && sim.logits[i] == quant::quantized_forward(qm, stream[i]);
  }
  const auto& llds = rep.stage("llds");
  bool er_ok = llds.er_num() == llds.er_den();
  for (const char* s : {"conv1", "conv2"}) er_ok = er_ok && 3 * rep.stage(s).er_num() == rep.stage(s).er_den();
  const bool ok = exact == 100 && stream_exact && rep.frames == 1000 && rep.stall_count == 0 &&
                  rep.fifo_overflows == 0 && rep.latency_max <= 3 * accel::kFrameCycles && er_ok;
  return {ok, std::to_string(exact) + "/100 frames bit-exact; 1000-frame stream " +
                  (stream_exact ? std::string("bit-exact") : std::string("MISMATCH")) + ", " +
                  std::to_string(rep.stall_count) + " stalls, " + std::to_string(rep.fifo_overflows) +
                  " overflows, latency " + std::to_string(rep.latency_max) + " cycles (<= 1920), E/R llds " +
                  fmt(llds.er_ratio()) + " conv1 " + fmt(rep.stage("conv1").er_ratio()) + " conv2 " +
                  fmt(rep.stage("conv2").er_ratio())};
}

Outcome reproducibility(const fs::path& a, const fs::path& b) {
  std::vector<std::string> compared, differing;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    const auto ext = e.path().extension().string();
    const bool wanted = ext == ".csv" || ext == ".htcc" || ext == ".htcm" || ext == ".htcq" || ext == ".md" ||
                        ext == ".json";
    if (!wanted) continue;
    compared.push_back(rel.string());
    if (!fs::exists(b / rel) || slurp(e.path()) != slurp(b / rel)) differing.push_back(rel.string());
  }
  std::sort(differing.begin(), differing.end());
  const auto has = [&](const char* name) { return std::find(compared.begin(), compared.end(), name) != compared.end(); };
  const bool core = has(cli::kDatasetFile) && has(cli::kModelFile) && has(cli::kQuantizedFile);
  std::string detail = std::to_string(compared.size() - differing.size()) + "/" + std::to_string(compared.size()) +
                       " artifacts byte-identical (dataset, checkpoints, report and CSVs)";
  for (const auto& d : differing) detail += "; differs: " + d;
  return {core && differing.empty() && compared.size() > 10, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "htcc_acceptance";
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::stoi(argv[i]));
  const auto want = [&](int n) { return only.empty() || only.count(n) > 0; };

  const fs::path run_a = work / "run_a", run_b = work / "run_b";
  bool pipeline_ok = true;
  std::string pipeline_error;
  if (want(6) || want(7) || want(8) || want(9)) {
    try {
      run_pipeline(run_a);
      if (want(9)) run_pipeline(run_b);
    } catch (const std::exception& e) {
      pipeline_ok = false;
      pipeline_error = e.what();
    }
  }

  struct Entry {
    int id;
    const char* name;
    bool needs_pipeline;
    std::function<Outcome()> fn;
  };
  const std::vector<Entry> entries = {
      {1, "DFT/PHY correctness", false, phy_correctness},
      {2, "injection exactness", false, injection_exactness},
      {3, "covert BER ordering", false, covert_ber_ordering},
      {4, "model budget", false, model_budget},
      {5, "gradient correctness", false, gradient_correctness},
      {6, "detection accuracy", true, [&] { return detection_accuracy(run_a); }},
      {7, "quantization gap", true, [&] { return quantization_gap(run_a); }},
      {8, "accelerator equivalence and timing", true, [&] { return accelerator(run_a); }},
      {9, "end-to-end reproducibility", true, [&] { return reproducibility(run_a, run_b); }},
  };
  int failed = 0;
  for (const auto& e : entries) {
    if (!want(e.id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    if (e.needs_pipeline && !pipeline_ok) {
      o = {false, "pipeline failed: " + pipeline_error};
    } else {
      try {
        o = e.fn();
      } catch (const std::exception& ex) {
        o = {false, std::string("error: ") + ex.what()};
      }
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << e.id << " (" << e.name << "): " << o.detail << " ["
              << fmt(s, 3) << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
