#include "htcc/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "htcc/common/byte_io.hpp"
#include "htcc/common/error.hpp"
#include "htcc/common/parallel.hpp"
#include "htcc/covert/injector.hpp"
#include "htcc/nn/train.hpp"

namespace htcc::eval {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string class_name(int c, int num_classes) {
  if (num_classes == covert::kNumClasses) return std::string(covert::attack_name(static_cast<covert::AttackKind>(c)));
  if (num_classes == 2) return c == 0 ? "clean" : "infected";
  return "class" + std::to_string(c);
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

std::string_view path_name(InferencePath p) {
  switch (p) {
    case InferencePath::float_model: return "float";
    case InferencePath::quantized: return "quantized";
    case InferencePath::accel_sim: return "accel_sim";
  }
  return "?";
}

InferencePath path_from_name(std::string_view s) {
  if (s == "float") return InferencePath::float_model;
  if (s == "quantized") return InferencePath::quantized;
  if (s == "accel_sim") return InferencePath::accel_sim;
  throw ConfigError("unknown inference path '" + std::string(s) + "' (float, quantized, accel_sim)");
}

std::string snr_label(double snr_db) {
  if (std::isinf(snr_db)) return snr_db > 0 ? "inf" : "-inf";
  if (snr_db == std::round(snr_db)) return std::to_string(static_cast<long long>(snr_db));
  return fmt(snr_db);
}

bool EvalResult::has(double snr_db) const {
  return std::any_of(per_snr.begin(), per_snr.end(), [&](const SnrResult& r) { return r.snr_db == snr_db; });
}

const SnrResult& EvalResult::at(double snr_db) const {
  for (const auto& r : per_snr) {
    if (r.snr_db == snr_db) return r;
  }
  throw ConfigError("no evaluation results at " + snr_label(snr_db) + " dB");
}

double EvalResult::mean_multiclass(const std::vector<double>& snrs) const {
  double s = 0.0;
  for (double v : snrs) s += at(v).multiclass_accuracy;
  return snrs.empty() ? 0.0 : s / static_cast<double>(snrs.size());
}

double EvalResult::mean_binary(const std::vector<double>& snrs) const {
  double s = 0.0;
  for (double v : snrs) s += at(v).binary_accuracy;
  return snrs.empty() ? 0.0 : s / static_cast<double>(snrs.size());
}

double EvalResult::spearman_snr_multiclass() const {
  const std::size_t n = per_snr.size();
  if (n < 2) return 0.0;
  std::vector<double> x, y;
  for (const auto& r : per_snr) {
    x.push_back(r.snr_db);
    y.push_back(r.multiclass_accuracy);
  }
  const auto rx = ranks(x), ry = ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxx == 0 || syy == 0 ? 0.0 : sxy / std::sqrt(sxx * syy);
}

std::string EvalResult::to_json() const {
  json j = {{"path", path_name(path)},
            {"num_classes", num_classes},
            {"avg_binary", avg_binary},
            {"avg_multiclass", avg_multiclass}};
  json rows = json::array();
  for (const auto& r : per_snr) {
    rows.push_back({{"snr_db", snr_label(r.snr_db)},
                    {"frames", r.frames},
                    {"binary_accuracy", r.binary_accuracy},
                    {"multiclass_accuracy", r.multiclass_accuracy},
                    {"per_class", r.per_class},
                    {"counts", r.counts}});
  }
  j["per_snr"] = rows;
  return j.dump(1);
}

EvalResult evaluate_predictions(const std::vector<int>& labels, const std::vector<int>& predictions,
                                const std::vector<float>& snr_db, int num_classes, InferencePath path) {
  if (labels.size() != predictions.size() || labels.size() != snr_db.size()) {
    throw ConfigError("labels, predictions and SNRs differ in length");
  }
  if (labels.empty()) throw ConfigError("empty test set");
  if (num_classes < 2) throw ConfigError("need at least two classes");
  const auto k = static_cast<std::size_t>(num_classes);
  std::map<double, std::vector<std::vector<std::uint64_t>>> cells;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes || predictions[i] < 0 || predictions[i] >= num_classes) {
      throw ConfigError("label or prediction outside [0, " + std::to_string(num_classes) + ")");
    }
    auto& m = cells[snr_db[i]];
    if (m.empty()) m.assign(k, std::vector<std::uint64_t>(k, 0));
    ++m[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
  }
  EvalResult res;
  res.path = path;
  res.num_classes = num_classes;
  for (const auto& [snr, m] : cells) {
    SnrResult r;
    r.snr_db = snr;
    r.counts = m;
    r.confusion.assign(k, std::vector<double>(k, 0.0));
    r.binary_counts.assign(2, std::vector<std::uint64_t>(2, 0));
    std::uint64_t correct = 0;
    for (std::size_t a = 0; a < k; ++a) {
      const std::uint64_t row = std::accumulate(m[a].begin(), m[a].end(), std::uint64_t{0});
      if (row == 0) {
        throw ConfigError("empty evaluation cell: class " + class_name(static_cast<int>(a), num_classes) + " at " +
                          snr_label(snr) + " dB");
      }
      r.frames += row;
      correct += m[a][a];
      for (std::size_t b = 0; b < k; ++b) {
        r.confusion[a][b] = static_cast<double>(m[a][b]) / static_cast<double>(row);
        r.binary_counts[a == 0 ? 0 : 1][b == 0 ? 0 : 1] += m[a][b];
      }
      r.per_class.push_back(static_cast<double>(m[a][a]) / static_cast<double>(row));
    }
    r.multiclass_accuracy = static_cast<double>(correct) / static_cast<double>(r.frames);
    r.binary_accuracy = static_cast<double>(r.binary_counts[0][0] + r.binary_counts[1][1]) / static_cast<double>(r.frames);
    res.avg_binary += r.binary_accuracy;
    res.avg_multiclass += r.multiclass_accuracy;
    res.per_snr.push_back(std::move(r));
  }
  res.avg_binary /= static_cast<double>(res.per_snr.size());
  res.avg_multiclass /= static_cast<double>(res.per_snr.size());
  return res;
}

EvalResult evaluate(const nn::Model& model, const dataset::LabeledSet& test, int threads) {
  std::vector<int> pred(test.size());
  run_parallel(test.size(), threads, [&](std::size_t i) {
    thread_local nn::Workspace ws;
    ws.prepare(model);
    model.forward(test.input(i), ws);
    pred[i] = nn::argmax(ws.logits());
  });
  return evaluate_predictions(test.labels, pred, test.snr_db, model.num_classes(), InferencePath::float_model);
}

std::vector<int> predict_quantized(const quant::QuantizedModel& qm, const dataset::LabeledSet& set, int threads) {
  std::vector<int> pred(set.size());
  run_parallel(set.size(), threads, [&](std::size_t i) {
    const auto logits = quant::quantized_forward(qm, set.input(i));
    pred[i] = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  });
  return pred;
}

EvalResult evaluate(const quant::QuantizedModel& qm, const dataset::LabeledSet& test, int threads) {
  return evaluate_predictions(test.labels, predict_quantized(qm, test, threads), test.snr_db, qm.num_classes(),
                              InferencePath::quantized);
}

EvalResult evaluate_accel(const quant::QuantizedModel& qm, const dataset::LabeledSet& test,
                          const accel::AccelConfig& cfg, accel::AccelReport* report) {
  std::vector<std::span<const double>> frames;
  frames.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) frames.push_back(test.input(i));
  accel::SimResult sim = accel::simulate_stream(qm, frames, cfg);
  std::vector<int> pred(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& l = sim.logits[i];
    pred[i] = static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin());
  }
  if (report) *report = std::move(sim.report);
  return evaluate_predictions(test.labels, pred, test.snr_db, qm.num_classes(), InferencePath::accel_sim);
}

std::string curves_csv(const std::vector<EvalResult>& results) {
  std::ostringstream os;
  os << "path,task,snr_db,accuracy,frames\n";
  for (const auto& r : results) {
    for (const char* task : {"binary", "multiclass"}) {
      for (const auto& s : r.per_snr) {
        const double acc = task[0] == 'b' ? s.binary_accuracy : s.multiclass_accuracy;
        os << path_name(r.path) << ',' << task << ',' << snr_label(s.snr_db) << ',' << fmt(acc) << ',' << s.frames
           << '\n';
      }
    }
  }
  return os.str();
}

std::string per_class_csv(const std::vector<EvalResult>& results) {
  std::ostringstream os;
  os << "path,snr_db,class,accuracy,frames\n";
  for (const auto& r : results) {
    for (const auto& s : r.per_snr) {
      for (std::size_t c = 0; c < s.per_class.size(); ++c) {
        const auto row = std::accumulate(s.counts[c].begin(), s.counts[c].end(), std::uint64_t{0});
        os << path_name(r.path) << ',' << snr_label(s.snr_db) << ',' << class_name(static_cast<int>(c), r.num_classes)
           << ',' << fmt(s.per_class[c]) << ',' << row << '\n';
      }
    }
  }
  return os.str();
}

std::string confusion_csv(const EvalResult& r, double snr_db, bool binary, bool raw_counts) {
  const SnrResult& s = r.at(snr_db);
  const int k = binary ? 2 : r.num_classes;
  std::ostringstream os;
  os << "true\\pred";
  for (int b = 0; b < k; ++b) os << ',' << class_name(b, k);
  os << '\n';
  for (int a = 0; a < k; ++a) {
    os << class_name(a, k);
    const auto& row = binary ? s.binary_counts[static_cast<std::size_t>(a)] : s.counts[static_cast<std::size_t>(a)];
    const auto total = std::accumulate(row.begin(), row.end(), std::uint64_t{0});
    for (int b = 0; b < k; ++b) {
      const auto v = row[static_cast<std::size_t>(b)];
      if (raw_counts) {
        os << ',' << v;
      } else {
        os << ',' << fmt(total == 0 ? 0.0 : static_cast<double>(v) / static_cast<double>(total));
      }
    }
    os << '\n';
  }
  return os.str();
}

std::vector<std::string> emit_curves(const std::vector<EvalResult>& results, const std::string& dir,
                                     const std::vector<double>& confusion_snrs) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  std::vector<std::string> written;
  auto put = [&](const std::string& name, const std::string& text) {
    const std::string p = (std::filesystem::path(dir) / name).string();
    write_text_file(p, text);
    written.push_back(p);
  };
  put("curves.csv", curves_csv(results));
  put("per_class.csv", per_class_csv(results));
  for (const auto& r : results) {
    for (double snr : confusion_snrs) {
      if (!r.has(snr)) continue;
      for (bool binary : {true, false}) {
        const std::string stem =
            std::string(path_name(r.path)) + '_' + (binary ? "binary" : "multiclass") + '_' + snr_label(snr);
        put(stem + ".csv", confusion_csv(r, snr, binary, false));
        put(stem + "_counts.csv", confusion_csv(r, snr, binary, true));
      }
    }
  }
  return written;
}

}  // namespace htcc::eval
