#pragma once
// Accuracy versus SNR, per-class accuracy and confusion matrices for the
// float, quantized and simulated-accelerator inference paths.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "htcc/accel/accel.hpp"
#include "htcc/dataset/dataset.hpp"
#include "htcc/nn/model.hpp"
#include "htcc/quant/quantizer.hpp"

namespace htcc::eval {

enum class InferencePath { float_model, quantized, accel_sim };
std::string_view path_name(InferencePath p);
InferencePath path_from_name(std::string_view s);

struct SnrResult {
  double snr_db = 0.0;
  std::uint64_t frames = 0;
  double binary_accuracy = 0.0;
  double multiclass_accuracy = 0.0;
  std::vector<double> per_class;                    // recall per true class
  std::vector<std::vector<std::uint64_t>> counts;   // [true][pred]
  std::vector<std::vector<double>> confusion;       // row-normalized counts
  std::vector<std::vector<std::uint64_t>> binary_counts;  // 2 x 2, class 0 vs the rest
};

struct EvalResult {
  InferencePath path = InferencePath::float_model;
  int num_classes = 0;
  std::vector<SnrResult> per_snr;  // ascending SNR
  double avg_binary = 0.0;         // unweighted mean over SNR points
  double avg_multiclass = 0.0;

  const SnrResult& at(double snr_db) const;  // throws ConfigError when absent
  bool has(double snr_db) const;
  double mean_multiclass(const std::vector<double>& snrs) const;
  double mean_binary(const std::vector<double>& snrs) const;
  // Informational trend check.
  double spearman_snr_multiclass() const;
  std::string to_json() const;
};

// Binary accuracy collapses every label and prediction other than 0 into one
// infected class. Throws ConfigError for an empty (SNR, class) cell or
// mismatched sizes.
EvalResult evaluate_predictions(const std::vector<int>& labels, const std::vector<int>& predictions,
                                const std::vector<float>& snr_db, int num_classes, InferencePath path);

EvalResult evaluate(const nn::Model& model, const dataset::LabeledSet& test, int threads = 1);
EvalResult evaluate(const quant::QuantizedModel& qm, const dataset::LabeledSet& test, int threads = 1);
EvalResult evaluate_accel(const quant::QuantizedModel& qm, const dataset::LabeledSet& test,
                          const accel::AccelConfig& cfg = {}, accel::AccelReport* report = nullptr);

std::vector<int> predict_quantized(const quant::QuantizedModel& qm, const dataset::LabeledSet& set, int threads = 1);

// Writes into `dir`:
//   curves.csv     path,task,snr_db,accuracy,frames
//   per_class.csv  path,snr_db,class,accuracy,frames
//   {path}_{task}_{snr}.csv and {path}_{task}_{snr}_counts.csv for each SNR
//   in `confusion_snrs` present in a result.
// Returns the list of files written.
std::vector<std::string> emit_curves(const std::vector<EvalResult>& results, const std::string& dir,
                                     const std::vector<double>& confusion_snrs = {13.0, 25.0});

std::string curves_csv(const std::vector<EvalResult>& results);
std::string per_class_csv(const std::vector<EvalResult>& results);
std::string confusion_csv(const EvalResult& r, double snr_db, bool binary, bool raw_counts);
std::string snr_label(double snr_db);

}  // namespace htcc::eval
