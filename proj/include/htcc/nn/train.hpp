#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "htcc/dataset/dataset.hpp"
#include "htcc/nn/model.hpp"

namespace htcc::nn {

enum class Task { binary, multiclass };
std::string_view task_name(Task t);
Task task_from_name(std::string_view name);

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 64;
  int epochs = 30;
  std::uint64_t seed = 1;
  Task task = Task::multiclass;

  void validate() const;
  std::string to_json() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0, train_acc = 0.0;
  double val_loss = 0.0, val_acc = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;  // the returned weights are from this epoch
  std::string to_csv() const;
};

struct LossAccuracy {
  double loss = 0.0;
  double accuracy = 0.0;
};

LossAccuracy evaluate_loss(const Model& model, const dataset::LabeledSet& set);
std::vector<int> predict(const Model& model, const dataset::LabeledSet& set);

using EpochCallback = std::function<void(const EpochStats&)>;

// Mini-batch Adam on softmax cross-entropy, single-threaded. The model is
// initialised from cfg.seed; the weights of the epoch with the best
// validation accuracy (first on ties) are kept. Throws NumericError when the
// loss stops being finite.
TrainHistory train(Model& model, const dataset::LabeledSet& train_set, const dataset::LabeledSet& val_set,
                   const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct GradCheckResult {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::vector<std::string> layers_covered;
};

// Central finite differences against backward() on `n_params` parameters
// drawn at random (stratified so every parameterised layer is hit).
// rel = |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
GradCheckResult gradient_check(Model model, const dataset::LabeledSet& set, std::size_t n_params, std::uint64_t seed,
                               double eps = 1e-5);

}  // namespace htcc::nn
