#include "htcc/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "htcc/common/error.hpp"
#include "htcc/common/rng.hpp"

namespace htcc::nn {

std::string_view task_name(Task t) { return t == Task::binary ? "binary" : "multiclass"; }

Task task_from_name(std::string_view name) {
  if (name == "binary") return Task::binary;
  if (name == "multiclass") return Task::multiclass;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("Adam betas must lie in [0,1)");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (epochs < 1) throw ConfigError("epochs must be positive");
}

std::string TrainConfig::to_json() const {
  nlohmann::json j = {{"optimizer", "adam"},
                      {"lr", lr},
                      {"beta1", beta1},
                      {"beta2", beta2},
                      {"adam_eps", adam_eps},
                      {"batch_size", batch_size},
                      {"epochs", epochs},
                      {"seed", std::to_string(seed)},
                      {"task", std::string(task_name(task))},
                      {"precision", "f64"}};
  return j.dump();
}

std::string TrainHistory::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const auto& e : epochs) {
    os << e.epoch << ',' << e.train_loss << ',' << e.train_acc << ',' << e.val_loss << ',' << e.val_acc << '\n';
  }
  return os.str();
}

LossAccuracy evaluate_loss(const Model& model, const dataset::LabeledSet& set) {
  LossAccuracy r;
  if (set.size() == 0) return r;
  Workspace ws;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    model.forward(set.input(i), ws);
    const auto p = softmax(ws.logits());
    r.loss -= std::log(std::max(p[static_cast<std::size_t>(set.labels[i])], 1e-300));
    correct += argmax(ws.logits()) == set.labels[i];
  }
  r.loss /= static_cast<double>(set.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(set.size());
  return r;
}

std::vector<int> predict(const Model& model, const dataset::LabeledSet& set) {
  std::vector<int> out(set.size());
  Workspace ws;
  for (std::size_t i = 0; i < set.size(); ++i) {
    model.forward(set.input(i), ws);
    out[i] = argmax(ws.logits());
  }
  return out;
}

TrainHistory train(Model& model, const dataset::LabeledSet& train_set, const dataset::LabeledSet& val_set,
                   const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.size() == 0) throw ConfigError("training set is empty");
  for (int l : train_set.labels) {
    if (l < 0 || l >= model.num_classes()) throw ConfigError("label outside the model's class range");
  }
  model.init(cfg.seed);

  const std::size_t n_params = model.param_count();
  std::vector<double> grad(n_params), m(n_params, 0.0), v(n_params, 0.0);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Workspace ws;
  std::uint64_t step = 0;

  TrainHistory history;
  std::vector<double> best = model.params();
  double best_acc = -1.0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(derive_seed({cfg.seed, 0xE90Cu, static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double scale = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        model.forward(train_set.input(idx), ws);
        correct += argmax(ws.logits()) == train_set.labels[idx];
        loss_sum += model.backward(ws, train_set.labels[idx], grad, scale);
      }
      if (!std::isfinite(loss_sum)) throw NumericError("training diverged: loss is not finite at epoch " + std::to_string(epoch));

      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      auto& p = model.params();
      for (std::size_t i = 0; i < n_params; ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        p[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_eps);
      }
    }

    EpochStats st;
    st.epoch = epoch;
    st.train_loss = loss_sum / static_cast<double>(order.size());
    st.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    const LossAccuracy val = val_set.size() ? evaluate_loss(model, val_set) : LossAccuracy{st.train_loss, st.train_acc};
    st.val_loss = val.loss;
    st.val_acc = val.accuracy;
    if (!std::isfinite(st.val_loss)) throw NumericError("validation loss is not finite at epoch " + std::to_string(epoch));
    history.epochs.push_back(st);
    if (st.val_acc > best_acc) {
      best_acc = st.val_acc;
      best = model.params();
      history.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(st);
  }
  model.params() = best;
  return history;
}

namespace {

double batch_loss(const Model& model, const dataset::LabeledSet& set, Workspace& ws) {
  double loss = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    model.forward(set.input(i), ws);
    const auto p = softmax(ws.logits());
    loss -= std::log(p[static_cast<std::size_t>(set.labels[i])]);
  }
  return loss / static_cast<double>(set.size());
}

}  // namespace

GradCheckResult gradient_check(Model model, const dataset::LabeledSet& set, std::size_t n_params, std::uint64_t seed,
                               double eps) {
  if (set.size() == 0) throw ConfigError("gradient check needs at least one sample");
  Workspace ws;
  std::vector<double> grad(model.param_count(), 0.0);
  for (std::size_t i = 0; i < set.size(); ++i) {
    model.forward(set.input(i), ws);
    model.backward(ws, set.labels[i], grad, 1.0 / static_cast<double>(set.size()));
  }

  std::vector<std::size_t> param_layers;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    if (model.layer(l).param_count() > 0) param_layers.push_back(l);
  }
  GradCheckResult res;
  for (std::size_t l : param_layers) res.layers_covered.push_back(model.layer(l).name());

  Rng rng(seed);
  auto& p = model.params();
  for (std::size_t k = 0; k < n_params; ++k) {
    const std::size_t l = param_layers[k % param_layers.size()];
    const std::size_t idx = model.layer_offset(l) + rng.below(model.layer(l).param_count());
    const double saved = p[idx];
    p[idx] = saved + eps;
    const double up = batch_loss(model, set, ws);
    p[idx] = saved - eps;
    const double down = batch_loss(model, set, ws);
    p[idx] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double analytic = grad[idx];
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    res.max_rel_error = std::max(res.max_rel_error, rel);
    ++res.checked;
  }
  return res;
}

}  // namespace htcc::nn
