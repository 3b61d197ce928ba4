#include "htcc/nn/ablation.hpp"

#include <sstream>

#include "htcc/common/error.hpp"

namespace htcc::nn {

namespace {

AblationRow run(const AblationData& d, const DetectorConfig& cfg, const TrainConfig& tc,
                const std::vector<std::uint64_t>& seeds, std::string label) {
  if (!d.train || !d.val || !d.test) throw ConfigError("ablation needs train, val and test sets");
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  AblationRow row;
  row.label = std::move(label);
  row.cf = cfg.cf;
  row.llds_out_length = llds_output_length(cfg.cf);
  double acc = 0.0;
  for (std::uint64_t s : seeds) {
    Model m(cfg);
    row.params = m.param_count();
    row.macs = m.macs();
    TrainConfig t = tc;
    t.seed = s;
    train(m, *d.train, *d.val, t);
    acc += evaluate_loss(m, *d.test).accuracy;
  }
  row.accuracy = acc / static_cast<double>(seeds.size());
  return row;
}

void fill_drops(AblationTable& t, double reference) {
  for (auto& r : t.rows) r.drop = 100.0 * (reference - r.accuracy);
}

}  // namespace

std::string AblationTable::to_csv() const {
  std::ostringstream os;
  os << "config,cf,llds_out,params,macs,accuracy,drop_points,reference\n";
  for (const auto& r : rows) {
    os << r.label << ',' << r.cf << ",2x" << r.llds_out_length << ',' << r.params << ',' << r.macs << ','
       << r.accuracy << ',' << r.drop << ',' << reference << '\n';
  }
  return os.str();
}

AblationTable ablate_cf(const AblationData& data, const std::vector<int>& cf_list, const DetectorConfig& base,
                        const TrainConfig& train_cfg, const std::vector<std::uint64_t>& seeds) {
  AblationTable t;
  t.reference = "cf1";
  DetectorConfig ref = base;
  ref.cf = 1;
  t.rows.push_back(run(data, ref, train_cfg, seeds, "cf1"));
  for (int cf : cf_list) {
    if (cf == 1) continue;
    DetectorConfig c = base;
    c.cf = cf;
    t.rows.push_back(run(data, c, train_cfg, seeds, "cf" + std::to_string(cf)));
  }
  fill_drops(t, t.rows.front().accuracy);
  return t;
}

AblationTable ablate_llds_activation(const AblationData& data, const std::vector<Activation>& acts,
                                     const DetectorConfig& base, const TrainConfig& train_cfg,
                                     const std::vector<std::uint64_t>& seeds) {
  AblationTable t;
  t.reference = "linear";
  double reference = -1.0;
  for (Activation a : acts) {
    DetectorConfig c = base;
    c.llds_activation = a;
    t.rows.push_back(run(data, c, train_cfg, seeds, std::string(activation_name(a))));
    if (a == Activation::linear) reference = t.rows.back().accuracy;
  }
  if (reference < 0.0) {
    DetectorConfig c = base;
    c.llds_activation = Activation::linear;
    reference = run(data, c, train_cfg, seeds, "linear").accuracy;
  }
  fill_drops(t, reference);
  return t;
}

}  // namespace htcc::nn
