#pragma once
// Compression-factor and LLDS-activation sweeps, each configuration
// trained from scratch on the same data and seeds.

#include <string>
#include <vector>

#include "htcc/nn/train.hpp"

namespace htcc::nn {

struct AblationRow {
  std::string label;
  int cf = 0;
  int llds_out_length = 0;
  std::size_t params = 0;
  std::uint64_t macs = 0;
  double accuracy = 0.0;  // mean test accuracy over seeds
  double drop = 0.0;      // reference accuracy minus this accuracy, in points
};

struct AblationTable {
  std::string reference;
  std::vector<AblationRow> rows;
  std::string to_csv() const;
};

struct AblationData {
  const dataset::LabeledSet* train = nullptr;
  const dataset::LabeledSet* val = nullptr;
  const dataset::LabeledSet* test = nullptr;
};

// The reference row is the uncompressed cf = 1 model.
AblationTable ablate_cf(const AblationData& data, const std::vector<int>& cf_list, const DetectorConfig& base,
                        const TrainConfig& train_cfg, const std::vector<std::uint64_t>& seeds);
// The reference row is the linear LLDS.
AblationTable ablate_llds_activation(const AblationData& data, const std::vector<Activation>& acts,
                                     const DetectorConfig& base, const TrainConfig& train_cfg,
                                     const std::vector<std::uint64_t>& seeds);

}  // namespace htcc::nn
