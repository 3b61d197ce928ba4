#pragma once
// Small synthetic inputs shared by the model, quantizer and accelerator tests.

#include <cmath>
#include <cstdint>
#include <vector>

#include "htcc/common/rng.hpp"
#include "htcc/dataset/dataset.hpp"
#include "htcc/nn/model.hpp"

namespace htcc::testing {

inline std::vector<double> random_vec(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

// Class 0 is low-level noise; class 1 adds a strong complex tone.
inline dataset::LabeledSet toy_set(std::size_t per_class, std::uint64_t seed) {
  dataset::LabeledSet s;
  Rng rng(seed);
  for (std::size_t i = 0; i < per_class; ++i) {
    for (int label = 0; label < 2; ++label) {
      for (int c = 0; c < 2; ++c) {
        for (int n = 0; n < nn::kFrameSamples; ++n) {
          double v = 0.1 * rng.normal();
          if (label == 1) v += (c == 0 ? std::cos(0.2 * n) : std::sin(0.2 * n));
          s.inputs.push_back(v);
        }
      }
      s.labels.push_back(label);
      s.snr_db.push_back(20.0f);
    }
  }
  return s;
}

// One frame from each (class, SNR) element of a small generated corpus.
inline dataset::LabeledSet generated_set(double snr_db = 20.0) {
  dataset::GenerationConfig c;
  c.frames_per_element = 10;
  c.acquisitions = 1;
  c.snr_grid = {snr_db};
  const auto store = dataset::generate(c);
  std::vector<dataset::FrameRef> refs;
  for (std::uint32_t e = 0; e < store.elements.size(); ++e) refs.push_back({e, 0});
  return dataset::gather(store, refs);
}

inline std::vector<std::vector<double>> random_frames(std::size_t n, std::uint64_t seed) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_vec(2 * nn::kFrameSamples, seed * 1000 + i, 0.5));
  return out;
}

}  // namespace htcc::testing
