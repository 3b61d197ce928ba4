#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "htcc/common/error.hpp"
#include "htcc/nn/ablation.hpp"
#include "htcc/nn/train.hpp"
#include "fixtures.hpp"

using namespace htcc;
using namespace htcc::nn;
using htcc::testing::random_vec;
using htcc::testing::toy_set;

namespace {

// Direct nested-loop cross-correlation.
std::vector<double> naive_conv(const std::vector<double>& in, int L, const std::vector<double>& w,
                               const std::vector<double>& b, const ConvGeometry& g) {
  const int lout = g.out_length(L);
  std::vector<double> out(static_cast<std::size_t>(g.cout * lout));
  for (int co = 0; co < g.cout; ++co) {
    for (int t = 0; t < lout; ++t) {
      double s = b[static_cast<std::size_t>(co)];
      for (int ci = 0; ci < g.cin; ++ci) {
        for (int j = 0; j < g.kernel; ++j) {
          const int idx = t * g.stride + j - g.pad;
          if (idx >= 0 && idx < L) {
            s += w[static_cast<std::size_t>((co * g.cin + ci) * g.kernel + j)] * in[static_cast<std::size_t>(ci * L + idx)];
          }
        }
      }
      out[static_cast<std::size_t>(co * lout + t)] = s;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("conv1d identity and all-ones kernels") {
  const std::vector<double> x = random_vec(50, 1);
  std::vector<double> out(50);
  conv1d_forward(x, 50, std::vector<double>{0, 1, 0}, std::vector<double>{0}, {1, 1, 3, 1, 1}, out);
  for (int i = 0; i < 50; ++i) CHECK(out[static_cast<std::size_t>(i)] == x[static_cast<std::size_t>(i)]);

  const std::vector<double> ones(20, 1.0);
  std::vector<double> valid(16);
  conv1d_forward(ones, 20, std::vector<double>(5, 1.0), std::vector<double>{0}, {1, 1, 5, 1, 0}, valid);
  for (double v : valid) CHECK(v == 5.0);
}

TEST_CASE("conv1d matches a nested-loop oracle") {
  for (const ConvGeometry g : {ConvGeometry{2, 3, 3, 1, 1}, ConvGeometry{2, 2, 5, 5, 0}, ConvGeometry{4, 3, 7, 1, 3},
                               ConvGeometry{3, 2, 5, 3, 2}, ConvGeometry{1, 1, 1, 2, 0}}) {
    const int L = 37;
    const auto x = random_vec(static_cast<std::size_t>(g.cin * L), 2);
    const auto w = random_vec(static_cast<std::size_t>(g.cout * g.cin * g.kernel), 3);
    const auto b = random_vec(static_cast<std::size_t>(g.cout), 4);
    std::vector<double> out(static_cast<std::size_t>(g.cout * g.out_length(L)));
    conv1d_forward(x, L, w, b, g, out);
    const auto ref = naive_conv(x, L, w, b, g);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i] - ref[i]) < 1e-12);

    // Backward against the oracle's adjoint: dw = sum dout * x, din = sum dout * w.
    const auto dout = random_vec(out.size(), 5);
    std::vector<double> dw(w.size(), 0.0), db(b.size(), 0.0), din(x.size(), 0.0);
    conv1d_backward(x, L, w, g, dout, dw, db, din);
    std::vector<double> dw_ref(w.size(), 0.0), db_ref(b.size(), 0.0), din_ref(x.size(), 0.0);
    const int lout = g.out_length(L);
    for (int co = 0; co < g.cout; ++co) {
      for (int t = 0; t < lout; ++t) {
        const double d = dout[static_cast<std::size_t>(co * lout + t)];
        db_ref[static_cast<std::size_t>(co)] += d;
        for (int ci = 0; ci < g.cin; ++ci) {
          for (int j = 0; j < g.kernel; ++j) {
            const int idx = t * g.stride + j - g.pad;
            if (idx < 0 || idx >= L) continue;
            const auto wi = static_cast<std::size_t>((co * g.cin + ci) * g.kernel + j);
            dw_ref[wi] += d * x[static_cast<std::size_t>(ci * L + idx)];
            din_ref[static_cast<std::size_t>(ci * L + idx)] += d * w[wi];
          }
        }
      }
    }
    for (std::size_t i = 0; i < dw.size(); ++i) CHECK(std::abs(dw[i] - dw_ref[i]) < 1e-12);
    for (std::size_t i = 0; i < db.size(); ++i) CHECK(std::abs(db[i] - db_ref[i]) < 1e-12);
    for (std::size_t i = 0; i < din.size(); ++i) CHECK(std::abs(din[i] - din_ref[i]) < 1e-12);
  }
}

TEST_CASE("LLDS geometry and parameter count") {
  CHECK(llds_output_length(5) == 128);
  CHECK(llds_output_length(6) == 106);
  CHECK(llds_output_length(3) == 212);  // stride formula floor(635 / 3) + 1
  CHECK(llds_output_length(2) == 318);
  CHECK(llds_output_length(4) == 159);
  const Model m = build_detector(5, 5);
  CHECK(m.shape(m.llds_layers()) == Shape{2, 128});
  CHECK(m.llds_param_count() == 42);
  CHECK(LldsInput().param_count() == 20);

  // The 1x3 filter sits centred inside the merged 5-tap kernel.
  std::vector<double> p(20, 0.0);
  p[0] = 1, p[1] = 2, p[2] = 3;       // w3 row 0
  p[6] = 10, p[7] = 20, p[8] = 30, p[9] = 40, p[10] = 50;  // w5 row 0
  const auto k = LldsInput::merged_kernel(p, 0);
  CHECK(k == std::array<double, 5>{10, 21, 32, 43, 50});
}

TEST_CASE("parameter budget across compression factors") {
  const Model m = build_detector(5, 5);
  CHECK(m.param_count() >= 35008);
  CHECK(m.param_count() <= 38694);
  CHECK(static_cast<double>(m.param_count()) <= 0.25 * static_cast<double>(kBaselineParams));
  const std::vector<std::pair<int, double>> table = {{2, 92135}, {3, 61323}, {4, 46063}, {5, 36851}, {6, 30519}};
  for (const auto& [cf, target] : table) {
    const auto n = static_cast<double>(build_detector(cf, 5).param_count());
    CAPTURE(cf);
    CHECK(std::abs(n - target) / target <= 0.05);
  }
  CHECK(build_detector(5, 2).param_count() < m.param_count());
}

TEST_CASE("LLDS share of multiply-accumulates stays small") {
  const Model m = build_detector(5, 5);
  CHECK(m.macs() == 263079);
  CHECK(static_cast<double>(m.llds_macs()) / static_cast<double>(m.macs()) <= 0.05);
}

TEST_CASE("gradient check over every layer type") {
  const auto set = htcc::testing::generated_set();
  Model m = build_detector(5, 5);
  m.init(3);
  const auto r = gradient_check(m, set, 250, 7, 1e-5);
  CHECK(r.checked >= 200);
  CHECK(r.max_rel_error < 1e-4);
  for (const char* name : {"llds_input", "llds_down", "conv1", "conv2", "dense", "output"}) {
    CHECK(std::find(r.layers_covered.begin(), r.layers_covered.end(), name) != r.layers_covered.end());
  }
}

TEST_CASE("gradient check with smooth LLDS activations") {
  // A 1e-5 step can cross a ReLU kink downstream; 1e-6 keeps the
  // difference quotient on one linear piece.
  const auto set = htcc::testing::generated_set();
  for (Activation a : {Activation::tanh, Activation::sigmoid}) {
    DetectorConfig cfg;
    cfg.llds_activation = a;
    Model m = build_detector(cfg);
    m.init(4);
    const auto r = gradient_check(m, set, 60, 8, 1e-6);
    CAPTURE(activation_name(a));
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("softmax normalises and batch order does not matter") {
  const auto s = softmax(std::vector<double>{1000.0, 999.0, -5.0, 0.0, 3.0});
  CHECK(std::abs(std::accumulate(s.begin(), s.end(), 0.0) - 1.0) < 1e-12);
  CHECK(argmax(s) == 0);

  Model m = build_detector(5, 5);
  m.init(9);
  const auto set = toy_set(3, 13);
  Tensor batch({6, 2, kFrameSamples}, set.inputs);
  const Tensor logits = m.forward(batch);
  for (std::size_t i = 0; i < 6; ++i) {
    const auto p = softmax(logits.row(i));
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-9);
  }
  std::vector<double> rev;
  for (int i = 5; i >= 0; --i) {
    const auto r = batch.row(static_cast<std::size_t>(i));
    rev.insert(rev.end(), r.begin(), r.end());
  }
  const Tensor logits_rev = m.forward(Tensor({6, 2, kFrameSamples}, rev));
  for (std::size_t i = 0; i < 6; ++i) {
    const auto a = logits.row(i), b = logits_rev.row(5 - i);
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
  CHECK_THROWS(m.forward(Tensor({2, 2, 100})));
}

TEST_CASE("two-frame toy set is learned") {
  const auto set = toy_set(1, 14);
  Model m = build_detector(5, 2);
  TrainConfig tc;
  tc.epochs = 50;
  tc.batch_size = 2;
  tc.task = Task::binary;
  train(m, set, set, tc);
  const auto pred = predict(m, set);
  CHECK(pred == set.labels);
}

TEST_CASE("first epoch lowers the loss") {
  const auto train_set = toy_set(32, 15);
  double before = 0.0, after = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Model m = build_detector(5, 2);
    m.init(seed);
    before += evaluate_loss(m, train_set).loss;
    TrainConfig tc;
    tc.epochs = 1;
    tc.seed = seed;
    tc.task = Task::binary;
    train(m, train_set, train_set, tc);
    after += evaluate_loss(m, train_set).loss;
  }
  CHECK(after < before);
}

TEST_CASE("training is deterministic and keeps the best validation epoch") {
  const auto train_set = toy_set(8, 16);
  const auto val_set = toy_set(4, 17);
  TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 5;
  tc.task = Task::binary;
  Model a = build_detector(5, 2), b = build_detector(5, 2);
  const auto ha = train(a, train_set, val_set, tc);
  const auto hb = train(b, train_set, val_set, tc);
  CHECK(a.params() == b.params());
  CHECK(ha.to_csv() == hb.to_csv());
  CHECK(ha.epochs.size() == 3);
  double best = -1.0;
  int best_epoch = 0;
  for (const auto& e : ha.epochs) {
    if (e.val_acc > best) best = e.val_acc, best_epoch = e.epoch;
  }
  CHECK(ha.best_epoch == best_epoch);
  CHECK(evaluate_loss(a, val_set).accuracy == doctest::Approx(best));

  tc.lr = 0.0;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
}

TEST_CASE("checkpoint round trip and corruption") {
  DetectorConfig cfg;
  cfg.cf = 4;
  cfg.num_classes = 2;
  Model m = build_detector(cfg);
  m.init(21);
  const auto bytes = serialize_checkpoint(m, R"({"note":"x"})");
  const auto cp = deserialize_checkpoint(bytes);
  CHECK(cp.model.config() == cfg);
  REQUIRE(cp.model.param_count() == m.param_count());
  for (std::size_t i = 0; i < m.param_count(); ++i) {
    CHECK(cp.model.params()[i] == static_cast<double>(static_cast<float>(m.params()[i])));
  }
  CHECK(cp.manifest.find("\"note\"") != std::string::npos);
  CHECK(serialize_checkpoint(cp.model, R"({"note":"x"})") == bytes);

  auto bad = bytes;
  bad[bad.size() / 2] ^= 0x10;
  CHECK_THROWS_AS(deserialize_checkpoint(bad), FormatError);
  bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(bad), FormatError);
  CHECK_THROWS_AS(deserialize_checkpoint(std::span(bytes).first(bytes.size() - 9)), FormatError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.htcm"), IoError);
}

TEST_CASE("compression-factor ablation table") {
  const auto train_set = toy_set(4, 18);
  const auto val_set = toy_set(2, 19);
  DetectorConfig base;
  base.num_classes = 2;
  TrainConfig tc;
  tc.epochs = 1;
  tc.task = Task::binary;
  const AblationData data{&train_set, &val_set, &val_set};
  const auto t = ablate_cf(data, {1, 5}, base, tc, {1});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0].cf == 1);
  CHECK(t.rows[0].drop == 0.0);
  CHECK(t.rows[1].llds_out_length == 128);
  CHECK(t.rows[1].drop == doctest::Approx(100.0 * (t.rows[0].accuracy - t.rows[1].accuracy)));
  CHECK(t.to_csv().rfind("config,cf,llds_out,params,macs,accuracy,drop_points,reference\n", 0) == 0);
}
