#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "kanwm/data.hpp"
#include "kanwm/error.hpp"
#include "kanwm/training.hpp"
#include "kanwm/transform.hpp"
#include "kanwm/watermark.hpp"
#include "support/oracles.hpp"

using namespace kanwm;

namespace {

Dataset desk_train(std::size_t rows) {
  std::filesystem::path dir = std::filesystem::path(KANWM_DATA_DIR) / "mnist-desk";
  Dataset d = load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
  return avg_pool(d.head(rows), 2);
}

Dataset toy_classification(std::size_t n, std::size_t dim, Rng& rng) {
  Dataset d;
  d.inputs = oracle::random_mat(n, dim, rng);
  for (std::size_t r = 0; r < n; ++r) d.labels.push_back(d.inputs(r, 0) + d.inputs(r, 1) > 0 ? 1 : 0);
  return d;
}

MlpModel constant_detector(std::size_t width, double bias0, double bias1) {
  Rng rng(1);
  MlpModel m = make_mlp(std::vector<std::size_t>{width, 2}, MlpHead::logits, rng);
  m.layers[0].weight = Mat(2, width);
  m.layers[0].bias = {bias0, bias1};
  return m;
}

}  // namespace

TEST_CASE("default band") {
  CHECK(default_band(32) == FrequencyBand{8, 16});
  CHECK(default_band(5) == FrequencyBand{1, 2});
  CHECK(default_band(1) == FrequencyBand{0, 0});
}

TEST_CASE("gen_signal") {
  SUBCASE("deterministic per key") {
    auto a = gen_signal(42, 16, {2, 5}, 0.3);
    CHECK(a == gen_signal(42, 16, {2, 5}, 0.3));
    std::size_t nonzero = 0;
    for (std::size_t k = 0; k < 16; ++k) {
      if (k >= 2 && k <= 5) {
        CHECK(std::abs(a.values[k]) == 0.3);
        ++nonzero;
      } else {
        CHECK(a.values[k] == 0.0);
      }
    }
    CHECK(nonzero == 4);
  }
  SUBCASE("distinct keys give distinct signals") {
    std::set<std::vector<double>> seen;
    for (std::uint64_t key = 0; key < 100; ++key) seen.insert(gen_signal(key, 64, {16, 32}, 1.0).values);
    CHECK(seen.size() == 100);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(gen_signal(1, 16, {5, 2}, 0.3), Error);
    CHECK_THROWS_AS(gen_signal(1, 16, {2, 16}, 0.3), Error);
    CHECK_THROWS_AS(gen_signal(1, 16, {2, 5}, -0.1), Error);
    CHECK_THROWS_AS(gen_signal(1, 0, {0, 0}, 0.3), Error);
  }
}

TEST_CASE("signal targets equal idct(dct(O) + P)") {
  Rng rng(2);
  Mat o = oracle::random_mat(4, 12, rng);
  auto sig = gen_signal(7, 12, default_band(12), 0.4);
  Mat t = signal_targets(o, sig);
  for (std::size_t r = 0; r < 4; ++r) {
    std::vector<double> row(o.row(r).begin(), o.row(r).end());
    auto spec = oracle::dct(row);
    for (std::size_t k = 0; k < 12; ++k) spec[k] += sig.values[k];
    auto want = oracle::idct(spec);
    for (std::size_t c = 0; c < 12; ++c) CHECK(std::abs(t(r, c) - want[c]) < 1e-12);
  }
  CHECK(signal_targets(o, gen_signal(7, 12, default_band(12), 0.0)) == o);
  CHECK_THROWS_AS(signal_targets(o, gen_signal(7, 10, default_band(10), 0.4)), Error);
}

TEST_CASE("calibrated amplitude is the scaled in-band rms") {
  Rng rng(3);
  KanModel m = oracle::random_kan({5, 8, 2}, rng);
  Mat x = oracle::random_mat(6, 5, rng);
  FrequencyBand band{2, 4};
  Mat o = oracle::layer_forward(m.layers[0], x);
  double acc = 0.0;
  for (std::size_t r = 0; r < 6; ++r) {
    auto spec = oracle::dct(std::vector<double>(o.row(r).begin(), o.row(r).end()));
    for (std::size_t k = 2; k <= 4; ++k) acc += spec[k] * spec[k];
  }
  double want = 0.3 * std::sqrt(acc / 18.0);
  CHECK(calibrate_amplitude(m, x, band) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("phase two only touches layer 0") {
  Rng rng(4);
  KanModel m = oracle::random_kan({3, 6, 2}, rng);
  KanModel before = m;
  Mat x = oracle::random_mat(8, 3, rng);
  Optimizer opt(OptimizerConfig{OptimizerKind::sgd, 0.1});
  watermark_step(m, x, gen_signal(1, 6, default_band(6), 0.5), opt);
  CHECK(m.layers[1] == before.layers[1]);
  CHECK_FALSE(m.layers[0] == before.layers[0]);
}

TEST_CASE("zero amplitude embedding equals plain training") {
  Rng rng(5);
  Dataset train = toy_classification(200, 4, rng);
  Rng init(9);
  KanModel start = make_kan(std::vector<std::size_t>{4, 6, 2}, KanInit{}, init);
  EmbedOptions opts;
  opts.main.epochs = 2;
  opts.main.batch_size = 16;
  for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam}) {
    opts.watermark_optimizer = kind;
    KanModel plain = start;
    train_kan(plain, train, opts.main, 77);
    EmbedTrace trace;
    KanModel wm = embed(start, gen_signal(3, 6, default_band(6), 0.0), train, opts, 77, &trace);
    CHECK(wm == plain);
    CHECK(trace.signal_losses.size() == 2 * 13);
    for (double l : trace.signal_losses) CHECK(l == 0.0);
  }
}

TEST_CASE("embedding with a signal moves the model") {
  Rng rng(6);
  Dataset train = toy_classification(200, 4, rng);
  Rng init(9);
  KanModel start = make_kan(std::vector<std::size_t>{4, 6, 2}, KanInit{}, init);
  EmbedOptions opts;
  opts.main.epochs = 1;
  KanModel plain = start;
  train_kan(plain, train, opts.main, 77);
  KanModel wm = embed(start, gen_signal(3, 6, default_band(6), 0.5), train, opts, 77);
  CHECK_FALSE(wm == plain);
  CHECK_THROWS_AS(embed(start, gen_signal(3, 5, default_band(5), 0.5), train, opts, 77), Error);
}

TEST_CASE("signal loss halves on a frozen batch at desk scale") {
  Dataset train = desk_train(512);
  Rng init(1);
  KanModel m = make_kan(std::vector<std::size_t>{196, 32, 10}, KanInit{}, init);
  TrainOptions main;
  main.epochs = 1;
  main.batch_size = 32;
  train_kan(m, train, main, 2);

  Mat batch = train.head(32).inputs;
  const std::size_t n1 = 32;
  auto band = default_band(n1);
  auto sig = gen_signal(11, n1, band, calibrate_amplitude(m, train.head(256).inputs, band));
  CHECK(sig.amplitude > 0.0);
  const Mat targets = signal_targets(model_forward(m, batch).layer0.values, sig);
  EmbedOptions defaults;
  Optimizer opt(OptimizerConfig{defaults.watermark_optimizer, defaults.lr_watermark});
  const double first = signal_step(m, batch, targets, opt);
  double last = first;
  for (int s = 1; s < 200; ++s) last = signal_step(m, batch, targets, opt);
  last = mse_loss(model_forward(m, batch).layer0.values, targets).loss;
  MESSAGE("signal loss " << first << " -> " << last);
  CHECK(first > 0.0);
  CHECK(last <= 0.5 * first);
}

TEST_CASE("detector dataset") {
  Rng rng(7);
  KanModel wm = oracle::random_kan({3, 5, 2}, rng);
  KanModel clean = oracle::random_kan({3, 5, 2}, rng);
  Mat samples = oracle::random_mat(4, 3, rng);
  DetectorDataset d = build_detector_dataset(wm, clean, samples, 10, 99);
  REQUIRE(d.inputs.rows() == 2 * 4 * 11);
  CHECK(d.inputs.cols() == 5);
  CHECK(std::count(d.labels.begin(), d.labels.end(), 1) == 44);
  Mat o_wm = oracle::layer_forward(wm.layers[0], samples);
  Mat o_clean = oracle::layer_forward(clean.layers[0], samples);
  std::size_t r = 0;
  for (std::size_t s = 0; s < 4; ++s) {
    for (int source = 0; source < 2; ++source) {
      const Mat& o = source == 0 ? o_wm : o_clean;
      std::vector<double> ref(o.row(s).begin(), o.row(s).end());
      std::sort(ref.begin(), ref.end());
      for (std::size_t k = 0; k < 11; ++k, ++r) {
        CHECK(d.labels[r] == (source == 0 ? 1 : 0));
        Provenance want = source == 0 ? (k == 0 ? Provenance::wm : Provenance::wm_shuffled)
                                      : (k == 0 ? Provenance::clean : Provenance::clean_shuffled);
        CHECK(d.provenance[r] == want);
        std::vector<double> got(d.inputs.row(r).begin(), d.inputs.row(r).end());
        if (k == 0) {
          for (std::size_t c = 0; c < 5; ++c) CHECK(std::abs(got[c] - o(s, c)) < 1e-12);
        }
        std::sort(got.begin(), got.end());
        CHECK(oracle::max_abs_diff(got, ref) < 1e-12);
      }
    }
  }
  DetectorDataset again = build_detector_dataset(wm, clean, samples, 10, 99);
  CHECK(again.inputs == d.inputs);
  CHECK(again.labels == d.labels);
}

TEST_CASE("detector training") {
  SUBCASE("separable clusters") {
    Rng rng(8);
    DetectorDataset d;
    d.inputs = Mat(400, 6);
    for (std::size_t r = 0; r < 400; ++r) {
      const int y = r % 2 == 0 ? 1 : 0;
      for (std::size_t c = 0; c < 6; ++c) d.inputs(r, c) = (y ? 1.0 : -1.0) + 0.3 * rng.normal();
      d.labels.push_back(y);
      d.provenance.push_back(y ? Provenance::wm : Provenance::clean);
    }
    DetectorOptions opts;
    opts.seed = 5;
    MlpModel det = train_detector(d, opts);
    auto pred = argmax_rows(mlp_forward(det, d.inputs));
    std::size_t hits = 0;
    for (std::size_t r = 0; r < 400; ++r) hits += pred[r] == d.labels[r];
    CHECK(hits >= 396);
    CHECK(det.widths() == std::vector<std::size_t>{6, 64, 32, 2});
  }
  SUBCASE("zero learning rate leaves the initial detector") {
    Rng rng(9);
    DetectorDataset d;
    d.inputs = oracle::random_mat(20, 4, rng);
    for (std::size_t r = 0; r < 20; ++r) d.labels.push_back(static_cast<int>(r % 2));
    DetectorOptions opts;
    opts.learning_rate = 0.0;
    opts.epochs = 1;
    MlpModel a = train_detector(d, opts);
    opts.epochs = 7;
    CHECK(train_detector(d, opts) == a);
  }
  SUBCASE("single class is rejected") {
    DetectorDataset d;
    d.inputs = Mat(3, 2);
    d.labels = {1, 1, 1};
    CHECK_THROWS_AS(train_detector(d, DetectorOptions{}), Error);
  }
}

TEST_CASE("verify") {
  Rng rng(10);
  KanModel m = oracle::random_kan({3, 4, 2}, rng);
  Mat x = oracle::random_mat(10, 3, rng);
  auto yes = verify(m, constant_detector(4, 0.0, 1.0), x, 0.5);
  CHECK(yes.detection_rate == 1.0);
  CHECK(yes.decision);
  auto no = verify(m, constant_detector(4, 1.0, 0.0), x, 0.5);
  CHECK(no.detection_rate == 0.0);
  CHECK_FALSE(no.decision);
  CHECK(verify(m, constant_detector(4, 1.0, 0.0), x, 0.0).decision);
  CHECK_THROWS_AS(verify(m, constant_detector(4, 0.0, 1.0), x, 1.5), Error);
  CHECK_THROWS_AS(verify(m, constant_detector(5, 0.0, 1.0), x, 0.5), Error);
  CHECK_THROWS_AS(verify(m, constant_detector(4, 0.0, 1.0), Mat(0, 3), 0.5), Error);
}
