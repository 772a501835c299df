#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kanwm/attacks.hpp"
#include "kanwm/error.hpp"
#include "support/oracles.hpp"

using namespace kanwm;

namespace {

Dataset toy(std::size_t n, Rng& rng) {
  Dataset d;
  d.inputs = oracle::random_mat(n, 4, rng);
  for (std::size_t r = 0; r < n; ++r) d.labels.push_back(d.inputs(r, 0) > d.inputs(r, 2) ? 1 : 0);
  return d;
}

}  // namespace

TEST_CASE("attack presets") {
  auto a = AttackSpec::finetune_small_lr();
  CHECK(a.kind == AttackKind::finetune);
  CHECK(a.lr == 1e-3);
  CHECK(a.epochs == 8);
  CHECK(AttackSpec::finetune_large_lr().lr == 1e-2);
  CHECK(AttackSpec::pruning().prune_ratio == 0.6);
  auto r = AttackSpec::retrain();
  CHECK(r.kind == AttackKind::retrain_after_prune);
  CHECK(r.prune_ratio == 0.6);
  CHECK(r.lr == 1e-3);
  CHECK(r.epochs == 8);
  CHECK(parse_attack_kind("retrain") == AttackKind::retrain_after_prune);
  CHECK(parse_attack_kind(to_string(AttackKind::prune)) == AttackKind::prune);
  CHECK_THROWS_AS(parse_attack_kind("distill"), Error);
}

TEST_CASE("attack validation") {
  AttackSpec bad_ratio = AttackSpec::pruning();
  bad_ratio.prune_ratio = 1.2;
  CHECK_THROWS_AS(bad_ratio.validate(), Error);
  AttackSpec bad_lr = AttackSpec::finetune_small_lr();
  bad_lr.lr = 0.0;
  CHECK_THROWS_AS(bad_lr.validate(), Error);
  bad_lr.epochs = 0;
  CHECK_NOTHROW(bad_lr.validate());
  CHECK_NOTHROW(AttackSpec::pruning().validate());
}

TEST_CASE("finetune with zero epochs is the identity") {
  Rng rng(1);
  KanModel m = oracle::random_kan({4, 5, 2}, rng);
  Dataset d = toy(50, rng);
  CHECK(finetune(m, d, 0, 0.01, 16, 3) == m);
  CHECK_FALSE(finetune(m, d, 1, 0.01, 16, 3) == m);
}

TEST_CASE("prune attack keeps masks, retrain lifts them") {
  Rng rng(2);
  KanModel m = oracle::random_kan({4, 5, 2}, rng);
  Dataset d = toy(60, rng);
  Mat calib = d.head(20).inputs;
  KanModel pruned = prune_attack(m, 0.6, calib);
  CHECK(pruned == prune_kan(m, 0.6, calib));

  KanModel lifted = retrain_after_prune(m, 0.6, 1e-3, 0, d, calib, 16, 4);
  KanModel expected = pruned;
  expected.lift_masks();
  CHECK(lifted == expected);
  for (const auto& l : lifted.layers)
    for (auto v : l.mask) CHECK(v == 1);

  KanModel retrained = retrain_after_prune(m, 0.6, 1e-3, 2, d, calib, 16, 4);
  CHECK(retrained == finetune(expected, d, 2, 1e-3, 16, 4));
  // pruned parameters restart from zero and train again
  bool revived = false;
  for (std::size_t l = 0; l < m.layers.size(); ++l)
    for (std::size_t e = 0; e < m.layers[l].edge_count(); ++e)
      if (!pruned.layers[l].mask[e]) revived |= retrained.layers[l].w_base[e] != 0.0;
  CHECK(revived);
}

TEST_CASE("run_attack dispatches on the kind") {
  Rng rng(3);
  KanModel m = oracle::random_kan({4, 5, 2}, rng);
  Dataset d = toy(40, rng);
  Mat calib = d.head(10).inputs;
  CHECK(run_attack(m, AttackSpec::pruning(), d, calib, 8) == prune_attack(m, 0.6, calib));
  AttackSpec ft = AttackSpec::finetune_small_lr(5);
  ft.epochs = 1;
  CHECK(run_attack(m, ft, d, calib, 8) == finetune(m, d, 1, 1e-3, 8, 5));
}

TEST_CASE("prune sweep") {
  Rng rng(4);
  KanModel kan = oracle::random_kan({4, 5, 2}, rng);
  MlpModel mlp = make_mlp(std::vector<std::size_t>{4, 5, 2}, MlpHead::logits, rng);
  Dataset test = toy(80, rng);
  Mat calib = test.head(20).inputs;
  auto rows = prune_sweep(kan, mlp, test, calib);
  REQUIRE(rows.size() == 11);
  CHECK(rows[0].ratio == 0.0);
  CHECK(rows[3].ratio == 0.3);
  CHECK(rows[10].ratio == 1.0);
  auto base_kan = evaluate(kan, test);
  auto base_mlp = evaluate(mlp, test);
  CHECK(rows[0].kan.accuracy == base_kan.accuracy);
  CHECK(rows[0].kan.loss == base_kan.loss);
  CHECK(rows[0].mlp.accuracy == base_mlp.accuracy);
  // every row starts from the original model
  for (const auto& r : rows) {
    auto k = evaluate(prune_kan(kan, r.ratio, calib), test);
    CHECK(r.kan.loss == k.loss);
    CHECK(r.mlp.loss == evaluate(prune_mlp(mlp, r.ratio), test).loss);
  }
  CHECK(prune_sweep(kan, mlp, test, calib, 0.25).size() == 5);
  CHECK_THROWS_AS(prune_sweep(kan, mlp, test, calib, 0.3), Error);
}
