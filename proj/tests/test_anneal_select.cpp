#include <doctest.h>

#include <cmath>

#include "ckd/anneal_select.hpp"
#include "support/fixtures.hpp"

using namespace ckd;

namespace {

FeatureMask mask_of(std::initializer_list<bool> bits) {
  FeatureMask m;
  m.bits.assign(bits);
  return m;
}

}  // namespace

TEST_CASE("fitness: a feature equal to the label scores near the ceiling") {
  auto toy = fixtures::linear_toy(60, 5, 1, 12);
  for (std::size_t r = 0; r < 60; ++r)
    toy.x.at(r, 0) = static_cast<double>(toy.y[r]);  // feature 0 = label
  SAConfig cfg;
  cfg.seed = 4;
  const double f = fitness(mask_of({true, false, false, false, false}), toy.x, toy.y, cfg);
  CHECK(f >= 1.0 - cfg.feature_penalty - 0.01);
}

TEST_CASE("fitness decomposes into probe accuracy minus the size penalty") {
  const auto toy = fixtures::linear_toy(60, 4, 2, 19);
  SAConfig cfg;
  cfg.seed = 21;
  const FeatureMask mask = mask_of({true, true, false, true});
  const double f = fitness(mask, toy.x, toy.y, cfg);

  const Matrix sub = toy.x.select_cols({0, 1, 3});
  const TrainPredictFn probe = [](const Matrix& tx, const std::vector<int>& ty,
                                  const Matrix& vx, std::uint64_t) {
    return predict_proba(train_logreg(tx, ty, LogregHyper{0.01, 0.1, 200}), vx);
  };
  const auto accs = kfold_cv(sub, toy.y, cfg.probe_folds,
                             derive_seed(cfg.seed, "sa-probe-folds", 0), probe);
  CHECK(f == doctest::Approx(mean(accs) - cfg.feature_penalty * 3.0 / 4.0).epsilon(1e-12));
}

TEST_CASE("fitness: pure noise with balanced labels hovers near 0.5") {
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 100);
    Matrix x(60, 4);
    for (auto& v : x.data) v = rng.normal();
    std::vector<int> y(60);
    for (std::size_t i = 0; i < 60; ++i) y[i] = i % 2;
    SAConfig cfg;
    cfg.seed = seed;
    sum += fitness(mask_of({true, true, true, true}), x, y, cfg);
  }
  CHECK(sum / 20.0 == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("fitness: empty mask is an error") {
  const auto toy = fixtures::linear_toy(20, 3, 1, 2);
  SAConfig cfg;
  CHECK_THROWS_AS(fitness(mask_of({false, false, false}), toy.x, toy.y, cfg), Error);
}

TEST_CASE("sa_select: recovers the informative feature in >= 9/10 seeds") {
  const auto toy = fixtures::linear_toy(60, 5, 1, 31);
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SAConfig cfg;
    cfg.seed = seed;
    cfg.max_iter = 120;
    const SAResult r = sa_select(toy.x, toy.y, cfg);
    if (r.best_mask.bits[0]) ++hits;
  }
  CHECK(hits >= 9);
}

TEST_CASE("sa_select: max_iter = 0 returns the initial mask and one trace point") {
  const auto toy = fixtures::linear_toy(30, 4, 1, 9);
  SAConfig cfg;
  cfg.seed = 17;
  cfg.max_iter = 0;
  const SAResult r = sa_select(toy.x, toy.y, cfg);
  CHECK(r.trace.avg_fitness.size() == 1);
  CHECK(r.trace.max_fitness.size() == 1);
  CHECK(r.best_mask.count() >= 1);
  CHECK(r.trace.avg_fitness[0] == r.best_fitness);
}

TEST_CASE("sa_select: trace invariants and determinism") {
  const auto toy = fixtures::linear_toy(50, 6, 2, 23);
  SAConfig cfg;
  cfg.seed = 5;
  cfg.max_iter = 60;
  const SAResult a = sa_select(toy.x, toy.y, cfg);
  const SAResult b = sa_select(toy.x, toy.y, cfg);
  CHECK(a.best_mask.bits == b.best_mask.bits);
  CHECK(a.trace.avg_fitness == b.trace.avg_fitness);
  CHECK(a.trace.max_fitness == b.trace.max_fitness);

  for (std::size_t i = 1; i < a.trace.max_fitness.size(); ++i)
    CHECK(a.trace.max_fitness[i] >= a.trace.max_fitness[i - 1]);
  CHECK(a.best_fitness == a.trace.max_fitness.back());
  // The returned mask attains the reported best fitness.
  CHECK(fitness(a.best_mask, toy.x, toy.y, cfg) == doctest::Approx(a.best_fitness));
  // Strictly improving neighbors are always accepted.
  CHECK(a.trace.improving_accepted == a.trace.improving_proposals);
}

TEST_CASE("sa_select: config validation") {
  const auto toy = fixtures::linear_toy(30, 4, 1, 3);
  SAConfig bad;
  bad.cooling = 1.5;
  CHECK_THROWS_AS(sa_select(toy.x, toy.y, bad), Error);
  SAConfig cfg;
  CHECK_THROWS_AS(sa_select(toy.x, std::vector<int>(30, 1), cfg), Error);
}
