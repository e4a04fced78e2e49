#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ckd/outlier_cuckoo.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace ckd;

TEST_CASE("detect_outliers: interpolated quartiles on [1,2,3,100]") {
  const auto [f, idx] = detect_outliers({1, 2, 3, 100});
  CHECK(f.q1 == doctest::Approx(1.75));
  CHECK(f.q3 == doctest::Approx(27.25));
  CHECK(f.upper == doctest::Approx(65.5));
  REQUIRE(idx.size() == 1);
  CHECK(idx[0] == 3);
}

TEST_CASE("detect_outliers: tight spread and degenerate spread") {
  CHECK(detect_outliers({1, 2, 3, 4}).second.empty());
  const auto [f, idx] = detect_outliers({5, 5, 5, 5, 5});
  CHECK(f.iqr == 0.0);
  CHECK(f.lower == 5.0);
  CHECK(f.upper == 5.0);
  CHECK(idx.empty());
  CHECK_THROWS_AS(detect_outliers({1, 2, 3}), Error);
}

TEST_CASE("mantegna step: zero numerator gives a zero step") {
  CHECK(mantegna_step(0.0, 0.8, 1.5) == 0.0);
  CHECK(mantegna_step(0.0, -2.3, 1.2) == 0.0);
  CHECK(mantegna_step(1.0, 1.0, 1.5) == 1.0);
  CHECK(std::isfinite(mantegna_step(0.5, 0.0, 1.5)));
}

TEST_CASE("levy sigma_u at beta=1.5 matches the independent gamma oracle") {
  CHECK(levy_sigma_u(1.5) == doctest::Approx(0.6966).epsilon(1e-3));
  const double beta = 1.5;
  const double pi = 3.14159265358979323846;
  const double oracle =
      std::pow(oracles::lanczos_gamma(1.0 + beta) * std::sin(pi * beta / 2.0) /
                   (oracles::lanczos_gamma((1.0 + beta) / 2.0) * beta *
                    std::pow(2.0, (beta - 1.0) / 2.0)),
               1.0 / beta);
  CHECK(levy_sigma_u(beta) == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("levy steps have heavier tails than a Gaussian") {
  Rng rng(2024);
  const int n = 100000;
  std::vector<double> steps(n);
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    steps[i] = levy_step(rng, 1.5);
    sq += steps[i] * steps[i];
  }
  const double sd = std::sqrt(sq / n);
  int beyond = 0;
  for (double s : steps)
    if (std::fabs(s) > 3.0 * sd) ++beyond;
  CHECK(static_cast<double>(beyond) / n > 0.0027);
}

TEST_CASE("adjust_outliers: column without outliers is untouched") {
  Matrix x(6, 1);
  const double vals[6] = {1, 2, 3, 4, 3, 2};
  for (std::size_t r = 0; r < 6; ++r) x.at(r, 0) = vals[r];
  const EncodedMatrix m = fixtures::plain_matrix(x, {0, 0, 0, 1, 1, 1});
  CuckooConfig cfg;
  cfg.seed = 1;
  const auto [out, log] = adjust_outliers(m, cfg);
  CHECK(out.values.data == m.values.data);
  CHECK(log.empty());
}

TEST_CASE("adjust_outliers: single high outlier converges to the upper fence") {
  Matrix x(4, 1);
  const double vals[4] = {1, 2, 3, 100};
  for (std::size_t r = 0; r < 4; ++r) x.at(r, 0) = vals[r];
  const EncodedMatrix m = fixtures::plain_matrix(x, {0, 0, 1, 1});
  CuckooConfig cfg;
  cfg.seed = 7;
  const auto [out, log] = adjust_outliers(m, cfg);
  REQUIRE(log.size() == 1);
  const double iqr = log[0].fences.iqr;
  CHECK(std::fabs(out.values.at(3, 0) - 65.5) <= 1e-3 * iqr);
  // non-outlier cells bit-identical
  CHECK(out.values.at(0, 0) == 1.0);
  CHECK(out.values.at(2, 0) == 3.0);
}

TEST_CASE("adjust_outliers: outliers on both sides converge to their fences") {
  // Column with a tight core and one outlier in each direction.
  std::vector<double> vals{10, 11, 12, 13, 14, 15, 16, 17, 18, 19, -80, 120};
  Matrix x(vals.size(), 1);
  for (std::size_t r = 0; r < vals.size(); ++r) x.at(r, 0) = vals[r];
  std::vector<int> y(vals.size(), 0);
  y[0] = 1;
  y[1] = 1;
  const EncodedMatrix m = fixtures::plain_matrix(x, y);
  CuckooConfig cfg;
  cfg.seed = 3;
  const auto [out, log] = adjust_outliers(m, cfg);
  REQUIRE(log.size() == 1);
  const Fences f = log[0].fences;
  CHECK(std::fabs(out.values.at(10, 0) - f.lower) <= 1e-3 * f.iqr);
  CHECK(std::fabs(out.values.at(11, 0) - f.upper) <= 1e-3 * f.iqr);
}

TEST_CASE("adjust_outliers: best fitness non-increasing, values inside fences") {
  fixtures::Toy toy = fixtures::linear_toy(60, 2, 1, 5);
  toy.x.at(3, 0) = 40.0;
  toy.x.at(17, 0) = -35.0;
  toy.x.at(44, 1) = 55.0;
  const EncodedMatrix m = fixtures::plain_matrix(toy.x, toy.y);
  CuckooConfig cfg;
  cfg.seed = 11;
  const auto [out, log] = adjust_outliers(m, cfg);
  REQUIRE(!log.empty());
  for (const auto& col : log) {
    for (std::size_t i = 1; i < col.best_fitness_per_iter.size(); ++i)
      CHECK(col.best_fitness_per_iter[i] <= col.best_fitness_per_iter[i - 1]);
    const double eps = 1e-6 * col.fences.iqr;
    for (double v : col.adjusted) {
      CHECK(v >= col.fences.lower - eps);
      CHECK(v <= col.fences.upper + eps);
    }
  }
}

TEST_CASE("adjust_outliers: fixed seed reproduces byte-identical output") {
  fixtures::Toy toy = fixtures::linear_toy(50, 3, 1, 9);
  toy.x.at(5, 0) = 30.0;
  toy.x.at(6, 2) = -28.0;
  const EncodedMatrix m = fixtures::plain_matrix(toy.x, toy.y);
  CuckooConfig cfg;
  cfg.seed = 99;
  const auto [a, la] = adjust_outliers(m, cfg);
  const auto [b, lb] = adjust_outliers(m, cfg);
  CHECK(a.values.data == b.values.data);
}

TEST_CASE("adjust_outliers: categorical columns are skipped") {
  Matrix x(6, 1);
  const double vals[6] = {0, 0, 0, 0, 0, 9};  // wild code, still categorical
  for (std::size_t r = 0; r < 6; ++r) x.at(r, 0) = vals[r];
  EncodedMatrix m = fixtures::plain_matrix(x, {0, 0, 0, 1, 1, 1});
  m.feature_categorical[0] = true;
  CuckooConfig cfg;
  const auto [out, log] = adjust_outliers(m, cfg);
  CHECK(out.values.at(5, 0) == 9.0);
  CHECK(log.empty());
}

TEST_CASE("cuckoo config validation") {
  CuckooConfig bad;
  bad.levy_beta = 2.5;
  Matrix x(4, 1);
  const EncodedMatrix m = fixtures::plain_matrix(x, {0, 0, 1, 1});
  CHECK_THROWS_AS(adjust_outliers(m, bad), Error);
}
