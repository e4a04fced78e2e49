#include <doctest.h>

#include <cmath>
#include <set>

#include "ckd/preprocess.hpp"
#include "ckd/rng.hpp"
#include "support/fixtures.hpp"

using namespace ckd;

namespace {

EncodedMatrix with_missing(const Matrix& x, const std::vector<int>& y,
                           const std::vector<std::pair<std::size_t, std::size_t>>& holes) {
  EncodedMatrix m = fixtures::plain_matrix(x, y);
  for (auto [r, c] : holes) {
    m.set_missing(r, c, true);
    m.values.at(r, c) = std::numeric_limits<double>::quiet_NaN();
  }
  return m;
}

}  // namespace

TEST_CASE("mode_impute: unique mode, smallest-code tie break, identity") {
  Matrix x(4, 1);
  x.at(0, 0) = 1;
  x.at(2, 0) = 1;
  x.at(3, 0) = 0;
  EncodedMatrix m = with_missing(x, {0, 0, 1, 1}, {{1, 0}});
  m.feature_categorical[0] = true;
  const EncodedMatrix out = mode_impute(m, {"f0"});
  CHECK(out.values.at(1, 0) == 1.0);
  CHECK(out.missing_count(0) == 0);

  Matrix t(3, 1);
  t.at(0, 0) = 0;
  t.at(1, 0) = 1;
  EncodedMatrix tie = with_missing(t, {0, 1, 0}, {{2, 0}});
  tie.feature_categorical[0] = true;
  CHECK(mode_impute(tie, {"f0"}).values.at(2, 0) == 0.0);

  EncodedMatrix full = fixtures::plain_matrix(x, {0, 0, 1, 1});
  const EncodedMatrix same = mode_impute(full, {"f0"});
  CHECK(same.values.data == full.values.data);
}

TEST_CASE("mode_impute: entirely missing column is an error") {
  Matrix x(2, 1);
  EncodedMatrix m = with_missing(x, {0, 1}, {{0, 0}, {1, 0}});
  CHECK_THROWS_AS(mode_impute(m, {"f0"}), Error);
}

TEST_CASE("knn_impute: hand-computed neighbor mean") {
  Matrix x(3, 2);
  x.at(0, 0) = 1.0;
  x.at(0, 1) = 10.0;
  x.at(1, 0) = 1.1;
  x.at(1, 1) = 12.0;
  x.at(2, 0) = 0.9;
  const EncodedMatrix m = with_missing(x, {0, 1, 0}, {{2, 1}});
  const EncodedMatrix out = knn_impute(m, ImputeConfig{2});
  CHECK(out.values.at(2, 1) == doctest::Approx(11.0));
  // observed cells bit-exact
  CHECK(out.values.at(0, 1) == 10.0);
  CHECK(out.values.at(1, 1) == 12.0);
  CHECK(out.missing_count(1) == 0);
}

TEST_CASE("knn_impute: k=1 copies the nearest row's value") {
  Matrix x(3, 2);
  x.at(0, 0) = 0.0;
  x.at(0, 1) = 5.0;
  x.at(1, 0) = 10.0;
  x.at(1, 1) = 50.0;
  x.at(2, 0) = 0.1;
  const EncodedMatrix m = with_missing(x, {0, 1, 0}, {{2, 1}});
  const EncodedMatrix out = knn_impute(m, ImputeConfig{1});
  CHECK(out.values.at(2, 1) == 5.0);
}

TEST_CASE("knn_impute: identity without missing cells, guards") {
  const auto toy = fixtures::linear_toy(10, 3, 1, 42);
  const EncodedMatrix m = fixtures::plain_matrix(toy.x, toy.y);
  const EncodedMatrix out = knn_impute(m, ImputeConfig{3});
  CHECK(out.values.data == m.values.data);

  Matrix x(2, 2);
  EncodedMatrix all_missing =
      with_missing(x, {0, 1}, {{0, 0}, {0, 1}});
  CHECK_THROWS_AS(knn_impute(all_missing, ImputeConfig{1}), Error);
  CHECK_THROWS_AS(knn_impute(m, ImputeConfig{10}), Error);
  CHECK_THROWS_AS(knn_impute(m, ImputeConfig{0}), Error);
}

TEST_CASE("anova_screen: textbook two-group fixture") {
  Matrix x(6, 1);
  const double vals[6] = {1, 2, 3, 2, 3, 4};
  for (std::size_t r = 0; r < 6; ++r) x.at(r, 0) = vals[r];
  const EncodedMatrix m = fixtures::plain_matrix(x, {0, 0, 0, 1, 1, 1});
  const auto [kept, results] = anova_screen(m, 0.05);
  REQUIRE(results.size() == 1);
  CHECK(results[0].f_stat == doctest::Approx(1.5));
  CHECK(results[0].df_between == 1);
  CHECK(results[0].df_within == 4);
  CHECK(results[0].p_value == doctest::Approx(0.288).epsilon(0.01));
  CHECK(kept.empty());  // p > 0.05 -> dropped
}

TEST_CASE("anova_screen: identical group means give F=0, p=1") {
  Matrix x(4, 1);
  x.at(0, 0) = 1;
  x.at(1, 0) = 3;
  x.at(2, 0) = 1;
  x.at(3, 0) = 3;
  const EncodedMatrix m = fixtures::plain_matrix(x, {0, 0, 1, 1});
  const auto [kept, results] = anova_screen(m, 0.05);
  CHECK(results[0].f_stat == 0.0);
  CHECK(results[0].p_value == 1.0);
}

TEST_CASE("anova_screen: constant feature is degenerate, separated feature is infinite") {
  Matrix x(4, 2);
  for (std::size_t r = 0; r < 4; ++r) x.at(r, 0) = 7.0;
  x.at(0, 1) = 0;
  x.at(1, 1) = 0;
  x.at(2, 1) = 1;
  x.at(3, 1) = 1;
  const EncodedMatrix m = fixtures::plain_matrix(x, {0, 0, 1, 1});
  const auto [kept, results] = anova_screen(m, 0.05);
  CHECK(results[0].f_stat == 0.0);
  CHECK(results[0].p_value == 1.0);
  CHECK(std::isinf(results[1].f_stat));
  CHECK(results[1].p_value == 0.0);
  CHECK(kept == std::vector<std::string>{"f1"});
}

TEST_CASE("anova_screen: p-values are monotone decreasing in F at fixed dof") {
  const auto toy = fixtures::linear_toy(40, 4, 2, 3);
  const EncodedMatrix m = fixtures::plain_matrix(toy.x, toy.y);
  const auto [kept, results] = anova_screen(m, 1.0);
  for (std::size_t i = 0; i < results.size(); ++i)
    for (std::size_t j = 0; j < results.size(); ++j)
      if (results[i].f_stat < results[j].f_stat)
        CHECK(results[i].p_value >= results[j].p_value);
}

TEST_CASE("standardize: two-point, constant, and random-matrix properties") {
  Matrix x(2, 1);
  x.at(0, 0) = 0;
  x.at(1, 0) = 2;
  const Scaler s = fit_standardize(x);
  const Matrix out = apply_standardize(x, s);
  CHECK(out.at(0, 0) == doctest::Approx(-1.0));
  CHECK(out.at(1, 0) == doctest::Approx(1.0));

  Matrix c(3, 1, 5.0);
  const Scaler sc = fit_standardize(c);
  CHECK(sc.zero_variance[0]);
  CHECK(sc.stds[0] == 1.0);
  const Matrix cz = apply_standardize(c, sc);
  for (double v : cz.data) CHECK(v == 0.0);

  const auto toy = fixtures::linear_toy(200, 5, 2, 77);
  const Matrix z = apply_standardize(toy.x, fit_standardize(toy.x));
  for (std::size_t col = 0; col < z.cols; ++col) {
    const auto column = z.column(col);
    CHECK(std::fabs(ckd::mean(column)) <= 1e-9);
    CHECK(std::fabs(ckd::pop_stddev(column) - 1.0) <= 1e-9);
  }

  CHECK_THROWS_AS(apply_standardize(Matrix(2, 3), s), Error);
}
