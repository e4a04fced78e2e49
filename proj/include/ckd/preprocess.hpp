#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "ckd/error.hpp"
#include "ckd/ingest.hpp"
#include "ckd/mathutil.hpp"

namespace ckd {

struct ImputeConfig {
  std::size_t k = 5;  // neighbor count; distance is Euclidean over min-max-scaled
                      // coordinates observed in both rows
};

struct AnovaResult {
  std::string feature_name;
  double f_stat = 0.0;
  double p_value = 1.0;
  std::size_t df_between = 0;
  std::size_t df_within = 0;
};

struct Scaler {
  std::vector<double> means;
  std::vector<double> stds;          // as fitted; 1 recorded for constant columns
  std::vector<bool> zero_variance;
};

// Replace missing cells of the named categorical columns with the most
// frequent observed code; ties break toward the smallest code.
inline EncodedMatrix mode_impute(const EncodedMatrix& matrix,
                                 const std::set<std::string>& categorical_columns) {
  EncodedMatrix out = matrix;
  for (const auto& name : categorical_columns) {
    const std::size_t c = out.feature_index(name);
    std::vector<double> observed;
    for (std::size_t r = 0; r < out.values.rows; ++r)
      if (!out.is_missing(r, c)) observed.push_back(out.values.at(r, c));
    if (observed.empty())
      fail("preprocess", "column '" + name + "' is entirely missing");
    std::sort(observed.begin(), observed.end());
    double best = observed[0];
    std::size_t best_count = 0;
    for (std::size_t i = 0; i < observed.size();) {
      std::size_t j = i;
      while (j < observed.size() && observed[j] == observed[i]) ++j;
      if (j - i > best_count) {  // strict: first (smallest) code wins ties
        best_count = j - i;
        best = observed[i];
      }
      i = j;
    }
    for (std::size_t r = 0; r < out.values.rows; ++r) {
      if (out.is_missing(r, c)) {
        out.values.at(r, c) = best;
        out.set_missing(r, c, false);
      }
    }
  }
  return out;
}

// KNN imputation. Distances are computed once against the original observed
// data (imputed values never feed later distances), over coordinates observed
// in both rows, min-max scaled, normalized by the shared-coordinate count.
inline EncodedMatrix knn_impute(const EncodedMatrix& matrix, const ImputeConfig& config) {
  require(config.k >= 1, "preprocess", "impute k must be >= 1");
  require(config.k < matrix.values.rows, "preprocess", "impute k must be < row count");

  const std::size_t rows = matrix.values.rows;
  const std::size_t cols = matrix.values.cols;

  std::vector<double> lo(cols, 0.0), hi(cols, 0.0);
  for (std::size_t c = 0; c < cols; ++c) {
    double mn = std::numeric_limits<double>::infinity();
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < rows; ++r) {
      if (matrix.is_missing(r, c)) continue;
      mn = std::min(mn, matrix.values.at(r, c));
      mx = std::max(mx, matrix.values.at(r, c));
    }
    lo[c] = mn;
    hi[c] = mx;
  }
  auto scaled = [&](std::size_t r, std::size_t c) {
    const double range = hi[c] - lo[c];
    if (range <= 0.0) return 0.0;
    return (matrix.values.at(r, c) - lo[c]) / range;
  };
  for (std::size_t r = 0; r < rows; ++r) {
    bool any = false;
    for (std::size_t c = 0; c < cols; ++c)
      if (!matrix.is_missing(r, c)) any = true;
    if (!any) fail("preprocess", "row " + std::to_string(r) + " has all features missing");
  }

  auto distance = [&](std::size_t a, std::size_t b) {
    double d2 = 0.0;
    std::size_t shared = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (matrix.is_missing(a, c) || matrix.is_missing(b, c)) continue;
      const double diff = scaled(a, c) - scaled(b, c);
      d2 += diff * diff;
      ++shared;
    }
    if (shared == 0) return std::numeric_limits<double>::infinity();
    return d2 / static_cast<double>(shared);
  };

  EncodedMatrix out = matrix;
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<std::pair<double, std::size_t>> neighbors;  // (distance, row)
    bool have_neighbors = false;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!matrix.is_missing(r, c)) continue;
      if (!have_neighbors) {
        for (std::size_t o = 0; o < rows; ++o) {
          if (o == r) continue;
          const double d = distance(r, o);
          if (std::isfinite(d)) neighbors.emplace_back(d, o);
        }
        std::sort(neighbors.begin(), neighbors.end());  // ties -> lower row index
        have_neighbors = true;
      }
      double sum = 0.0;
      std::size_t taken = 0;
      for (const auto& [d, o] : neighbors) {
        if (matrix.is_missing(o, c)) continue;
        sum += matrix.values.at(o, c);
        if (++taken == config.k) break;
      }
      if (taken < config.k)
        fail("preprocess", "fewer than k=" + std::to_string(config.k) +
                               " usable rows for column '" + matrix.feature_names[c] +
                               "'");
      out.values.at(r, c) = sum / static_cast<double>(taken);
      out.set_missing(r, c, false);
    }
  }
  return out;
}

// One-way ANOVA of each feature against the class labels. Features with
// p > alpha are dropped; `kept` preserves column order.
inline std::pair<std::vector<std::string>, std::vector<AnovaResult>> anova_screen(
    const EncodedMatrix& matrix, double alpha) {
  const std::size_t rows = matrix.values.rows;
  const std::size_t cols = matrix.values.cols;
  for (std::size_t i = 0; i < rows * cols; ++i)
    require(!matrix.missing[i], "preprocess", "anova_screen requires a fully imputed matrix");

  std::vector<int> classes;
  for (int y : matrix.labels)
    if (std::find(classes.begin(), classes.end(), y) == classes.end())
      classes.push_back(y);
  std::sort(classes.begin(), classes.end());
  require(classes.size() >= 2, "preprocess", "anova_screen needs both classes present");

  const std::size_t g = classes.size();
  std::vector<AnovaResult> results;
  std::vector<std::string> kept;
  for (std::size_t c = 0; c < cols; ++c) {
    double grand = 0.0;
    for (std::size_t r = 0; r < rows; ++r) grand += matrix.values.at(r, c);
    grand /= static_cast<double>(rows);

    double ssb = 0.0, ssw = 0.0;
    for (std::size_t gi = 0; gi < g; ++gi) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t r = 0; r < rows; ++r) {
        if (matrix.labels[r] != classes[gi]) continue;
        sum += matrix.values.at(r, c);
        ++n;
      }
      const double m = sum / static_cast<double>(n);
      ssb += static_cast<double>(n) * (m - grand) * (m - grand);
      for (std::size_t r = 0; r < rows; ++r) {
        if (matrix.labels[r] != classes[gi]) continue;
        const double d = matrix.values.at(r, c) - m;
        ssw += d * d;
      }
    }

    AnovaResult res;
    res.feature_name = matrix.feature_names[c];
    res.df_between = g - 1;
    res.df_within = rows - g;
    if (ssw <= 0.0 && ssb <= 0.0) {
      res.f_stat = 0.0;  // constant feature
      res.p_value = 1.0;
    } else if (ssw <= 0.0) {
      res.f_stat = std::numeric_limits<double>::infinity();
      res.p_value = 0.0;
    } else {
      res.f_stat = (ssb / static_cast<double>(res.df_between)) /
                   (ssw / static_cast<double>(res.df_within));
      res.p_value = f_upper_tail(res.f_stat, static_cast<double>(res.df_between),
                                 static_cast<double>(res.df_within));
    }
    if (res.p_value <= alpha) kept.push_back(res.feature_name);
    results.push_back(std::move(res));
  }
  return {kept, results};
}

inline Scaler fit_standardize(const Matrix& matrix) {
  Scaler s;
  s.means.resize(matrix.cols);
  s.stds.resize(matrix.cols);
  s.zero_variance.resize(matrix.cols);
  for (std::size_t c = 0; c < matrix.cols; ++c) {
    const auto col = matrix.column(c);
    s.means[c] = mean(col);
    const double sd = pop_stddev(col);
    s.zero_variance[c] = (sd == 0.0);
    s.stds[c] = s.zero_variance[c] ? 1.0 : sd;
  }
  return s;
}

inline Matrix apply_standardize(const Matrix& matrix, const Scaler& scaler) {
  require(matrix.cols == scaler.means.size(), "preprocess",
          "scaler fitted on " + std::to_string(scaler.means.size()) +
              " columns, matrix has " + std::to_string(matrix.cols));
  Matrix out = matrix;
  for (std::size_t r = 0; r < out.rows; ++r)
    for (std::size_t c = 0; c < out.cols; ++c)
      out.at(r, c) = (out.at(r, c) - scaler.means[c]) / scaler.stds[c];
  return out;
}

}  // namespace ckd
