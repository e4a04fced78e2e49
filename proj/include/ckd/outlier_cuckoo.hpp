#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "ckd/error.hpp"
#include "ckd/ingest.hpp"
#include "ckd/rng.hpp"

namespace ckd {

// Tukey fences: [q1 - 1.5*iqr, q3 + 1.5*iqr].
struct Fences {
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct CuckooConfig {
  std::size_t n_nests = 25;
  double pa = 0.25;           // fraction of worst nests re-seeded each iteration
  double levy_beta = 1.5;     // in (1, 2]
  double step_scale = 0.01;   // fraction of (upper - lower)
  std::size_t max_iter = 200;
  double penalty_weight = 1000.0;
  std::uint64_t seed = 0;

  void validate() const {
    require(n_nests >= 1, "cuckoo", "n_nests must be positive");
    require(pa >= 0.0 && pa <= 1.0, "cuckoo", "pa must be in [0,1]");
    require(levy_beta > 1.0 && levy_beta <= 2.0, "cuckoo", "levy_beta must be in (1,2]");
    require(step_scale > 0.0, "cuckoo", "step_scale must be positive");
    require(penalty_weight >= 0.0, "cuckoo", "penalty_weight must be non-negative");
  }
};

struct Nest {
  std::vector<double> values;  // one candidate replacement per outlier cell
  double fitness = 0.0;
};

struct ColumnAdjustment {
  std::string column;
  Fences fences;
  std::vector<std::size_t> outlier_rows;
  std::vector<double> original;
  std::vector<double> adjusted;
  std::vector<double> best_fitness_per_iter;
};

using AdjustmentLog = std::vector<ColumnAdjustment>;

// Quartile by linear interpolation at position p*(n-1) on the sorted column.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  const double pos = p * static_cast<double>(n - 1);
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= n) return sorted[n - 1];
  const double frac = pos - static_cast<double>(i);
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

inline std::pair<Fences, std::vector<std::size_t>> detect_outliers(
    const std::vector<double>& column) {
  require(column.size() >= 4, "cuckoo",
          "outlier detection needs >= 4 values, got " + std::to_string(column.size()));
  std::vector<double> sorted = column;
  std::sort(sorted.begin(), sorted.end());
  Fences f;
  f.q1 = quantile_sorted(sorted, 0.25);
  f.q3 = quantile_sorted(sorted, 0.75);
  f.iqr = f.q3 - f.q1;
  f.lower = f.q1 - 1.5 * f.iqr;
  f.upper = f.q3 + 1.5 * f.iqr;
  std::vector<std::size_t> outliers;
  for (std::size_t i = 0; i < column.size(); ++i)
    if (column[i] < f.lower || column[i] > f.upper) outliers.push_back(i);
  return {f, outliers};
}

// Mantegna's heavy-tailed step: u / |v|^(1/beta) with
// u ~ N(0, sigma_u^2), v ~ N(0, 1).
inline double levy_sigma_u(double beta) {
  const double pi = std::numbers::pi;
  const double num = std::tgamma(1.0 + beta) * std::sin(pi * beta / 2.0);
  const double den =
      std::tgamma((1.0 + beta) / 2.0) * beta * std::pow(2.0, (beta - 1.0) / 2.0);
  return std::pow(num / den, 1.0 / beta);
}

inline double mantegna_step(double u, double v, double beta) {
  if (v == 0.0) v = 0x1.0p-53;
  return u / std::pow(std::fabs(v), 1.0 / beta);
}

inline double levy_step(Rng& rng, double beta) {
  const double u = rng.normal() * levy_sigma_u(beta);
  const double v = rng.normal();
  return mantegna_step(u, v, beta);
}

namespace detail {

// Penalized minimal-adjustment objective. Its analytic optimum clamps every
// outlier to its nearest fence, which the tests use as an oracle.
inline double adjustment_objective(const std::vector<double>& v,
                                   const std::vector<double>& original,
                                   const Fences& f, double penalty_weight) {
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    total += std::fabs(v[i] - original[i]) / f.iqr;
    const double violation = std::max({0.0, f.lower - v[i], v[i] - f.upper});
    total += penalty_weight * violation / f.iqr;
  }
  return total;
}

// Cuckoo search over replacement vectors for one column's outlier cells.
// Each iteration sweeps every nest cell-by-cell with Lévy proposals and a
// greedy accept, then re-seeds the ceil(pa*n) worst nests uniformly in
// [lower, upper]. The step scale stays at step_scale*(upper-lower) for the
// first half of the run and then ramps down geometrically to this fraction
// of it; a fixed scale stalls at a noise floor above the winsorization
// optimum the search is expected to reach.
inline constexpr double kCuckooFinalScaleFraction = 1e-3;

inline ColumnAdjustment cuckoo_adjust_column(const std::string& name,
                                             const std::vector<double>& column,
                                             const Fences& fences,
                                             const std::vector<std::size_t>& outliers,
                                             const CuckooConfig& config, Rng& rng) {
  ColumnAdjustment adj;
  adj.column = name;
  adj.fences = fences;
  adj.outlier_rows = outliers;
  for (std::size_t i : outliers) adj.original.push_back(column[i]);

  const std::size_t dim = outliers.size();
  const double span = fences.upper - fences.lower;
  const double base_step = config.step_scale * span;
  const double clamp_lo = fences.lower - 3.0 * fences.iqr;
  const double clamp_hi = fences.upper + 3.0 * fences.iqr;

  auto objective = [&](const std::vector<double>& v) {
    return adjustment_objective(v, adj.original, fences, config.penalty_weight);
  };

  std::vector<Nest> nests(config.n_nests);
  for (auto& nest : nests) {
    nest.values.resize(dim);
    for (auto& value : nest.values) value = rng.uniform(fences.lower, fences.upper);
    nest.fitness = objective(nest.values);
  }
  auto best_of = [&]() {
    std::size_t bi = 0;
    for (std::size_t i = 1; i < nests.size(); ++i)
      if (nests[i].fitness < nests[bi].fitness) bi = i;
    return bi;
  };

  const auto n_abandon = static_cast<std::size_t>(
      std::ceil(config.pa * static_cast<double>(config.n_nests)));
  for (std::size_t iter = 0; iter < config.max_iter; ++iter) {
    // Full-scale walks for the first half (coverage of the search box), then a
    // geometric ramp-down for the final refinement.
    const double progress = config.max_iter == 0
                                ? 0.0
                                : static_cast<double>(iter) /
                                      static_cast<double>(config.max_iter);
    const double step =
        progress < 0.5
            ? base_step
            : base_step * std::pow(kCuckooFinalScaleFraction, 2.0 * progress - 1.0);
    for (auto& nest : nests) {
      // Forward-backward sweep: two Lévy proposals per cell per iteration.
      for (std::size_t k = 0; k < 2 * dim; ++k) {
        const std::size_t c = k < dim ? k : 2 * dim - 1 - k;
        const double old_value = nest.values[c];
        double proposal = old_value + step * levy_step(rng, config.levy_beta);
        proposal = std::clamp(proposal, clamp_lo, clamp_hi);
        nest.values[c] = proposal;
        const double fit = objective(nest.values);
        if (fit < nest.fitness) {
          nest.fitness = fit;
        } else {
          nest.values[c] = old_value;
        }
      }
    }
    if (n_abandon > 0 && n_abandon < nests.size()) {
      std::vector<std::size_t> order(nests.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return nests[a].fitness > nests[b].fitness;
      });
      for (std::size_t i = 0; i < n_abandon; ++i) {
        Nest& nest = nests[order[i]];
        for (auto& value : nest.values)
          value = rng.uniform(fences.lower, fences.upper);
        nest.fitness = objective(nest.values);
      }
    }
    adj.best_fitness_per_iter.push_back(nests[best_of()].fitness);
  }

  adj.adjusted = nests[best_of()].values;
  return adj;
}

}  // namespace detail

// Adjust outliers of every numeric (non-categorical) column independently.
// Non-outlier cells are untouched; per-column searches use child seeds so
// results do not depend on processing order.
inline std::pair<EncodedMatrix, AdjustmentLog> adjust_outliers(
    const EncodedMatrix& matrix, const CuckooConfig& config) {
  config.validate();
  for (std::size_t i = 0; i < matrix.missing.size(); ++i)
    require(!matrix.missing[i], "cuckoo", "adjust_outliers requires a fully imputed matrix");

  EncodedMatrix out = matrix;
  AdjustmentLog log;
  for (std::size_t c = 0; c < matrix.values.cols; ++c) {
    if (matrix.feature_categorical[c]) continue;  // integer codes have no fences
    const auto column = matrix.values.column(c);
    auto [fences, outliers] = detect_outliers(column);
    if (outliers.empty() || fences.iqr <= 0.0) continue;
    Rng rng(derive_seed(config.seed, "cuckoo", c));
    auto adj = detail::cuckoo_adjust_column(matrix.feature_names[c], column, fences,
                                            outliers, config, rng);
    for (std::size_t i = 0; i < adj.outlier_rows.size(); ++i)
      out.values.at(adj.outlier_rows[i], c) = adj.adjusted[i];
    log.push_back(std::move(adj));
  }
  return {out, log};
}

}  // namespace ckd
