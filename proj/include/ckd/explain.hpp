#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ckd/error.hpp"
#include "ckd/matrix.hpp"
#include "ckd/oblivious_boost.hpp"

namespace ckd {

struct ShapMatrix {
  double base_value = 0.0;  // background-weighted mean margin
  Matrix phi;               // rows x features, margin-scale attributions
};

// (feature name, mean |phi|) sorted descending; ties in lexicographic name order.
using FeatureRanking = std::vector<std::pair<std::string, double>>;

namespace detail {

// Per-tree machinery for exact Shapley values. An oblivious tree of depth d
// uses at most d distinct features, so the Shapley sum is enumerated directly
// over subsets of the used features; conditional expectations follow the
// tree paths with background occupancy counts as weights.
struct TreeShapContext {
  const ObliviousTree* tree = nullptr;
  const std::vector<std::vector<double>>* borders = nullptr;
  std::vector<std::size_t> used;             // distinct features, ascending
  std::vector<std::size_t> level_pos;        // level -> index into `used`
  std::vector<std::vector<double>> cover;    // per level, per node, bg row count
  std::vector<double> weight;                // Shapley kernel by |T|

  void build(const ObliviousTree& t, const std::vector<std::vector<double>>& b,
             const Matrix& background) {
    tree = &t;
    borders = &b;
    used.clear();
    for (const auto& level : t.levels) used.push_back(level.feature);
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    level_pos.clear();
    for (const auto& level : t.levels)
      level_pos.push_back(static_cast<std::size_t>(
          std::lower_bound(used.begin(), used.end(), level.feature) - used.begin()));

    const std::size_t depth = t.levels.size();
    cover.assign(depth + 1, {});
    for (std::size_t l = 0; l <= depth; ++l)
      cover[l].assign(static_cast<std::size_t>(1) << l, 0.0);
    for (std::size_t r = 0; r < background.rows; ++r) {
      std::size_t node = 0;
      cover[0][0] += 1.0;
      const double* x = background.row(r);
      for (std::size_t l = 0; l < depth; ++l) {
        const auto& level = t.levels[l];
        const bool bit = x[level.feature] > b[level.feature][level.border];
        node = (node << 1) | static_cast<std::size_t>(bit);
        cover[l + 1][node] += 1.0;
      }
    }

    const std::size_t u = used.size();
    weight.assign(u == 0 ? 1 : u, 0.0);
    // |T|! (u-|T|-1)! / u!
    for (std::size_t k = 0; k < weight.size(); ++k) {
      double w = 1.0 / static_cast<double>(u);
      for (std::size_t i = 1; i <= k; ++i)
        w *= static_cast<double>(i) / static_cast<double>(u - i);
      weight[k] = w;
    }
  }

  // Conditional expectation down the tree: features in `subset` follow the
  // row's branch, the rest average children by background cover. A node no
  // background row reaches splits 50/50 (only reachable via a forced branch).
  double expectation(std::size_t level, std::size_t node, std::uint32_t subset,
                     const std::vector<bool>& row_bits) const {
    if (level == tree->levels.size()) return tree->leaf_values[node];
    const std::size_t pos = level_pos[level];
    if (subset & (1u << pos)) {
      const std::size_t child =
          (node << 1) | static_cast<std::size_t>(row_bits[level]);
      return expectation(level + 1, child, subset, row_bits);
    }
    const double c0 = cover[level + 1][node << 1];
    const double c1 = cover[level + 1][(node << 1) | 1];
    const double total = c0 + c1;
    double w0 = 0.5, w1 = 0.5;
    if (total > 0.0) {
      w0 = c0 / total;
      w1 = c1 / total;
    }
    double out = 0.0;
    if (w0 > 0.0) out += w0 * expectation(level + 1, node << 1, subset, row_bits);
    if (w1 > 0.0) out += w1 * expectation(level + 1, (node << 1) | 1, subset, row_bits);
    return out;
  }
};

}  // namespace detail

// Exact per-feature Shapley attributions of the ensemble margin. phi sums over
// trees (scaled by the learning rate); base_value + sum(phi[row]) equals the
// margin of every row up to float round-off.
inline ShapMatrix tree_shap(const ObliviousEnsemble& ensemble, const Matrix& features,
                            const Matrix& background) {
  require(background.rows > 0, "explain", "background must be non-empty");
  require(background.cols == ensemble.n_features(), "explain",
          "background has " + std::to_string(background.cols) + " features, model has " +
              std::to_string(ensemble.n_features()));
  require(features.cols == ensemble.n_features(), "explain",
          "input has " + std::to_string(features.cols) + " features, model has " +
              std::to_string(ensemble.n_features()));

  ShapMatrix result;
  result.phi = Matrix(features.rows, features.cols, 0.0);
  result.base_value = ensemble.base_score;

  const double lr = ensemble.params.learning_rate;
  detail::TreeShapContext ctx;
  std::vector<bool> row_bits;
  std::vector<double> v;        // conditional expectation per subset
  std::vector<double> phi_used;

  for (const auto& tree : ensemble.trees) {
    ctx.build(tree, ensemble.borders, background);
    const std::size_t u = ctx.used.size();
    const std::size_t depth = tree.levels.size();

    // v(empty set) is row-independent: the cover-weighted mean leaf value.
    row_bits.assign(depth, false);
    const double v_empty = ctx.expectation(0, 0, 0, row_bits);
    result.base_value += lr * v_empty;
    if (u == 0) continue;

    for (std::size_t r = 0; r < features.rows; ++r) {
      const double* x = features.row(r);
      row_bits.resize(depth);
      for (std::size_t l = 0; l < depth; ++l) {
        const auto& level = tree.levels[l];
        row_bits[l] = x[level.feature] > ensemble.borders[level.feature][level.border];
      }
      const std::uint32_t n_subsets = 1u << u;
      v.assign(n_subsets, 0.0);
      for (std::uint32_t subset = 0; subset < n_subsets; ++subset)
        v[subset] = ctx.expectation(0, 0, subset, row_bits);

      phi_used.assign(u, 0.0);
      for (std::uint32_t subset = 0; subset < n_subsets; ++subset) {
        const auto size = static_cast<std::size_t>(std::popcount(subset));
        for (std::size_t j = 0; j < u; ++j) {
          if (subset & (1u << j)) continue;
          phi_used[j] += ctx.weight[size] * (v[subset | (1u << j)] - v[subset]);
        }
      }
      for (std::size_t j = 0; j < u; ++j)
        result.phi.at(r, ctx.used[j]) += lr * phi_used[j];
    }
  }
  return result;
}

inline FeatureRanking summarize(const ShapMatrix& shap,
                                const std::vector<std::string>& names) {
  require(shap.phi.rows > 0, "explain", "empty attribution matrix");
  require(names.size() == shap.phi.cols, "explain", "name count mismatch");
  FeatureRanking ranking;
  for (std::size_t c = 0; c < shap.phi.cols; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < shap.phi.rows; ++r) s += std::fabs(shap.phi.at(r, c));
    ranking.emplace_back(names[c], s / static_cast<double>(shap.phi.rows));
  }
  std::sort(ranking.begin(), ranking.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return ranking;
}

}  // namespace ckd
