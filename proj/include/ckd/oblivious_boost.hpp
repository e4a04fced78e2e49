#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ckd/error.hpp"
#include "ckd/mathutil.hpp"
#include "ckd/matrix.hpp"

namespace ckd {

struct BoostParams {
  std::size_t iterations = 200;
  std::size_t depth = 8;
  double learning_rate = 0.01;
  double l2_leaf_reg = 3.0;
  std::size_t border_count = 32;
  std::uint64_t seed = 0;

  void validate() const {
    require(depth >= 1 && depth <= 16, "boost", "depth must be in [1,16]");
    require(border_count >= 1, "boost", "border_count must be >= 1");
    require(l2_leaf_reg >= 0.0, "boost", "l2_leaf_reg must be >= 0");
    require(learning_rate > 0.0, "boost", "learning_rate must be positive");
  }
};

// Histogram quantization. Bin b holds values in (border[b-1], border[b]] with
// open ends, so bin(v) = count of borders < v.
struct QuantizedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::vector<double>> borders;  // per feature, strictly increasing
  std::vector<std::uint16_t> bins;           // rows*cols

  std::uint16_t bin(std::size_t r, std::size_t c) const { return bins[r * cols + c]; }
};

inline std::uint16_t bin_of(const std::vector<double>& borders, double value) {
  return static_cast<std::uint16_t>(
      std::lower_bound(borders.begin(), borders.end(), value) - borders.begin());
}

// Quantile-based borders. A feature with up to border_count+1 distinct values
// uses all of them as cut candidates (borders = adjacent midpoints, so d
// distinct values give d-1 borders). Otherwise cuts are placed at
// border_count equally spaced ranks and each border is the midpoint of the two
// data values adjacent to its cut, giving near-equal bin mass; cuts inside a
// run of equal values are dropped, as are duplicate borders.
inline QuantizedMatrix quantize(const Matrix& features, std::size_t border_count) {
  require(border_count >= 1, "boost", "border_count must be >= 1");
  QuantizedMatrix qm;
  qm.rows = features.rows;
  qm.cols = features.cols;
  qm.borders.resize(features.cols);
  qm.bins.resize(features.rows * features.cols);
  for (std::size_t c = 0; c < features.cols; ++c) {
    std::vector<double> sorted = features.column(c);
    for (double v : sorted)
      require(std::isfinite(v), "boost", "quantize requires finite values");
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();

    std::vector<double> distinct = sorted;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    auto& borders = qm.borders[c];
    if (distinct.size() <= border_count + 1) {
      for (std::size_t i = 0; i + 1 < distinct.size(); ++i)
        borders.push_back(distinct[i] + 0.5 * (distinct[i + 1] - distinct[i]));
    } else {
      for (std::size_t i = 1; i <= border_count; ++i) {
        const auto cut = static_cast<std::size_t>(std::llround(
            static_cast<double>(i) * static_cast<double>(n) /
            static_cast<double>(border_count + 1)));
        if (cut == 0 || cut >= n) continue;
        if (sorted[cut - 1] == sorted[cut]) continue;
        borders.push_back(sorted[cut - 1] + 0.5 * (sorted[cut] - sorted[cut - 1]));
      }
      borders.erase(std::unique(borders.begin(), borders.end()), borders.end());
    }

    for (std::size_t r = 0; r < features.rows; ++r)
      qm.bins[r * qm.cols + c] = bin_of(borders, features.at(r, c));
  }
  return qm;
}

// One level of an oblivious tree: every node at that level tests the same
// (feature, border-index) pair.
struct ObliviousLevel {
  std::size_t feature = 0;
  std::size_t border = 0;
};

struct ObliviousTree {
  std::vector<ObliviousLevel> levels;
  std::vector<double> leaf_values;  // size 2^levels; stored unscaled

  // Leaf index: the level-l bit is [value > border], most significant first.
  std::size_t leaf_index(const double* x,
                         const std::vector<std::vector<double>>& borders) const {
    std::size_t leaf = 0;
    for (const auto& level : levels) {
      const bool bit = x[level.feature] > borders[level.feature][level.border];
      leaf = (leaf << 1) | static_cast<std::size_t>(bit);
    }
    return leaf;
  }
};

struct ObliviousEnsemble {
  double base_score = 0.0;  // log-odds of the label-1 rate
  BoostParams params;
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> borders;
  std::vector<ObliviousTree> trees;

  std::size_t n_features() const { return borders.size(); }
};

namespace detail {

struct LevelChoice {
  bool found = false;
  std::size_t feature = 0;
  std::size_t border = 0;
  double gain = -std::numeric_limits<double>::infinity();
};

}  // namespace detail

// Newton boosting on log-loss with oblivious trees: per level, pick the single
// (feature, border) maximizing the summed split gain over current leaves; leaf
// value is -sum(g)/(sum(h) + l2). Ties break toward the lowest feature index,
// then the lowest border.
inline ObliviousEnsemble fit_boost(const Matrix& features, const std::vector<int>& labels,
                                   const BoostParams& params) {
  params.validate();
  require(features.rows > 0, "boost", "empty training set");
  require(features.rows == labels.size(), "boost", "features/labels size mismatch");

  const std::size_t n = features.rows;
  const QuantizedMatrix qm = quantize(features, params.border_count);

  ObliviousEnsemble ensemble;
  ensemble.params = params;
  ensemble.borders = qm.borders;

  double p1 = 0.0;
  for (int y : labels) p1 += static_cast<double>(y);
  p1 /= static_cast<double>(n);
  const double eps = 1.0 / (2.0 * static_cast<double>(n));
  p1 = std::clamp(p1, eps, 1.0 - eps);
  ensemble.base_score = std::log(p1 / (1.0 - p1));

  std::vector<double> margin(n, ensemble.base_score);
  std::vector<double> g(n), h(n);
  std::vector<std::size_t> leaf_of(n);
  const double lambda = params.l2_leaf_reg;

  auto gain_term = [lambda](double gs, double hs) {
    return gs * gs / (hs + lambda);
  };

  for (std::size_t iter = 0; iter < params.iterations; ++iter) {
    for (std::size_t r = 0; r < n; ++r) {
      const double p = sigmoid(margin[r]);
      g[r] = p - static_cast<double>(labels[r]);
      h[r] = p * (1.0 - p);
    }
    std::fill(leaf_of.begin(), leaf_of.end(), 0);

    ObliviousTree tree;
    for (std::size_t level = 0; level < params.depth; ++level) {
      const std::size_t n_leaves = static_cast<std::size_t>(1) << level;
      detail::LevelChoice choice;
      for (std::size_t f = 0; f < qm.cols; ++f) {
        const std::size_t n_borders = qm.borders[f].size();
        if (n_borders == 0) continue;
        const std::size_t n_bins = n_borders + 1;
        std::vector<double> hist_g(n_leaves * n_bins, 0.0);
        std::vector<double> hist_h(n_leaves * n_bins, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
          const std::size_t slot = leaf_of[r] * n_bins + qm.bin(r, f);
          hist_g[slot] += g[r];
          hist_h[slot] += h[r];
        }
        // Prefix over bins turns each border index into a left/right split.
        std::vector<double> left_g(n_leaves, 0.0), left_h(n_leaves, 0.0);
        std::vector<double> total_g(n_leaves, 0.0), total_h(n_leaves, 0.0);
        for (std::size_t leaf = 0; leaf < n_leaves; ++leaf) {
          for (std::size_t b = 0; b < n_bins; ++b) {
            total_g[leaf] += hist_g[leaf * n_bins + b];
            total_h[leaf] += hist_h[leaf * n_bins + b];
          }
        }
        for (std::size_t t = 0; t < n_borders; ++t) {
          double gain = 0.0;
          for (std::size_t leaf = 0; leaf < n_leaves; ++leaf) {
            left_g[leaf] += hist_g[leaf * n_bins + t];
            left_h[leaf] += hist_h[leaf * n_bins + t];
            const double right_g = total_g[leaf] - left_g[leaf];
            const double right_h = total_h[leaf] - left_h[leaf];
            gain += gain_term(left_g[leaf], left_h[leaf]) + gain_term(right_g, right_h) -
                    gain_term(total_g[leaf], total_h[leaf]);
          }
          if (!choice.found || gain > choice.gain) {
            choice = {true, f, t, gain};
          }
        }
      }
      if (!choice.found) break;  // no splittable feature (all constant)
      tree.levels.push_back({choice.feature, choice.border});
      for (std::size_t r = 0; r < n; ++r) {
        const bool bit = qm.bin(r, choice.feature) > choice.border;
        leaf_of[r] = (leaf_of[r] << 1) | static_cast<std::size_t>(bit);
      }
    }

    const std::size_t n_leaves = static_cast<std::size_t>(1) << tree.levels.size();
    std::vector<double> leaf_g(n_leaves, 0.0), leaf_h(n_leaves, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      leaf_g[leaf_of[r]] += g[r];
      leaf_h[leaf_of[r]] += h[r];
    }
    tree.leaf_values.resize(n_leaves);
    for (std::size_t leaf = 0; leaf < n_leaves; ++leaf)
      tree.leaf_values[leaf] = -leaf_g[leaf] / (leaf_h[leaf] + lambda);

    for (std::size_t r = 0; r < n; ++r)
      margin[r] += params.learning_rate * tree.leaf_values[leaf_of[r]];
    ensemble.trees.push_back(std::move(tree));
  }
  return ensemble;
}

inline std::vector<double> predict_margin(const ObliviousEnsemble& ensemble,
                                          const Matrix& features) {
  require(features.cols == ensemble.n_features(), "boost",
          "model has " + std::to_string(ensemble.n_features()) +
              " features, input has " + std::to_string(features.cols));
  std::vector<double> margin(features.rows, ensemble.base_score);
  for (std::size_t r = 0; r < features.rows; ++r) {
    const double* x = features.row(r);
    for (const auto& tree : ensemble.trees)
      margin[r] +=
          ensemble.params.learning_rate * tree.leaf_values[tree.leaf_index(x, ensemble.borders)];
  }
  return margin;
}

inline std::vector<double> predict_proba(const ObliviousEnsemble& ensemble,
                                         const Matrix& features) {
  auto m = predict_margin(ensemble, features);
  for (auto& v : m) v = sigmoid(v);
  return m;
}

// Mean log-loss of the ensemble's margins on a labeled set.
inline double boost_log_loss(const ObliviousEnsemble& ensemble, const Matrix& features,
                             const std::vector<int>& labels) {
  const auto margins = predict_margin(ensemble, features);
  double loss = 0.0;
  for (std::size_t r = 0; r < margins.size(); ++r)
    loss += softplus(margins[r]) - static_cast<double>(labels[r]) * margins[r];
  return loss / static_cast<double>(margins.size());
}

}  // namespace ckd
