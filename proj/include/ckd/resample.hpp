#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "ckd/error.hpp"
#include "ckd/matrix.hpp"
#include "ckd/rng.hpp"

namespace ckd {

struct SplitConfig {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct SmoteConfig {
  std::size_t target_per_class = 450;
  std::size_t k_neighbors = 5;
  std::uint64_t seed = 0;
};

struct Split {
  Matrix train_x;
  std::vector<int> train_y;
  Matrix test_x;
  std::vector<int> test_y;
  std::vector<std::size_t> train_indices;  // into the input rows, ascending
  std::vector<std::size_t> test_indices;
};

namespace detail {

inline std::vector<int> distinct_classes(const std::vector<int>& labels) {
  std::vector<int> classes;
  for (int y : labels)
    if (std::find(classes.begin(), classes.end(), y) == classes.end())
      classes.push_back(y);
  std::sort(classes.begin(), classes.end());
  return classes;
}

}  // namespace detail

// Per class: Fisher-Yates shuffle with a class-derived child seed, first
// floor(test_fraction * n_class) rows to test, the rest to train.
inline Split stratified_split(const Matrix& features, const std::vector<int>& labels,
                              const SplitConfig& config) {
  require(config.test_fraction > 0.0 && config.test_fraction < 1.0, "split",
          "test_fraction must be in (0,1)");
  require(features.rows == labels.size(), "split", "features/labels size mismatch");
  const auto classes = detail::distinct_classes(labels);
  require(classes.size() >= 2, "split", "both classes must be present");

  std::vector<std::size_t> train_idx, test_idx;
  for (int cls : classes) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    require(idx.size() >= 2, "split",
            "class " + std::to_string(cls) + " has fewer than 2 rows");
    const auto n_test = static_cast<std::size_t>(
        config.test_fraction * static_cast<double>(idx.size()));
    require(n_test >= 1, "split",
            "test split empty for class " + std::to_string(cls));
    require(n_test < idx.size(), "split",
            "train split empty for class " + std::to_string(cls));
    Rng rng(derive_seed(config.seed, "split-class", static_cast<std::uint64_t>(cls)));
    rng.shuffle(idx);
    test_idx.insert(test_idx.end(), idx.begin(), idx.begin() + n_test);
    train_idx.insert(train_idx.end(), idx.begin() + n_test, idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  Split s;
  s.train_x = features.select_rows(train_idx);
  s.train_y = select(labels, train_idx);
  s.test_x = features.select_rows(test_idx);
  s.test_y = select(labels, test_idx);
  s.train_indices = std::move(train_idx);
  s.test_indices = std::move(test_idx);
  return s;
}

// Provenance of one synthetic row, for auditing the convex-combination
// invariant: row = base + u * (neighbor - base).
struct SmoteAudit {
  int label = 0;
  std::size_t base_row = 0;      // index into the input rows
  std::size_t neighbor_row = 0;
  double u = 0.0;
};

struct SmoteResult {
  Matrix features;
  std::vector<int> labels;
  std::vector<SmoteAudit> audit;  // one entry per synthetic row, in output order
};

// SMOTE oversampling of every class up to target_per_class. Original rows are
// preserved verbatim and come first in the output.
inline SmoteResult smote(const Matrix& features, const std::vector<int>& labels,
                         const SmoteConfig& config) {
  require(features.rows == labels.size(), "smote", "features/labels size mismatch");
  require(config.k_neighbors >= 1, "smote", "k_neighbors must be >= 1");
  const auto classes = detail::distinct_classes(labels);

  std::vector<std::vector<std::size_t>> members(classes.size());
  for (std::size_t cls = 0; cls < classes.size(); ++cls)
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == classes[cls]) members[cls].push_back(i);

  for (std::size_t cls = 0; cls < classes.size(); ++cls) {
    require(members[cls].size() <= config.target_per_class, "smote",
            "class " + std::to_string(classes[cls]) + " already exceeds target " +
                std::to_string(config.target_per_class));
    require(config.k_neighbors < members[cls].size(), "smote",
            "k_neighbors must be smaller than class " + std::to_string(classes[cls]) +
                " size " + std::to_string(members[cls].size()));
  }

  SmoteResult out;
  out.features = features;
  out.labels = labels;

  for (std::size_t cls = 0; cls < classes.size(); ++cls) {
    const auto& rows = members[cls];
    Rng rng(derive_seed(config.seed, "smote-class", static_cast<std::uint64_t>(classes[cls])));

    // k nearest same-class neighbors per member (Euclidean, ties -> lower row).
    std::vector<std::vector<std::size_t>> nearest(rows.size());
    auto neighbors_of = [&](std::size_t mi) -> const std::vector<std::size_t>& {
      if (!nearest[mi].empty()) return nearest[mi];
      std::vector<std::pair<double, std::size_t>> dist;
      for (std::size_t mj = 0; mj < rows.size(); ++mj) {
        if (mj == mi) continue;
        double d2 = 0.0;
        for (std::size_t c = 0; c < features.cols; ++c) {
          const double diff = features.at(rows[mi], c) - features.at(rows[mj], c);
          d2 += diff * diff;
        }
        dist.emplace_back(d2, rows[mj]);
      }
      std::sort(dist.begin(), dist.end());
      for (std::size_t k = 0; k < config.k_neighbors; ++k)
        nearest[mi].push_back(dist[k].second);
      return nearest[mi];
    };

    const std::size_t need = config.target_per_class - rows.size();
    for (std::size_t s = 0; s < need; ++s) {
      const std::size_t mi = rng.index(rows.size());
      const auto& nn = neighbors_of(mi);
      const std::size_t nb = nn[rng.index(nn.size())];
      const double u = rng.uniform01();
      const std::size_t base = rows[mi];
      out.features.rows += 1;
      for (std::size_t c = 0; c < features.cols; ++c) {
        const double x = features.at(base, c);
        out.features.data.push_back(x + u * (features.at(nb, c) - x));
      }
      out.labels.push_back(classes[cls]);
      out.audit.push_back({classes[cls], base, nb, u});
    }
  }
  return out;
}

}  // namespace ckd
