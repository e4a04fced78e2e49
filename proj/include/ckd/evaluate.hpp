#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ckd/baselines.hpp"
#include "ckd/error.hpp"
#include "ckd/matrix.hpp"
#include "ckd/rng.hpp"

namespace ckd {

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // some denominator was zero; value reported as 0
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct MetricsReport {
  double accuracy = 0.0;
  ClassMetrics class0;
  ClassMetrics class1;
  double auc = 0.0;
  double kappa = 0.0;
  bool kappa_degenerate = false;
  std::vector<RocPoint> roc;
  double training_time_seconds = 0.0;  // reported, never asserted
};

inline ConfusionMatrix confusion(const std::vector<int>& y_true,
                                 const std::vector<int>& y_pred, int positive_label) {
  require(y_true.size() == y_pred.size(), "evaluate",
          "confusion: length mismatch (" + std::to_string(y_true.size()) + " vs " +
              std::to_string(y_pred.size()) + ")");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool actual = y_true[i] == positive_label;
    const bool predicted = y_pred[i] == positive_label;
    if (actual && predicted)
      ++cm.tp;
    else if (!actual && predicted)
      ++cm.fp;
    else if (actual && !predicted)
      ++cm.fn;
    else
      ++cm.tn;
  }
  return cm;
}

// Swap the positive label: class-0 metrics of a class-1-oriented matrix.
inline ConfusionMatrix swap_positive(const ConfusionMatrix& cm) {
  return ConfusionMatrix{cm.tn, cm.fn, cm.fp, cm.tp};
}

inline ClassMetrics class_metrics(const ConfusionMatrix& cm) {
  ClassMetrics m;
  if (cm.tp + cm.fp == 0) {
    m.degenerate = true;
  } else {
    m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  }
  if (cm.tp + cm.fn == 0) {
    m.degenerate = true;
  } else {
    m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  }
  if (m.precision + m.recall == 0.0) {
    m.degenerate = true;
  } else {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

inline double accuracy(const ConfusionMatrix& cm) {
  require(cm.total() > 0, "evaluate", "empty confusion matrix");
  return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

struct KappaResult {
  double value = 0.0;
  bool degenerate = false;
};

// Cohen's kappa from the confusion matrix marginals.
inline KappaResult kappa(const ConfusionMatrix& cm) {
  require(cm.total() > 0, "evaluate", "empty confusion matrix");
  const double n = static_cast<double>(cm.total());
  const double po = static_cast<double>(cm.tp + cm.tn) / n;
  const double pred_pos = static_cast<double>(cm.tp + cm.fp) / n;
  const double actual_pos = static_cast<double>(cm.tp + cm.fn) / n;
  const double pe = pred_pos * actual_pos + (1.0 - pred_pos) * (1.0 - actual_pos);
  if (pe >= 1.0) {
    return {po >= 1.0 ? 1.0 : 0.0, true};
  }
  return {(po - pe) / (1.0 - pe), false};
}

// ROC by sweeping thresholds over distinct scores descending; tied scores are
// processed as one block. AUC by the trapezoid rule (equals the Mann-Whitney
// statistic with ties counted one half).
inline std::pair<std::vector<RocPoint>, double> roc_auc(const std::vector<int>& y_true,
                                                        const std::vector<double>& scores) {
  require(y_true.size() == scores.size(), "evaluate", "roc_auc: length mismatch");
  std::size_t pos = 0, neg = 0;
  for (int y : y_true) (y == 1 ? pos : neg) += 1;
  require(pos > 0 && neg > 0, "evaluate", "roc_auc requires both classes present");

  std::vector<std::size_t> order(y_true.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  std::vector<RocPoint> points;
  points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  double auc = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k) {
      if (y_true[order[k]] == 1)
        ++tp;
      else
        ++fp;
    }
    const RocPoint prev = points.back();
    const RocPoint cur = {static_cast<double>(fp) / static_cast<double>(neg),
                          static_cast<double>(tp) / static_cast<double>(pos)};
    auc += (cur.fpr - prev.fpr) * (prev.tpr + cur.tpr) * 0.5;
    points.push_back(cur);
    i = j;
  }
  return {points, auc};
}

// Trainer contract for CV/grid search: fit on (train_x, train_y) with the given
// child seed and return probabilities for test_x.
using TrainPredictFn = std::function<std::vector<double>(
    const Matrix& train_x, const std::vector<int>& train_y, const Matrix& test_x,
    std::uint64_t seed)>;

// Stratified fold assignment: per class, seeded shuffle then round-robin deal.
inline std::vector<std::vector<std::size_t>> stratified_folds(
    const std::vector<int>& labels, std::size_t k, std::uint64_t seed) {
  require(k >= 2, "evaluate", "k must be >= 2");
  std::vector<int> classes;
  for (int y : labels)
    if (std::find(classes.begin(), classes.end(), y) == classes.end())
      classes.push_back(y);
  std::sort(classes.begin(), classes.end());

  std::vector<std::vector<std::size_t>> folds(k);
  for (int cls : classes) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    require(idx.size() >= k, "evaluate",
            "class " + std::to_string(cls) + " has " + std::to_string(idx.size()) +
                " rows, fewer than k=" + std::to_string(k));
    Rng rng(derive_seed(seed, "fold-class", static_cast<std::uint64_t>(cls)));
    rng.shuffle(idx);
    for (std::size_t i = 0; i < idx.size(); ++i) folds[i % k].push_back(idx[i]);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

// Stratified k-fold cross-validation; returns per-fold accuracies in fold order.
inline std::vector<double> kfold_cv(const Matrix& features, const std::vector<int>& labels,
                                    std::size_t k, std::uint64_t seed,
                                    const TrainPredictFn& trainer) {
  const auto folds = stratified_folds(labels, k, seed);
  std::vector<double> accs;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train_idx;
    for (std::size_t g = 0; g < k; ++g)
      if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
    std::sort(train_idx.begin(), train_idx.end());

    const Matrix train_x = features.select_rows(train_idx);
    const std::vector<int> train_y = select(labels, train_idx);
    const Matrix test_x = features.select_rows(folds[f]);
    const std::vector<int> test_y = select(labels, folds[f]);

    const auto probs = trainer(train_x, train_y, test_x, derive_seed(seed, "fold", f));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test_y.size(); ++i)
      if (hard_label(probs[i]) == test_y[i]) ++correct;
    accs.push_back(static_cast<double>(correct) / static_cast<double>(test_y.size()));
  }
  return accs;
}

// Hyperparameter grid: name -> candidate values, enumerated with sorted key
// names and listed value order (last key varies fastest).
struct GridSpec {
  std::map<std::string, std::vector<double>> params;
};

using ParamMap = std::map<std::string, double>;
using TrainerFamilyFn = std::function<TrainPredictFn(const ParamMap&)>;

struct GridCell {
  ParamMap params;
  double mean_accuracy = 0.0;
  std::vector<double> fold_accuracies;
};

struct GridResult {
  ParamMap best_params;
  std::vector<double> best_fold_accuracies;
  std::vector<GridCell> table;
};

inline std::vector<ParamMap> enumerate_grid(const GridSpec& grid) {
  std::vector<std::string> keys;
  for (const auto& [k, values] : grid.params) {
    require(!values.empty(), "evaluate", "grid key '" + k + "' has no candidates");
    keys.push_back(k);  // std::map iterates keys sorted
  }
  std::vector<ParamMap> cells;
  std::vector<std::size_t> at(keys.size(), 0);
  while (true) {
    ParamMap cell;
    for (std::size_t i = 0; i < keys.size(); ++i)
      cell[keys[i]] = grid.params.at(keys[i])[at[i]];
    cells.push_back(std::move(cell));
    std::size_t i = keys.size();
    while (i > 0) {
      --i;
      if (++at[i] < grid.params.at(keys[i]).size()) break;
      at[i] = 0;
      if (i == 0) return cells;
    }
    if (keys.empty()) return cells;
  }
}

// Exhaustive grid search by mean CV accuracy; ties keep the earliest cell in
// enumeration order. Folds are shared across cells; trainer seeds are per-cell.
inline GridResult grid_search(const GridSpec& grid, const TrainerFamilyFn& family,
                              const Matrix& features, const std::vector<int>& labels,
                              std::size_t k, std::uint64_t seed) {
  GridResult result;
  const auto cells = enumerate_grid(grid);
  require(!cells.empty(), "evaluate", "empty grid");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    GridCell cell;
    cell.params = cells[i];
    TrainPredictFn trainer = family(cells[i]);
    // Same fold seed for every cell; a distinct child seed namespaces the
    // trainer randomness per cell.
    const std::uint64_t cell_seed = derive_seed(seed, "grid-cell", i);
    TrainPredictFn seeded = [&trainer, cell_seed](const Matrix& tx,
                                                  const std::vector<int>& ty,
                                                  const Matrix& vx, std::uint64_t fold_seed) {
      return trainer(tx, ty, vx, derive_seed(cell_seed, "cv", fold_seed));
    };
    cell.fold_accuracies = kfold_cv(features, labels, k, seed, seeded);
    cell.mean_accuracy = mean(cell.fold_accuracies);
    result.table.push_back(std::move(cell));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < result.table.size(); ++i)
    if (result.table[i].mean_accuracy > result.table[best].mean_accuracy) best = i;
  result.best_params = result.table[best].params;
  result.best_fold_accuracies = result.table[best].fold_accuracies;
  return result;
}

}  // namespace ckd
