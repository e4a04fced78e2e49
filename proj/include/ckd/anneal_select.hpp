#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "ckd/baselines.hpp"
#include "ckd/error.hpp"
#include "ckd/evaluate.hpp"
#include "ckd/matrix.hpp"
#include "ckd/rng.hpp"

namespace ckd {

struct FeatureMask {
  std::vector<bool> bits;

  std::size_t count() const {
    std::size_t n = 0;
    for (bool b : bits) n += b ? 1 : 0;
    return n;
  }
  std::vector<std::size_t> selected() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i]) idx.push_back(i);
    return idx;
  }
};

struct SAConfig {
  double t0 = 1.0;
  double cooling = 0.95;
  std::size_t max_iter = 300;
  double feature_penalty = 0.001;
  std::size_t probe_folds = 3;
  std::uint64_t seed = 0;

  void validate() const {
    require(t0 > 0.0, "sa", "t0 must be positive");
    require(cooling > 0.0 && cooling < 1.0, "sa", "cooling must be in (0,1)");
    require(probe_folds >= 2, "sa", "probe_folds must be >= 2");
    require(feature_penalty >= 0.0, "sa", "feature_penalty must be non-negative");
  }
};

struct FitnessTrace {
  std::vector<double> avg_fitness;  // running mean of the current solution's fitness
  std::vector<double> max_fitness;  // best-so-far, non-decreasing
  // Accept-decision instrumentation: strictly improving neighbors must always
  // be accepted.
  std::size_t improving_proposals = 0;
  std::size_t improving_accepted = 0;
};

// Wrapper fitness: stratified CV accuracy of a fixed cheap probe (logistic
// regression, 200 epochs, lr 0.1, L2 0.01) on the masked columns, minus
// feature_penalty * (selected / total). The fold assignment depends only on
// (labels, config.seed), so fitness is a fixed function of the mask within a
// run — the exhaustive-search oracle relies on that.
inline double fitness(const FeatureMask& mask, const Matrix& features,
                      const std::vector<int>& labels, const SAConfig& config) {
  config.validate();
  require(mask.bits.size() == features.cols, "sa", "mask width mismatch");
  const auto cols = mask.selected();
  require(!cols.empty(), "sa", "fitness of an empty mask");

  const Matrix sub = features.select_cols(cols);
  const TrainPredictFn probe = [](const Matrix& tx, const std::vector<int>& ty,
                                  const Matrix& vx, std::uint64_t) {
    const LinearModel m = train_logreg(tx, ty, LogregHyper{0.01, 0.1, 200});
    return predict_proba(m, vx);
  };
  const auto accs = kfold_cv(sub, labels, config.probe_folds,
                             derive_seed(config.seed, "sa-probe-folds", 0), probe);
  const double penalty = config.feature_penalty * static_cast<double>(cols.size()) /
                         static_cast<double>(features.cols);
  return mean(accs) - penalty;
}

struct SAResult {
  FeatureMask best_mask;
  double best_fitness = 0.0;
  FitnessTrace trace;
};

// Simulated annealing over feature bitmasks: flip one uniformly chosen bit per
// iteration (re-flip if the result would be empty), Metropolis acceptance
// against the current solution, geometric cooling t0 * cooling^i.
inline SAResult sa_select(const Matrix& features, const std::vector<int>& labels,
                          const SAConfig& config) {
  config.validate();
  require(features.cols >= 2, "sa", "need at least 2 candidate features");
  {
    bool has0 = false, has1 = false;
    for (int y : labels) (y == 1 ? has1 : has0) = true;
    require(has0 && has1, "sa", "both classes must be present");
  }

  Rng rng(config.seed);
  FeatureMask current;
  current.bits.resize(features.cols);
  do {
    for (std::size_t i = 0; i < current.bits.size(); ++i)
      current.bits[i] = rng.uniform01() < 0.5;
  } while (current.count() == 0);

  double current_fit = fitness(current, features, labels, config);

  SAResult result;
  result.best_mask = current;
  result.best_fitness = current_fit;
  result.trace.avg_fitness.push_back(current_fit);
  result.trace.max_fitness.push_back(current_fit);

  double fitness_sum = current_fit;
  for (std::size_t iter = 0; iter < config.max_iter; ++iter) {
    const double temperature =
        config.t0 * std::pow(config.cooling, static_cast<double>(iter));

    FeatureMask neighbor = current;
    for (;;) {
      const std::size_t bit = rng.index(neighbor.bits.size());
      neighbor.bits[bit] = !neighbor.bits[bit];
      if (neighbor.count() > 0) break;
      neighbor.bits[bit] = !neighbor.bits[bit];  // undo and redraw
    }
    const double neighbor_fit = fitness(neighbor, features, labels, config);
    const double delta = neighbor_fit - current_fit;
    bool accept = false;
    if (delta >= 0.0) {
      accept = true;
    } else {
      accept = rng.uniform01() < std::exp(delta / temperature);
    }
    if (delta > 0.0) {
      ++result.trace.improving_proposals;
      if (accept) ++result.trace.improving_accepted;
    }
    if (accept) {
      current = neighbor;
      current_fit = neighbor_fit;
    }
    if (current_fit > result.best_fitness) {
      result.best_fitness = current_fit;
      result.best_mask = current;
    }
    fitness_sum += current_fit;
    result.trace.avg_fitness.push_back(fitness_sum /
                                       static_cast<double>(iter + 2));
    result.trace.max_fitness.push_back(result.best_fitness);
  }
  return result;
}

}  // namespace ckd
