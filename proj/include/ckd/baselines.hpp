#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ckd/error.hpp"
#include "ckd/mathutil.hpp"
#include "ckd/matrix.hpp"
#include "ckd/rng.hpp"

namespace ckd {

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  double l2 = 0.0;
};

struct LogregHyper {
  double l2 = 0.01;
  double lr = 0.1;
  std::size_t epochs = 200;
};

// Mean log-loss in the stable logit form plus (l2/2)*||w||^2 (bias excluded).
inline double logreg_loss(const Matrix& features, const std::vector<int>& labels,
                          const std::vector<double>& weights, double bias, double l2) {
  double loss = 0.0;
  for (std::size_t r = 0; r < features.rows; ++r) {
    double z = bias;
    for (std::size_t c = 0; c < features.cols; ++c)
      z += weights[c] * features.at(r, c);
    loss += softplus(z) - static_cast<double>(labels[r]) * z;
  }
  loss /= static_cast<double>(features.rows);
  double reg = 0.0;
  for (double w : weights) reg += w * w;
  return loss + 0.5 * l2 * reg;
}

inline void logreg_gradient(const Matrix& features, const std::vector<int>& labels,
                            const std::vector<double>& weights, double bias, double l2,
                            std::vector<double>& grad_w, double& grad_b) {
  grad_w.assign(features.cols, 0.0);
  grad_b = 0.0;
  for (std::size_t r = 0; r < features.rows; ++r) {
    double z = bias;
    for (std::size_t c = 0; c < features.cols; ++c)
      z += weights[c] * features.at(r, c);
    const double err = sigmoid(z) - static_cast<double>(labels[r]);
    for (std::size_t c = 0; c < features.cols; ++c)
      grad_w[c] += err * features.at(r, c);
    grad_b += err;
  }
  const double inv_n = 1.0 / static_cast<double>(features.rows);
  for (std::size_t c = 0; c < features.cols; ++c)
    grad_w[c] = grad_w[c] * inv_n + l2 * weights[c];
  grad_b *= inv_n;
}

// Full-batch gradient descent from zero initialization; deterministic.
inline LinearModel train_logreg(const Matrix& features, const std::vector<int>& labels,
                                const LogregHyper& hyper) {
  require(features.rows > 0, "logreg", "empty training set");
  require(features.rows == labels.size(), "logreg", "features/labels size mismatch");
  LinearModel model;
  model.weights.assign(features.cols, 0.0);
  model.bias = 0.0;
  model.l2 = hyper.l2;
  std::vector<double> grad_w;
  double grad_b = 0.0;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    logreg_gradient(features, labels, model.weights, model.bias, hyper.l2, grad_w,
                    grad_b);
    for (std::size_t c = 0; c < features.cols; ++c)
      model.weights[c] -= hyper.lr * grad_w[c];
    model.bias -= hyper.lr * grad_b;
    const double loss =
        logreg_loss(features, labels, model.weights, model.bias, hyper.l2);
    if (!std::isfinite(loss))
      fail("logreg", "non-finite loss at epoch " + std::to_string(epoch) +
                         " (learning rate too high?)");
  }
  return model;
}

inline std::vector<double> predict_proba(const LinearModel& model, const Matrix& features) {
  require(features.cols == model.weights.size(), "logreg",
          "model has " + std::to_string(model.weights.size()) + " features, input has " +
              std::to_string(features.cols));
  std::vector<double> p(features.rows);
  for (std::size_t r = 0; r < features.rows; ++r) {
    double z = model.bias;
    for (std::size_t c = 0; c < features.cols; ++c)
      z += model.weights[c] * features.at(r, c);
    p[r] = sigmoid(z);
  }
  return p;
}

// ---------------------------------------------------------------------------
// One-hidden-layer MLP (ReLU hidden, sigmoid output)
// ---------------------------------------------------------------------------

struct MlpModel {
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::vector<double> w1;  // hidden x inputs, row-major
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // hidden
  double b2 = 0.0;
};

struct MlpHyper {
  std::size_t hidden = 32;
  double lr = 0.01;
  std::size_t epochs = 120;
  double l2 = 0.01;
  std::uint64_t seed = 0;
  std::size_t batch = 32;
};

namespace detail {

inline void mlp_forward(const MlpModel& m, const double* x, std::vector<double>& h,
                        double& z) {
  h.resize(m.hidden);
  for (std::size_t j = 0; j < m.hidden; ++j) {
    double a = m.b1[j];
    const double* wrow = m.w1.data() + j * m.inputs;
    for (std::size_t c = 0; c < m.inputs; ++c) a += wrow[c] * x[c];
    h[j] = a > 0.0 ? a : 0.0;
  }
  z = m.b2;
  for (std::size_t j = 0; j < m.hidden; ++j) z += m.w2[j] * h[j];
}

}  // namespace detail

struct MlpGradient {
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;
};

inline double mlp_loss(const MlpModel& model, const Matrix& features,
                       const std::vector<int>& labels, double l2) {
  std::vector<double> h;
  double loss = 0.0;
  for (std::size_t r = 0; r < features.rows; ++r) {
    double z = 0.0;
    detail::mlp_forward(model, features.row(r), h, z);
    loss += softplus(z) - static_cast<double>(labels[r]) * z;
  }
  loss /= static_cast<double>(features.rows);
  double reg = 0.0;
  for (double w : model.w1) reg += w * w;
  for (double w : model.w2) reg += w * w;
  return loss + 0.5 * l2 * reg;
}

// Backprop gradient of mlp_loss over the given batch.
inline MlpGradient mlp_gradient(const MlpModel& model, const Matrix& features,
                                const std::vector<int>& labels, double l2) {
  MlpGradient g;
  g.w1.assign(model.w1.size(), 0.0);
  g.b1.assign(model.b1.size(), 0.0);
  g.w2.assign(model.w2.size(), 0.0);
  g.b2 = 0.0;
  std::vector<double> h;
  for (std::size_t r = 0; r < features.rows; ++r) {
    double z = 0.0;
    const double* x = features.row(r);
    detail::mlp_forward(model, x, h, z);
    const double err = sigmoid(z) - static_cast<double>(labels[r]);
    g.b2 += err;
    for (std::size_t j = 0; j < model.hidden; ++j) {
      g.w2[j] += err * h[j];
      if (h[j] > 0.0) {
        const double dj = err * model.w2[j];
        g.b1[j] += dj;
        double* grow = g.w1.data() + j * model.inputs;
        for (std::size_t c = 0; c < model.inputs; ++c) grow[c] += dj * x[c];
      }
    }
  }
  const double inv_n = 1.0 / static_cast<double>(features.rows);
  for (std::size_t i = 0; i < g.w1.size(); ++i)
    g.w1[i] = g.w1[i] * inv_n + l2 * model.w1[i];
  for (std::size_t i = 0; i < g.w2.size(); ++i)
    g.w2[i] = g.w2[i] * inv_n + l2 * model.w2[i];
  for (auto& b : g.b1) b *= inv_n;
  g.b2 *= inv_n;
  return g;
}

inline MlpModel init_mlp(std::size_t inputs, std::size_t hidden, Rng& rng) {
  MlpModel m;
  m.inputs = inputs;
  m.hidden = hidden;
  m.w1.resize(hidden * inputs);
  m.b1.assign(hidden, 0.0);
  m.w2.resize(hidden);
  m.b2 = 0.0;
  const double limit1 = std::sqrt(6.0 / static_cast<double>(inputs + hidden));
  for (auto& w : m.w1) w = rng.uniform(-limit1, limit1);
  const double limit2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
  for (auto& w : m.w2) w = rng.uniform(-limit2, limit2);
  return m;
}

// Mini-batch SGD with a seeded per-epoch shuffle.
inline MlpModel train_mlp(const Matrix& features, const std::vector<int>& labels,
                          const MlpHyper& hyper) {
  require(features.rows > 0, "mlp", "empty training set");
  require(features.rows == labels.size(), "mlp", "features/labels size mismatch");
  require(hyper.hidden >= 1, "mlp", "hidden must be >= 1");
  require(hyper.batch >= 1, "mlp", "batch must be >= 1");
  Rng rng(hyper.seed);
  MlpModel model = init_mlp(features.cols, hyper.hidden, rng);

  std::vector<std::size_t> order(features.rows);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
      const std::size_t end = std::min(order.size(), start + hyper.batch);
      Matrix bx(end - start, features.cols);
      std::vector<int> by(end - start);
      for (std::size_t i = start; i < end; ++i) {
        for (std::size_t c = 0; c < features.cols; ++c)
          bx.at(i - start, c) = features.at(order[i], c);
        by[i - start] = labels[order[i]];
      }
      const MlpGradient g = mlp_gradient(model, bx, by, hyper.l2);
      for (std::size_t i = 0; i < model.w1.size(); ++i) model.w1[i] -= hyper.lr * g.w1[i];
      for (std::size_t i = 0; i < model.b1.size(); ++i) model.b1[i] -= hyper.lr * g.b1[i];
      for (std::size_t i = 0; i < model.w2.size(); ++i) model.w2[i] -= hyper.lr * g.w2[i];
      model.b2 -= hyper.lr * g.b2;
    }
    const double loss = mlp_loss(model, features, labels, hyper.l2);
    if (!std::isfinite(loss))
      fail("mlp", "non-finite loss at epoch " + std::to_string(epoch));
  }
  return model;
}

inline std::vector<double> predict_proba(const MlpModel& model, const Matrix& features) {
  require(features.cols == model.inputs, "mlp",
          "model has " + std::to_string(model.inputs) + " features, input has " +
              std::to_string(features.cols));
  std::vector<double> p(features.rows);
  std::vector<double> h;
  for (std::size_t r = 0; r < features.rows; ++r) {
    double z = 0.0;
    detail::mlp_forward(model, features.row(r), h, z);
    p[r] = sigmoid(z);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Random forest (axis-aligned trees, Gini impurity, bootstrap per tree)
// ---------------------------------------------------------------------------

struct TreeNode {
  int feature = -1;        // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double p1 = 0.0;         // leaf probability of label 1
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  double predict(const double* x) const {
    int idx = 0;
    while (nodes[idx].feature >= 0) {
      idx = (x[nodes[idx].feature] < nodes[idx].threshold) ? nodes[idx].left
                                                           : nodes[idx].right;
    }
    return nodes[idx].p1;
  }
};

struct Forest {
  std::vector<DecisionTree> trees;
  std::size_t n_features = 0;
};

struct ForestHyper {
  std::size_t n_trees = 100;
  int max_depth = -1;            // -1 = unlimited; 0 is rejected
  std::size_t min_leaf = 1;
  std::uint64_t seed = 0;
  std::size_t features_per_split = 0;  // 0 = floor(sqrt(d)), at least 1
};

namespace detail {

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted child Gini
};

inline double gini(std::size_t n1, std::size_t n) {
  if (n == 0) return 0.0;
  const double p = static_cast<double>(n1) / static_cast<double>(n);
  return 2.0 * p * (1.0 - p);
}

inline SplitChoice best_split(const Matrix& x, const std::vector<int>& y,
                              const std::vector<std::size_t>& rows,
                              const std::vector<std::size_t>& features,
                              std::size_t min_leaf) {
  SplitChoice best;
  for (std::size_t f : features) {
    std::vector<std::pair<double, int>> vals;
    vals.reserve(rows.size());
    for (std::size_t r : rows) vals.emplace_back(x.at(r, f), y[r]);
    std::sort(vals.begin(), vals.end());
    std::size_t total1 = 0;
    for (const auto& [v, label] : vals) total1 += static_cast<std::size_t>(label);
    std::size_t left_n = 0, left_1 = 0;
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
      ++left_n;
      left_1 += static_cast<std::size_t>(vals[i].second);
      if (vals[i].first == vals[i + 1].first) continue;
      const std::size_t right_n = vals.size() - left_n;
      if (left_n < min_leaf || right_n < min_leaf) continue;
      const double threshold = vals[i].first + 0.5 * (vals[i + 1].first - vals[i].first);
      const double impurity =
          (static_cast<double>(left_n) * gini(left_1, left_n) +
           static_cast<double>(right_n) * gini(total1 - left_1, right_n)) /
          static_cast<double>(vals.size());
      // Ties break toward the lowest feature index, then lowest threshold;
      // `features` is scanned in ascending order so strict < suffices.
      if (!best.found || impurity < best.impurity) {
        best = {true, static_cast<int>(f), threshold, impurity};
      }
    }
  }
  return best;
}

inline int grow_tree(DecisionTree& tree, const Matrix& x, const std::vector<int>& y,
                     std::vector<std::size_t> rows, int depth, const ForestHyper& hyper,
                     std::size_t mtry, Rng& rng) {
  std::size_t n1 = 0;
  for (std::size_t r : rows) n1 += static_cast<std::size_t>(y[r]);

  const bool pure = (n1 == 0 || n1 == rows.size());
  const bool depth_capped = hyper.max_depth >= 0 && depth >= hyper.max_depth;
  SplitChoice split;
  if (!pure && !depth_capped && rows.size() >= 2 * hyper.min_leaf) {
    std::vector<std::size_t> pool(x.cols);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    std::vector<std::size_t> candidates;
    if (mtry >= x.cols) {
      candidates = pool;
    } else {
      for (std::size_t i = 0; i < mtry; ++i) {  // partial Fisher-Yates
        const std::size_t j = i + rng.index(pool.size() - i);
        std::swap(pool[i], pool[j]);
        candidates.push_back(pool[i]);
      }
      std::sort(candidates.begin(), candidates.end());
    }
    split = best_split(x, y, rows, candidates, hyper.min_leaf);
  }

  const int idx = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (!split.found) {
    tree.nodes[idx].p1 = static_cast<double>(n1) / static_cast<double>(rows.size());
    return idx;
  }
  std::vector<std::size_t> left_rows, right_rows;
  for (std::size_t r : rows) {
    if (x.at(r, static_cast<std::size_t>(split.feature)) < split.threshold)
      left_rows.push_back(r);
    else
      right_rows.push_back(r);
  }
  rows.clear();
  rows.shrink_to_fit();
  tree.nodes[idx].feature = split.feature;
  tree.nodes[idx].threshold = split.threshold;
  const int left = grow_tree(tree, x, y, std::move(left_rows), depth + 1, hyper, mtry, rng);
  const int right = grow_tree(tree, x, y, std::move(right_rows), depth + 1, hyper, mtry, rng);
  tree.nodes[idx].left = left;
  tree.nodes[idx].right = right;
  return idx;
}

}  // namespace detail

inline Forest train_forest(const Matrix& features, const std::vector<int>& labels,
                           const ForestHyper& hyper) {
  require(features.rows > 0, "forest", "empty training set");
  require(features.rows == labels.size(), "forest", "features/labels size mismatch");
  require(hyper.n_trees >= 1, "forest", "n_trees must be >= 1");
  require(hyper.max_depth != 0, "forest", "max_depth 0 is degenerate (use -1 for none)");
  require(hyper.min_leaf >= 1 && hyper.min_leaf <= features.rows, "forest",
          "min_leaf must be in [1, n]");

  std::size_t mtry = hyper.features_per_split;
  if (mtry == 0)
    mtry = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::sqrt(static_cast<double>(features.cols))));
  mtry = std::min(mtry, features.cols);

  Forest forest;
  forest.n_features = features.cols;
  forest.trees.resize(hyper.n_trees);
  for (std::size_t t = 0; t < hyper.n_trees; ++t) {
    Rng rng(derive_seed(hyper.seed, "tree", t));
    std::vector<std::size_t> rows(features.rows);
    for (auto& r : rows) r = rng.index(features.rows);  // bootstrap
    detail::grow_tree(forest.trees[t], features, labels, std::move(rows), 0, hyper,
                      mtry, rng);
  }
  return forest;
}

inline std::vector<double> predict_proba(const Forest& model, const Matrix& features) {
  require(features.cols == model.n_features, "forest",
          "model has " + std::to_string(model.n_features) + " features, input has " +
              std::to_string(features.cols));
  std::vector<double> p(features.rows, 0.0);
  for (std::size_t r = 0; r < features.rows; ++r) {
    double sum = 0.0;
    for (const auto& tree : model.trees) sum += tree.predict(features.row(r));
    p[r] = sum / static_cast<double>(model.trees.size());
  }
  return p;
}

// Hard label from a probability; exactly 0.5 maps to 1.
inline int hard_label(double p) { return p >= 0.5 ? 1 : 0; }

inline std::vector<int> hard_labels(const std::vector<double>& probs) {
  std::vector<int> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = hard_label(probs[i]);
  return out;
}

}  // namespace ckd
