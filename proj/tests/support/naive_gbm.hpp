#pragma once

// Reference squared-loss boosting with an exhaustive split search. Slow and
// allocation-heavy on purpose: it shares no code with the histogram builder
// and serves only as a test oracle on small data.

#include <algorithm>
#include <cmath>
#include <vector>

namespace naive {

struct Params {
  double learning_rate = 0.1;
  int iterations = 10;
  int max_depth = 3;
  int num_leaves = 8;
  int min_data_in_leaf = 5;
  double lambda = 0.0;
};

struct Node {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  int depth = 0;
};

using Rows = std::vector<std::vector<double>>;

inline double shrink(double g, double lambda) {
  return g > lambda ? g - lambda : (g < -lambda ? g + lambda : 0.0);
}

inline double score(double g, double h, double lambda) {
  const double t = shrink(g, lambda);
  return t * t / (h + 1e-12);
}

struct Best {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

inline Best best_split(const Rows& X, const std::vector<double>& grad, const std::vector<int>& idx,
                       const Params& p) {
  Best best;
  double g = 0.0;
  for (int i : idx) g += grad[i];
  const double h = 2.0 * static_cast<double>(idx.size());
  const double parent = score(g, h, p.lambda);
  const std::size_t features = X[0].size();
  for (std::size_t f = 0; f < features; ++f) {
    std::vector<double> values;
    for (int i : idx) values.push_back(X[i][f]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      const double thr = values[k] + (values[k + 1] - values[k]) / 2.0;
      double gl = 0.0;
      int nl = 0;
      for (int i : idx) {
        if (X[i][f] <= thr) {
          gl += grad[i];
          ++nl;
        }
      }
      const int nr = static_cast<int>(idx.size()) - nl;
      if (nl < p.min_data_in_leaf || nr < p.min_data_in_leaf) continue;
      const double gain = score(gl, 2.0 * nl, p.lambda) + score(g - gl, 2.0 * nr, p.lambda) - parent;
      if (gain > best.gain) best = Best{gain, static_cast<int>(f), thr};
    }
  }
  return best;
}

/// Thresholds above are midpoints of the distinct values inside the node,
/// while the histogram builder uses midpoints of the distinct values of the
/// whole column. Both route every training row identically.
inline std::vector<Node> fit_tree(const Rows& X, const std::vector<double>& grad, const Params& p) {
  std::vector<Node> nodes(1);
  std::vector<std::vector<int>> members(1);
  for (int i = 0; i < static_cast<int>(X.size()); ++i) members[0].push_back(i);
  std::vector<int> open{0};
  while (static_cast<int>(open.size()) < p.num_leaves) {
    int pick = -1;
    Best pick_split;
    for (int leaf : open) {
      if (nodes[leaf].depth >= p.max_depth) continue;
      const Best b = best_split(X, grad, members[leaf], p);
      if (b.feature >= 0 && b.gain > pick_split.gain) {
        pick_split = b;
        pick = leaf;
      }
    }
    if (pick < 0) break;
    const int l = static_cast<int>(nodes.size());
    const int r = l + 1;
    nodes[pick].feature = pick_split.feature;
    nodes[pick].threshold = pick_split.threshold;
    nodes[pick].left = l;
    nodes[pick].right = r;
    nodes.push_back(Node{-1, 0.0, -1, -1, 0.0, nodes[pick].depth + 1});
    nodes.push_back(Node{-1, 0.0, -1, -1, 0.0, nodes[pick].depth + 1});
    members.resize(nodes.size());
    for (int i : members[pick])
      members[X[i][pick_split.feature] <= pick_split.threshold ? l : r].push_back(i);
    open.erase(std::find(open.begin(), open.end(), pick));
    open.push_back(l);
    open.push_back(r);
  }
  for (int leaf : open) {
    double g = 0.0;
    for (int i : members[leaf]) g += grad[i];
    nodes[leaf].value = -shrink(g, p.lambda) / (2.0 * static_cast<double>(members[leaf].size()) + 1e-12);
  }
  return nodes;
}

inline double route(const std::vector<Node>& nodes, const std::vector<double>& x) {
  int n = 0;
  while (nodes[n].feature >= 0) n = x[nodes[n].feature] <= nodes[n].threshold ? nodes[n].left : nodes[n].right;
  return nodes[n].value;
}

struct Model {
  double initial = 0.0;
  double learning_rate = 0.1;
  std::vector<std::vector<Node>> trees;

  double predict(const std::vector<double>& x) const {
    double f = initial;
    for (const auto& t : trees) f += learning_rate * route(t, x);
    return f;
  }
};

inline Model fit(const Rows& X, const std::vector<double>& y, const Params& p) {
  Model model;
  model.learning_rate = p.learning_rate;
  double sum = 0.0;
  for (double v : y) sum += v;
  model.initial = sum / static_cast<double>(y.size());
  std::vector<double> F(y.size(), model.initial);
  for (int it = 0; it < p.iterations; ++it) {
    std::vector<double> grad(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) grad[i] = 2.0 * (F[i] - y[i]);
    model.trees.push_back(fit_tree(X, grad, p));
    for (std::size_t i = 0; i < y.size(); ++i) F[i] += p.learning_rate * route(model.trees.back(), X[i]);
  }
  return model;
}

}  // namespace naive
