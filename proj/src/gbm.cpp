#include "tsgbm/gbm.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tsgbm {

void GbmParams::validate() const {
  if (!(learning_rate > 0.0 && learning_rate <= 1.0))
    throw ConfigError("gbm.learning_rate must be in (0, 1]");
  if (iterations < 1) throw ConfigError("gbm.iterations must be >= 1");
  if (max_depth < 1) throw ConfigError("gbm.max_depth must be >= 1");
  if (num_leaves < 2) throw ConfigError("gbm.num_leaves must be >= 2");
  if (!(bagging_fraction > 0.0 && bagging_fraction <= 1.0))
    throw ConfigError("gbm.bagging_fraction must be in (0, 1]");
  if (min_data_in_leaf < 1) throw ConfigError("gbm.min_data_in_leaf must be >= 1");
  if (!(l1_regularization >= 0.0) || !std::isfinite(l1_regularization))
    throw ConfigError("gbm.l1_regularization must be >= 0");
  if (histogram_bins < 2 || histogram_bins > 65536)
    throw ConfigError("gbm.histogram_bins must be in [2, 65536]");
}

std::string to_string(LossKind kind) {
  return kind == LossKind::squared ? "squared" : "softmax_minimax";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "squared") return LossKind::squared;
  if (name == "softmax_minimax") return LossKind::softmax_minimax;
  throw ConfigError("unknown loss kind '" + name + "'");
}

void LossSpec::validate() const {
  if (!(K > 0.0) || !std::isfinite(K)) throw ConfigError("loss.K must be positive and finite");
}

namespace {

void check_lengths(const Vector& predictions, const Vector& targets, const char* what) {
  if (predictions.size() != targets.size())
    throw DomainError(std::string(what) + ": predictions and targets differ in length");
  if (predictions.size() == 0) throw DomainError(std::string(what) + ": empty input");
}

}  // namespace

Vector softmax_weights(const Vector& predictions, const Vector& targets, double K) {
  check_lengths(predictions, targets, "softmax_weights");
  if (!(K > 0.0)) throw DomainError("softmax_weights: K must be positive");
  const Eigen::ArrayXd losses = (targets - predictions).array().square();
  const Eigen::ArrayXd shifted = (K * (losses - losses.maxCoeff())).exp();
  return (shifted / shifted.sum()).matrix();
}

GradHess softmax_minimax_grad_hess(const Vector& predictions, const Vector& targets, double K) {
  const Vector w = softmax_weights(predictions, targets, K);
  GradHess gh;
  gh.grad = (-2.0 * w.array() * (targets - predictions).array()).matrix();
  gh.hess = 2.0 * w;
  return gh;
}

GradHess squared_grad_hess(const Vector& predictions, const Vector& targets) {
  check_lengths(predictions, targets, "squared_grad_hess");
  GradHess gh;
  gh.grad = 2.0 * (predictions - targets);
  gh.hess = Vector::Constant(predictions.size(), 2.0);
  return gh;
}

GradHess loss_grad_hess(const LossSpec& loss, const Vector& predictions, const Vector& targets) {
  return loss.kind == LossKind::squared ? squared_grad_hess(predictions, targets)
                                        : softmax_minimax_grad_hess(predictions, targets, loss.K);
}

double loss_value(const LossSpec& loss, const Vector& predictions, const Vector& targets) {
  check_lengths(predictions, targets, "loss_value");
  const Vector squared = (targets - predictions).array().square().matrix();
  return loss.kind == LossKind::squared ? squared.sum() : logsumexp(squared, loss.K);
}

double initial_prediction(const LossSpec& loss, const Vector& targets) {
  if (targets.size() == 0) throw DomainError("initial_prediction: empty targets");
  const double anchor = targets[0];
  if (loss.kind == LossKind::squared) return anchor + (targets.array() - anchor).mean();
  const double lo = targets.minCoeff();
  const double hi = targets.maxCoeff();
  if (lo == hi) return lo;
  // The soft-max of convex losses is convex in the constant, so Brent's
  // method on the target range finds the global minimiser.
  auto objective = [&](double c) { return logsumexp((targets.array() - c).square(), loss.K); };
  const auto [best, value] = boost::math::tools::brent_find_minima(objective, lo, hi, 52);
  (void)value;
  return best;
}

// ---------------------------------------------------------------------------

RegressionTree::RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw DomainError("RegressionTree: no nodes");
  const int n = static_cast<int>(nodes_.size());
  for (const TreeNode& node : nodes_) {
    if (node.feature < 0) continue;
    if (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n)
      throw DomainError("RegressionTree: child index out of range");
  }
}

int RegressionTree::leaf_count() const {
  return static_cast<int>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

int RegressionTree::depth() const {
  int d = 0;
  for (const TreeNode& n : nodes_) d = std::max(d, n.depth);
  return d;
}

void RegressionTree::scale_leaves(double factor) {
  for (TreeNode& n : nodes_)
    if (n.feature < 0) n.value *= factor;
}

GbmModel::GbmModel(double initial, double learning_rate, Eigen::Index num_features, LossSpec loss,
                   std::vector<RegressionTree> trees)
    : initial_(initial),
      learning_rate_(learning_rate),
      num_features_(num_features),
      loss_(loss),
      trees_(std::move(trees)) {}

std::vector<double> bin_thresholds(const Eigen::Ref<const Vector>& column, int max_bins) {
  std::vector<double> sorted(column.data(), column.data() + column.size());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  auto midpoint = [](double a, double b) {
    const double m = a + (b - a) / 2.0;
    return m < b ? m : a;
  };

  std::vector<double> cuts;
  if (distinct.size() <= static_cast<std::size_t>(max_bins)) {
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i)
      cuts.push_back(midpoint(distinct[i], distinct[i + 1]));
    return cuts;
  }
  // Equal-frequency cut points, each moved to the gap after its order
  // statistic so that tied values never straddle a bin boundary.
  const std::size_t n = sorted.size();
  for (int b = 1; b < max_bins; ++b) {
    const std::size_t idx = (static_cast<std::size_t>(b) * n) / static_cast<std::size_t>(max_bins);
    const double v = sorted[std::max<std::size_t>(idx, 1) - 1];
    const auto next = std::upper_bound(distinct.begin(), distinct.end(), v);
    if (next == distinct.end()) break;
    const double cut = midpoint(v, *next);
    if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
  }
  return cuts;
}

namespace {

struct HistBin {
  double g = 0.0;
  double h = 0.0;
  int count = 0;
};

/// Training matrix quantised once per fit.
struct BinnedMatrix {
  std::vector<std::vector<double>> thresholds;      // per feature
  std::vector<std::vector<std::uint16_t>> bins;     // per feature, per row
  std::vector<std::size_t> offsets;                 // histogram offset per feature
  std::size_t total_bins = 0;

  BinnedMatrix(const Matrix& X, int max_bins) {
    const Eigen::Index cols = X.cols();
    thresholds.resize(cols);
    bins.resize(cols);
    offsets.resize(cols);
    for (Eigen::Index f = 0; f < cols; ++f) {
      const Vector column = X.col(f);
      thresholds[f] = bin_thresholds(column, max_bins);
      const auto& cuts = thresholds[f];
      auto& column_bins = bins[f];
      column_bins.resize(X.rows());
      for (Eigen::Index i = 0; i < X.rows(); ++i)
        column_bins[i] = static_cast<std::uint16_t>(
            std::lower_bound(cuts.begin(), cuts.end(), column[i]) - cuts.begin());
      offsets[f] = total_bins;
      total_bins += cuts.size() + 1;
    }
  }

  std::size_t num_features() const { return thresholds.size(); }
};

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  int bin = -1;

  bool valid() const { return feature >= 0; }
};

double soft_threshold(double g, double lambda) {
  if (g > lambda) return g - lambda;
  if (g < -lambda) return g + lambda;
  return 0.0;
}

double leaf_score(double g, double h, double lambda) {
  const double t = soft_threshold(g, lambda);
  return t * t / (h + kHessianEpsilon);
}

struct OpenLeaf {
  int node = 0;
  std::vector<int> rows;
  std::vector<HistBin> hist;
  double g = 0.0;
  double h = 0.0;
  SplitCandidate best;
};

class TreeBuilder {
 public:
  TreeBuilder(const BinnedMatrix& data, const Vector& grad, const Vector& hess,
              const GbmParams& params)
      : data_(data), grad_(grad), hess_(hess), params_(params) {}

  RegressionTree build(std::vector<int> rows) {
    std::vector<TreeNode> nodes(1);
    nodes[0].count = static_cast<int>(rows.size());
    std::vector<OpenLeaf> leaves;
    leaves.push_back(make_leaf(0, std::move(rows), nullptr, nodes));

    while (static_cast<int>(leaves.size()) < params_.num_leaves) {
      std::size_t pick = leaves.size();
      double best_gain = 0.0;
      for (std::size_t j = 0; j < leaves.size(); ++j) {
        if (leaves[j].best.valid() && leaves[j].best.gain > best_gain) {
          best_gain = leaves[j].best.gain;
          pick = j;
        }
      }
      if (pick == leaves.size()) break;

      OpenLeaf parent = std::move(leaves[pick]);
      const SplitCandidate split = parent.best;
      const auto& column = data_.bins[split.feature];
      std::vector<int> left_rows;
      std::vector<int> right_rows;
      for (int i : parent.rows) (column[i] <= split.bin ? left_rows : right_rows).push_back(i);

      const int left = static_cast<int>(nodes.size());
      const int right = left + 1;
      TreeNode& p = nodes[parent.node];
      p.feature = split.feature;
      p.threshold = data_.thresholds[split.feature][split.bin];
      p.left = left;
      p.right = right;
      const int child_depth = p.depth + 1;
      nodes.push_back(TreeNode{-1, 0.0, -1, -1, 0.0, child_depth, static_cast<int>(left_rows.size())});
      nodes.push_back(TreeNode{-1, 0.0, -1, -1, 0.0, child_depth, static_cast<int>(right_rows.size())});

      // Build the smaller child's histogram; the sibling is the difference.
      const bool left_smaller = left_rows.size() <= right_rows.size();
      const bool sibling_needs_hist = child_depth < params_.max_depth;
      OpenLeaf small = make_leaf(left_smaller ? left : right,
                                 std::move(left_smaller ? left_rows : right_rows), nullptr, nodes,
                                 nullptr, sibling_needs_hist);
      OpenLeaf large = make_leaf(left_smaller ? right : left,
                                 std::move(left_smaller ? right_rows : left_rows), &parent, nodes,
                                 &small.hist);
      OpenLeaf& first = left_smaller ? small : large;
      OpenLeaf& second = left_smaller ? large : small;
      leaves[pick] = std::move(first);
      leaves.push_back(std::move(second));
    }

    for (const OpenLeaf& leaf : leaves)
      nodes[leaf.node].value = -soft_threshold(leaf.g, params_.l1_regularization) /
                               (leaf.h + kHessianEpsilon);
    return RegressionTree(std::move(nodes));
  }

 private:
  OpenLeaf make_leaf(int node, std::vector<int> rows, const OpenLeaf* parent,
                     const std::vector<TreeNode>& nodes,
                     const std::vector<HistBin>* sibling = nullptr, bool force_hist = false) {
    OpenLeaf leaf;
    leaf.node = node;
    leaf.rows = std::move(rows);
    for (int i : leaf.rows) {
      leaf.g += grad_[i];
      leaf.h += hess_[i];
    }
    const bool splittable = nodes[node].depth < params_.max_depth &&
                            static_cast<int>(leaf.rows.size()) >= 2 * params_.min_data_in_leaf;
    if (!splittable && !force_hist) return leaf;

    if (parent != nullptr && sibling != nullptr) {
      leaf.hist = parent->hist;
      for (std::size_t b = 0; b < leaf.hist.size(); ++b) {
        leaf.hist[b].g -= (*sibling)[b].g;
        leaf.hist[b].h -= (*sibling)[b].h;
        leaf.hist[b].count -= (*sibling)[b].count;
      }
    } else {
      leaf.hist.assign(data_.total_bins, HistBin{});
      for (std::size_t f = 0; f < data_.num_features(); ++f) {
        HistBin* base = leaf.hist.data() + data_.offsets[f];
        const auto& column = data_.bins[f];
        for (int i : leaf.rows) {
          HistBin& bin = base[column[i]];
          bin.g += grad_[i];
          bin.h += hess_[i];
          ++bin.count;
        }
      }
    }
    if (splittable) leaf.best = find_split(leaf);
    return leaf;
  }

  SplitCandidate find_split(const OpenLeaf& leaf) const {
    const double lambda = params_.l1_regularization;
    const int min_data = params_.min_data_in_leaf;
    const int count = static_cast<int>(leaf.rows.size());
    const double parent_score = leaf_score(leaf.g, leaf.h, lambda);
    SplitCandidate best;
    for (std::size_t f = 0; f < data_.num_features(); ++f) {
      const HistBin* base = leaf.hist.data() + data_.offsets[f];
      const int cuts = static_cast<int>(data_.thresholds[f].size());
      double gl = 0.0;
      double hl = 0.0;
      int cl = 0;
      for (int b = 0; b < cuts; ++b) {
        gl += base[b].g;
        hl += base[b].h;
        cl += base[b].count;
        if (cl < min_data) continue;
        if (count - cl < min_data) break;
        const double gain = leaf_score(gl, hl, lambda) +
                            leaf_score(leaf.g - gl, leaf.h - hl, lambda) - parent_score;
        if (gain > best.gain) best = SplitCandidate{gain, static_cast<int>(f), b};
      }
    }
    return best;
  }

  const BinnedMatrix& data_;
  const Vector& grad_;
  const Vector& hess_;
  const GbmParams& params_;
};

std::vector<int> bagged_rows(Eigen::Index rows, double fraction, std::uint64_t seed, int iteration) {
  std::vector<int> all(static_cast<std::size_t>(rows));
  std::iota(all.begin(), all.end(), 0);
  if (fraction >= 1.0) return all;
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows))));
  RandomStream rng(derive_substream_seed(seed, purpose::kBagging, static_cast<std::uint64_t>(iteration)));
  // Partial Fisher-Yates, then restore index order for stable summation.
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t remaining = all.size() - i;
    const auto j = i + std::min(remaining - 1,
                                static_cast<std::size_t>(rng.uniform() * static_cast<double>(remaining)));
    std::swap(all[i], all[j]);
  }
  all.resize(keep);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

GbmModel fit_gbm(const Matrix& X, const Vector& y, const GbmParams& params, const LossSpec& loss,
                 std::uint64_t seed, FitDiagnostics* diagnostics) {
  params.validate();
  loss.validate();
  const Eigen::Index H = X.rows();
  if (y.size() != H) throw DomainError("fit_gbm: X and y differ in row count");
  if (H < params.min_data_in_leaf) throw DomainError("fit_gbm: fewer rows than min_data_in_leaf");
  if (!X.allFinite() || !y.allFinite()) throw DomainError("fit_gbm: non-finite training data");

  const BinnedMatrix data(X, params.histogram_bins);
  GbmModel model(initial_prediction(loss, y), params.learning_rate, X.cols(), loss);
  Vector F = Vector::Constant(H, model.initial());
  double current = loss_value(loss, F, y);
  std::vector<double> history{current};
  int halvings = 0;
  std::vector<int> leaf_of(static_cast<std::size_t>(H));

  for (int iter = 0; iter < params.iterations; ++iter) {
    const GradHess gh = loss_grad_hess(loss, F, y);
    TreeBuilder builder(data, gh.grad, gh.hess, params);
    RegressionTree tree = builder.build(bagged_rows(H, params.bagging_fraction, seed, iter));

    for (Eigen::Index i = 0; i < H; ++i) leaf_of[i] = tree.leaf_index(X.row(i));
    const auto& nodes = tree.nodes();
    auto step = [&](double scale) {
      Vector next(H);
      for (Eigen::Index i = 0; i < H; ++i)
        next[i] = F[i] + params.learning_rate * (nodes[leaf_of[i]].value * scale);
      return next;
    };

    Vector next = step(1.0);
    double next_loss = loss_value(loss, next, y);
    if (loss.kind == LossKind::softmax_minimax) {
      // The Gauss-Newton Hessian ignores the curvature of the soft-max
      // weights, so a full step can overshoot. Halve until the objective
      // does not increase.
      double scale = 1.0;
      int tries = 0;
      while (!(next_loss <= current) && tries < 40) {
        scale *= 0.5;
        ++tries;
        next = step(scale);
        next_loss = loss_value(loss, next, y);
      }
      if (!(next_loss <= current)) {
        scale = 0.0;
        next = F;
        next_loss = current;
      }
      halvings += tries;
      if (scale != 1.0) {
        tree.scale_leaves(scale);
        next = step(1.0);
        next_loss = loss_value(loss, next, y);
      }
    }
    if (!std::isfinite(next_loss))
      throw RuntimeError("fit_gbm: non-finite loss at iteration " + std::to_string(iter));

    F = std::move(next);
    current = next_loss;
    history.push_back(current);
    model.add_tree(std::move(tree));
  }

  if (diagnostics != nullptr) {
    diagnostics->loss_history = std::move(history);
    diagnostics->train_predictions = std::move(F);
    diagnostics->line_search_halvings = halvings;
  }
  return model;
}

Vector predict_gbm(const GbmModel& model, const Matrix& X) {
  if (X.cols() != model.num_features())
    throw DomainError("predict_gbm: model expects " + std::to_string(model.num_features()) +
                      " features, got " + std::to_string(X.cols()));
  Vector out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = model.predict_row(X.row(i));
  return out;
}

}  // namespace tsgbm
