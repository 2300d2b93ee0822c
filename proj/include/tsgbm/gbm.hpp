#pragma once

#include "tsgbm/core.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace tsgbm {

/// Guard added to every Hessian sum in leaf values and split scores.
inline constexpr double kHessianEpsilon = 1e-12;

struct GbmParams {
  double learning_rate = 0.1;
  int iterations = 100;
  int max_depth = 5;
  int num_leaves = 31;
  double bagging_fraction = 1.0;
  int min_data_in_leaf = 20;
  double l1_regularization = 0.0;
  int histogram_bins = 255;

  void validate() const;
};

enum class LossKind { squared, softmax_minimax };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

struct LossSpec {
  LossKind kind = LossKind::softmax_minimax;
  double K = 1e3;  // soft-max sharpness, softmax_minimax only

  void validate() const;
};

// ---------------------------------------------------------------------------
// Losses

/// ln(sum_i exp(K*v_i)) / K, shifted by max(v) so that K*max(v) up to 1e8
/// cannot overflow.
template <typename Derived>
double logsumexp(const Eigen::DenseBase<Derived>& v, double K) {
  if (v.size() == 0) throw DomainError("logsumexp: empty input");
  if (!(K > 0.0)) throw DomainError("logsumexp: K must be positive");
  const double top = v.maxCoeff();
  const double tail = (K * (v.derived().array() - top)).exp().sum();
  return top + std::log(tail) / K;
}

/// Per-row gradient and (diagonal) Hessian of a training loss with respect
/// to the predictions.
struct GradHess {
  Vector grad;
  Vector hess;
};

/// Soft-max weights w_i = exp(K*L_i - K*S) for L_i = (theta_i - delta_i)^2.
Vector softmax_weights(const Vector& predictions, const Vector& targets, double K);

/// Gradient of S = logsumexp(L, K) and its Gauss-Newton diagonal 2*w_i.
GradHess softmax_minimax_grad_hess(const Vector& predictions, const Vector& targets, double K);

/// Gradient and Hessian of sum_i (theta_i - delta_i)^2.
GradHess squared_grad_hess(const Vector& predictions, const Vector& targets);

GradHess loss_grad_hess(const LossSpec& loss, const Vector& predictions, const Vector& targets);

/// Training objective: soft-max of squared errors, or their sum.
double loss_value(const LossSpec& loss, const Vector& predictions, const Vector& targets);

/// Constant prediction minimising the loss: the mean for squared error, a
/// Brent line search of the soft-max objective otherwise.
double initial_prediction(const LossSpec& loss, const Vector& targets);

// ---------------------------------------------------------------------------
// Trees

/// Flat binary tree. Internal nodes route x[feature] <= threshold to `left`.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf value before shrinkage
  int depth = 0;
  int count = 0;  // training rows that reached this node
};

class RegressionTree {
 public:
  RegressionTree() : nodes_{TreeNode{}} {}
  explicit RegressionTree(std::vector<TreeNode> nodes);

  template <typename Row>
  int leaf_index(const Row& x) const {
    int node = 0;
    while (nodes_[node].feature >= 0) {
      const TreeNode& n = nodes_[node];
      node = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return node;
  }

  template <typename Row>
  double predict(const Row& x) const {
    return nodes_[leaf_index(x)].value;
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int leaf_count() const;
  int depth() const;
  void scale_leaves(double factor);

 private:
  std::vector<TreeNode> nodes_;
};

/// Additive ensemble: F0 + learning_rate * sum of tree leaf values.
class GbmModel {
 public:
  GbmModel() = default;
  GbmModel(double initial, double learning_rate, Eigen::Index num_features, LossSpec loss,
           std::vector<RegressionTree> trees = {});

  double initial() const { return initial_; }
  double learning_rate() const { return learning_rate_; }
  Eigen::Index num_features() const { return num_features_; }
  const LossSpec& loss() const { return loss_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }

  void add_tree(RegressionTree tree) { trees_.push_back(std::move(tree)); }

  template <typename Row>
  double predict_row(const Row& x) const {
    double f = initial_;
    for (const RegressionTree& t : trees_) f += learning_rate_ * t.predict(x);
    return f;
  }

 private:
  double initial_ = 0.0;
  double learning_rate_ = 1.0;
  Eigen::Index num_features_ = 0;
  LossSpec loss_;
  std::vector<RegressionTree> trees_;
};

/// Optional training trace.
struct FitDiagnostics {
  std::vector<double> loss_history;  // loss after F0, then after each tree
  Vector train_predictions;
  int line_search_halvings = 0;
};

/// Stage-wise boosting with histogram split search and best-first growth.
GbmModel fit_gbm(const Matrix& X, const Vector& y, const GbmParams& params, const LossSpec& loss,
                 std::uint64_t seed, FitDiagnostics* diagnostics = nullptr);

Vector predict_gbm(const GbmModel& model, const Matrix& X);

// ---------------------------------------------------------------------------
// Exposed for tests: histogram binning of one feature column.

/// Ascending split thresholds for one feature: at most max_bins - 1 cut
/// points, each a midpoint between adjacent distinct values.
std::vector<double> bin_thresholds(const Eigen::Ref<const Vector>& column, int max_bins);

}  // namespace tsgbm
