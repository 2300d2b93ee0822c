#include "doctest.h"

#include "support/naive_gbm.hpp"
#include "tsgbm/gbm.hpp"
#include "tsgbm/serialization.hpp"

#include <cmath>
#include <random>

using namespace tsgbm;

namespace {

/// Soft-max of squared errors in long double, written out independently.
long double softmax_objective(const Vector& pred, const Vector& target, double K) {
  long double top = -1e300L;
  std::vector<long double> losses;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const long double r = static_cast<long double>(target[i]) - pred[i];
    losses.push_back(r * r);
    top = std::max(top, r * r);
  }
  long double sum = 0.0L;
  for (long double l : losses) sum += std::exp(K * (l - top));
  return top + std::log(sum) / K;
}

Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix X(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) X(i, j) = u(rng);
  return X;
}

double r_squared(const Vector& y, const Vector& pred) {
  const double mean = y.mean();
  return 1.0 - (y - pred).squaredNorm() / (y.array() - mean).square().sum();
}

/// Partial sums F0 + lr * sum_{t < upto} tree_t(x).
Vector staged_predictions(const GbmModel& model, const Matrix& X, std::size_t upto) {
  Vector out = Vector::Constant(X.rows(), model.initial());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (std::size_t t = 0; t < upto; ++t) out[i] += model.learning_rate() * model.trees()[t].predict(X.row(i));
  return out;
}

}  // namespace

TEST_SUITE("gbm") {
  TEST_CASE("logsumexp of equal values") {
    Eigen::Vector2d v(1.0, 1.0);
    CHECK(logsumexp(v, 1e3) == doctest::Approx(1.0 + std::log(2.0) / 1e3).epsilon(1e-15));
    CHECK(logsumexp(v, 1e3) == doctest::Approx(1.000693).epsilon(1e-6));
    const Vector c = Vector::Constant(17, -3.5);
    CHECK(logsumexp(c, 1e3) == doctest::Approx(-3.5 + std::log(17.0) / 1e3).epsilon(1e-15));
  }

  TEST_CASE("logsumexp is dominated by the max") {
    Eigen::Vector2d v(0.0, 10.0);
    CHECK(logsumexp(v, 1e3) == 10.0);
  }

  TEST_CASE("logsumexp does not overflow for K*max up to 1e8") {
    Eigen::Vector3d v(1e5, 1e5 - 1.0, 0.0);
    const double s = logsumexp(v, 1e3);
    CHECK(std::isfinite(s));
    CHECK(s == doctest::Approx(1e5).epsilon(1e-15));
  }

  TEST_CASE("soft-max sandwich bound on 10^3 random loss vectors") {
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 1000; ++rep) {
      const Eigen::Index M = 1 + rep % 50;
      const Vector v = random_vector(rng, M, 0.0, 100.0);
      const double K = rep % 2 ? 1e3 : 1.0;
      const double s = logsumexp(v, K);
      REQUIRE(s >= v.maxCoeff());
      REQUIRE(s <= v.maxCoeff() + std::log(static_cast<double>(M)) / K + 1e-12);
    }
  }

  TEST_CASE("logsumexp input errors") {
    CHECK_THROWS_AS(logsumexp(Vector(0), 1.0), DomainError);
    CHECK_THROWS_AS(logsumexp(Vector::Ones(2), 0.0), DomainError);
  }

  TEST_CASE("soft-max weights form a distribution") {
    std::mt19937_64 rng(2);
    for (double K : {1.0, 1e3, 1e4}) {
      const Vector w = softmax_weights(random_vector(rng, 500, -1, 1), random_vector(rng, 500, -1, 1), K);
      CHECK(std::abs(w.sum() - 1.0) < 1e-12);
      CHECK(w.minCoeff() >= 0.0);
      CHECK(w.maxCoeff() <= 1.0);
    }
  }

  TEST_CASE("equal residuals give uniform weights") {
    const Eigen::Index M = 8;
    const double r = 0.3;
    const Vector pred = Vector::LinSpaced(M, 0.0, 7.0);
    const Vector target = (pred.array() + r).matrix();
    const GradHess gh = softmax_minimax_grad_hess(pred, target, 1e3);
    for (Eigen::Index i = 0; i < M; ++i) {
      CHECK(gh.grad[i] == doctest::Approx(-2.0 * r / M).epsilon(1e-12));
      CHECK(gh.hess[i] == doctest::Approx(2.0 / M).epsilon(1e-12));
    }
  }

  TEST_CASE("soft-max gradient matches central finite differences") {
    std::mt19937_64 rng(3);
    const double h = 1e-6;
    for (double K : {1.0, 1e3, 1e4}) {
      double worst = 0.0;
      for (int point = 0; point < 100; ++point) {
        const Eigen::Index M = 10;
        const Vector target = random_vector(rng, M, -1.0, 1.0);
        // Residuals of order 0.1 keep K*L within the range used in training.
        const Vector pred = (target + random_vector(rng, M, -0.1, 0.1)).eval();
        const GradHess gh = softmax_minimax_grad_hess(pred, target, K);
        Vector fd(M);
        for (Eigen::Index i = 0; i < M; ++i) {
          Vector up = pred, down = pred;
          up[i] += h;
          down[i] -= h;
          fd[i] = static_cast<double>((softmax_objective(up, target, K) - softmax_objective(down, target, K)) /
                                      (2.0L * h));
        }
        worst = std::max(worst, (fd - gh.grad).cwiseAbs().maxCoeff() / gh.grad.cwiseAbs().maxCoeff());
      }
      CAPTURE(K);
      CHECK(worst < 1e-4);
    }
  }

  TEST_CASE("small K recovers the mean-squared-error gradient") {
    std::mt19937_64 rng(4);
    const Eigen::Index M = 25;
    const Vector target = random_vector(rng, M, -1.0, 1.0);
    const Vector pred = random_vector(rng, M, -1.0, 1.0);
    const GradHess gh = softmax_minimax_grad_hess(pred, target, 1e-6);
    const Vector mse_grad = (-2.0 * (target - pred) / static_cast<double>(M)).eval();
    CHECK((gh.grad - mse_grad).cwiseAbs().maxCoeff() < 1e-5 * mse_grad.cwiseAbs().maxCoeff());
  }

  TEST_CASE("mismatched lengths are a domain error") {
    CHECK_THROWS_AS(softmax_minimax_grad_hess(Vector::Zero(3), Vector::Zero(4), 1e3), DomainError);
    CHECK_THROWS_AS(squared_grad_hess(Vector::Zero(3), Vector::Zero(2)), DomainError);
  }

  TEST_CASE("initial prediction") {
    Vector y(4);
    y << 1.0, 2.0, 3.0, 10.0;
    CHECK(initial_prediction(LossSpec{LossKind::squared, 1.0}, y) == doctest::Approx(4.0));
    // With large K the soft-max minimiser approaches the minimax centre.
    CHECK(initial_prediction(LossSpec{LossKind::softmax_minimax, 1e3}, y) ==
          doctest::Approx(5.5).epsilon(1e-3));
    CHECK(initial_prediction(LossSpec{LossKind::softmax_minimax, 1e3}, Vector::Constant(5, 2.5)) == 2.5);
  }

  TEST_CASE("constant targets give a constant model") {
    std::mt19937_64 rng(5);
    const Matrix X = random_matrix(rng, 200, 3);
    const Vector y = Vector::Constant(200, 0.7);
    GbmParams params;
    params.iterations = 20;
    params.min_data_in_leaf = 5;
    for (LossKind kind : {LossKind::squared, LossKind::softmax_minimax}) {
      const GbmModel model = fit_gbm(X, y, params, LossSpec{kind, 1e3}, 1);
      CHECK((predict_gbm(model, X).array() == 0.7).all());
      for (const RegressionTree& t : model.trees())
        for (const TreeNode& n : t.nodes())
          if (n.feature < 0) CHECK(n.value == 0.0);
    }
  }

  TEST_CASE("all-constant features degenerate to F0") {
    std::mt19937_64 rng(6);
    const Matrix X = Matrix::Constant(100, 2, 1.5);
    const Vector y = random_vector(rng, 100, 0, 1);
    GbmParams params;
    params.iterations = 5;
    params.min_data_in_leaf = 5;
    const GbmModel model = fit_gbm(X, y, params, LossSpec{LossKind::squared, 1.0}, 1);
    for (const RegressionTree& t : model.trees()) CHECK(t.leaf_count() == 1);
  }

  TEST_CASE("smooth target reaches training R^2 > 0.99") {
    std::mt19937_64 rng(7);
    const Eigen::Index n = 10'000;
    Matrix X = random_matrix(rng, n, 2);
    X *= 4.0;
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = std::sin(X(i, 0)) + 0.5 * X(i, 1);
    GbmParams params;
    params.iterations = 500;
    params.learning_rate = 0.1;
    params.max_depth = 5;
    params.num_leaves = 31;
    params.min_data_in_leaf = 20;
    const GbmModel model = fit_gbm(X, y, params, LossSpec{LossKind::squared, 1.0}, 1);
    CHECK(r_squared(y, predict_gbm(model, X)) > 0.99);
  }

  TEST_CASE("single stump recovers cluster means") {
    Matrix X(8, 2);
    Vector y(8);
    // Cluster A: x1 < 0.5, cluster B: x1 > 0.5; x2 is noise.
    const double xa[] = {0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9};
    const double x2[] = {0.5, 0.1, 0.9, 0.3, 0.2, 0.8, 0.4, 0.6};
    const double ys[] = {1.0, 1.5, 0.5, 1.2, 5.0, 4.5, 5.5, 5.2};
    for (int i = 0; i < 8; ++i) {
      X(i, 0) = xa[i];
      X(i, 1) = x2[i];
      y[i] = ys[i];
    }
    const double mean_a = (1.0 + 1.5 + 0.5 + 1.2) / 4.0;
    const double mean_b = (5.0 + 4.5 + 5.5 + 5.2) / 4.0;
    GbmParams params;
    params.iterations = 1;
    params.learning_rate = 1.0;
    params.max_depth = 1;
    params.num_leaves = 2;
    params.min_data_in_leaf = 1;
    const GbmModel model = fit_gbm(X, y, params, LossSpec{LossKind::squared, 1.0}, 1);
    REQUIRE(model.trees().size() == 1);
    const RegressionTree& tree = model.trees()[0];
    CHECK(tree.leaf_count() == 2);
    CHECK(tree.nodes()[0].feature == 0);
    const Vector pred = predict_gbm(model, X);
    for (int i = 0; i < 4; ++i) CHECK(pred[i] == doctest::Approx(mean_a).epsilon(1e-12));
    for (int i = 4; i < 8; ++i) CHECK(pred[i] == doctest::Approx(mean_b).epsilon(1e-12));
  }

  TEST_CASE("prediction bookkeeping") {
    std::mt19937_64 rng(8);
    const Matrix X = random_matrix(rng, 500, 4);
    const Vector y = (X.col(0).array() * 3.0 + X.col(1).array().square()).matrix();
    GbmParams params;
    params.iterations = 30;
    params.min_data_in_leaf = 10;
    params.bagging_fraction = 0.8;

    SUBCASE("empty tree list predicts F0") {
      const GbmModel empty(1.25, 0.1, 4, LossSpec{});
      CHECK((predict_gbm(empty, X).array() == 1.25).all());
    }
    SUBCASE("training predictions equal the tracked predictions") {
      for (LossKind kind : {LossKind::squared, LossKind::softmax_minimax}) {
        FitDiagnostics diag;
        const GbmModel model = fit_gbm(X, y, params, LossSpec{kind, 1e3}, 3, &diag);
        CHECK(predict_gbm(model, X) == diag.train_predictions);
      }
    }
    SUBCASE("serialisation round trip preserves predictions") {
      const GbmModel model = fit_gbm(X, y, params, LossSpec{LossKind::softmax_minimax, 1e3}, 3);
      const GbmModel back = gbm_model_from_json(nlohmann::json::parse(to_json(model).dump()));
      const Matrix fresh = random_matrix(rng, 1000, 4);
      CHECK(predict_gbm(back, fresh) == predict_gbm(model, fresh));
      CHECK(back.loss().K == 1e3);
    }
    SUBCASE("feature-count mismatch") {
      const GbmModel model = fit_gbm(X, y, params, LossSpec{LossKind::squared, 1.0}, 3);
      CHECK_THROWS_AS(predict_gbm(model, Matrix::Zero(3, 5)), DomainError);
    }
    SUBCASE("bagging is seeded") {
      const GbmModel a = fit_gbm(X, y, params, LossSpec{LossKind::squared, 1.0}, 3);
      const GbmModel b = fit_gbm(X, y, params, LossSpec{LossKind::squared, 1.0}, 3);
      const GbmModel c = fit_gbm(X, y, params, LossSpec{LossKind::squared, 1.0}, 4);
      CHECK(predict_gbm(a, X) == predict_gbm(b, X));
      CHECK(predict_gbm(a, X) != predict_gbm(c, X));
    }
  }

  TEST_CASE("training loss is non-increasing with full bagging") {
    std::mt19937_64 rng(9);
    const Matrix X = random_matrix(rng, 2000, 3);
    Vector y(2000);
    for (Eigen::Index i = 0; i < 2000; ++i) y[i] = 1.0 + 19.0 * X(i, 0) + std::sin(6.0 * X(i, 1));
    GbmParams params;
    params.iterations = 200;
    params.learning_rate = 0.1;
    params.max_depth = 5;
    params.num_leaves = 16;
    params.min_data_in_leaf = 20;
    params.l1_regularization = 1e-4;
    for (LossKind kind : {LossKind::squared, LossKind::softmax_minimax}) {
      FitDiagnostics diag;
      fit_gbm(X, y, params, LossSpec{kind, 1e3}, 1, &diag);
      const auto& h = diag.loss_history;
      REQUIRE(h.size() == 201);
      for (std::size_t i = 1; i < h.size(); ++i)
        REQUIRE(h[i] <= h[i - 1] + 1e-12 * std::max(1.0, std::abs(h[i - 1])));
      CHECK(h.back() < h.front());
    }
  }

  TEST_CASE("soft-max sandwich holds at every training iteration") {
    std::mt19937_64 rng(10);
    const Matrix X = random_matrix(rng, 300, 2);
    const Vector y = (X.col(0) * 5.0 + X.col(1)).eval();
    GbmParams params;
    params.iterations = 40;
    params.min_data_in_leaf = 10;
    const double K = 1e3;
    const GbmModel model = fit_gbm(X, y, params, LossSpec{LossKind::softmax_minimax, K}, 1);
    for (std::size_t p = 0; p <= model.trees().size(); p += 5) {
      const Vector pred = staged_predictions(model, X, p);
      const Vector losses = (y - pred).array().square().matrix();
      const double s = logsumexp(losses, K);
      REQUIRE(s >= losses.maxCoeff());
      REQUIRE(s <= losses.maxCoeff() + std::log(300.0) / K + 1e-12);
    }
  }

  TEST_CASE("tree structure invariants") {
    std::mt19937_64 rng(11);
    const Matrix X = random_matrix(rng, 3000, 4);
    Vector y(3000);
    for (Eigen::Index i = 0; i < 3000; ++i) y[i] = X(i, 0) * X(i, 1) + std::cos(5 * X(i, 2));
    GbmParams params;
    params.iterations = 10;
    params.max_depth = 4;
    params.num_leaves = 8;
    params.min_data_in_leaf = 30;
    const GbmModel model = fit_gbm(X, y, params, LossSpec{LossKind::squared, 1.0}, 1);
    const Matrix probe = (random_matrix(rng, 10'000, 4).array() * 1.4 - 0.2).matrix();

    for (const RegressionTree& tree : model.trees()) {
      CHECK(tree.depth() <= params.max_depth);
      CHECK(tree.leaf_count() <= params.num_leaves);
      const auto& nodes = tree.nodes();
      // Recover each leaf's box from its root path, then count boxes per point.
      struct Box { Eigen::ArrayXd lo, hi; };
      std::vector<Box> boxes;
      std::vector<std::pair<int, Box>> stack{{0, Box{Eigen::ArrayXd::Constant(4, -1e300), Eigen::ArrayXd::Constant(4, 1e300)}}};
      while (!stack.empty()) {
        auto [id, box] = stack.back();
        stack.pop_back();
        const TreeNode& n = nodes[id];
        if (n.feature < 0) {
          CHECK(n.count >= params.min_data_in_leaf);
          boxes.push_back(box);
          continue;
        }
        Box left = box, right = box;
        left.hi[n.feature] = std::min(left.hi[n.feature], n.threshold);
        right.lo[n.feature] = std::max(right.lo[n.feature], n.threshold);
        stack.push_back({n.left, left});
        stack.push_back({n.right, right});
      }
      for (Eigen::Index i = 0; i < probe.rows(); ++i) {
        int hits = 0;
        for (const Box& b : boxes)
          if ((probe.row(i).transpose().array() > b.lo).all() && (probe.row(i).transpose().array() <= b.hi).all()) ++hits;
        REQUIRE(hits == 1);
      }
    }
  }

  TEST_CASE("histogram boosting matches the naive exhaustive reference") {
    std::mt19937_64 rng(12);
    const Eigen::Index n = 200;
    const Matrix X = random_matrix(rng, n, 3);
    Vector y(n);
    std::normal_distribution<double> noise(0.0, 0.1);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = 2.0 * X(i, 0) - X(i, 1) * X(i, 2) + noise(rng);

    naive::Params ref;
    ref.learning_rate = 0.1;
    ref.iterations = 25;
    ref.max_depth = 3;
    ref.num_leaves = 6;
    ref.min_data_in_leaf = 7;
    ref.lambda = 1e-3;
    naive::Rows rows(n, std::vector<double>(3));
    std::vector<double> targets(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int j = 0; j < 3; ++j) rows[i][j] = X(i, j);
      targets[i] = y[i];
    }
    const naive::Model oracle = naive::fit(rows, targets, ref);

    GbmParams params;
    params.learning_rate = ref.learning_rate;
    params.iterations = ref.iterations;
    params.max_depth = ref.max_depth;
    params.num_leaves = ref.num_leaves;
    params.min_data_in_leaf = ref.min_data_in_leaf;
    params.l1_regularization = ref.lambda;
    params.bagging_fraction = 1.0;
    const GbmModel model = fit_gbm(X, y, params, LossSpec{LossKind::squared, 1.0}, 1);
    const Vector pred = predict_gbm(model, X);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) worst = std::max(worst, std::abs(pred[i] - oracle.predict(rows[i])));
    CHECK(worst < 1e-8);
  }

  TEST_CASE("large l1 regularisation freezes the model at F0") {
    std::mt19937_64 rng(13);
    const Matrix X = random_matrix(rng, 200, 2);
    const Vector y = X.col(0);
    GbmParams params;
    params.iterations = 5;
    params.min_data_in_leaf = 5;
    params.l1_regularization = 1e6;
    const GbmModel model = fit_gbm(X, y, params, LossSpec{LossKind::squared, 1.0}, 1);
    CHECK((predict_gbm(model, X).array() == model.initial()).all());
  }

  TEST_CASE("bin thresholds") {
    Vector few(6);
    few << 3.0, 1.0, 2.0, 2.0, 1.0, 3.0;
    const auto cuts = bin_thresholds(few, 255);
    REQUIRE(cuts.size() == 2);
    CHECK(cuts[0] == 1.5);
    CHECK(cuts[1] == 2.5);

    std::mt19937_64 rng(14);
    const Vector many = random_vector(rng, 10'000, 0.0, 1.0);
    const auto q = bin_thresholds(many, 16);
    CHECK(q.size() <= 15);
    CHECK(q.size() >= 14);
    for (std::size_t i = 1; i < q.size(); ++i) CHECK(q[i] > q[i - 1]);
  }

  TEST_CASE("fit_gbm input validation") {
    GbmParams params;
    params.min_data_in_leaf = 5;
    CHECK_THROWS_AS(fit_gbm(Matrix::Zero(3, 2), Vector::Zero(3), params, LossSpec{}, 1), DomainError);
    Matrix X = Matrix::Zero(10, 2);
    X(3, 1) = std::nan("");
    CHECK_THROWS_AS(fit_gbm(X, Vector::Zero(10), params, LossSpec{}, 1), DomainError);
    params.learning_rate = 0.0;
    CHECK_THROWS_AS(params.validate(), ConfigError);
  }
}
