#pragma once

#include "tsgbm/core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <string>
#include <vector>

namespace tsgbm {

enum class CompressorKind { quantiles, quantile_plot, ar_coeffs };

std::string to_string(CompressorKind kind);
CompressorKind compressor_kind_from_string(const std::string& name);

struct CompressorSpec {
  CompressorKind kind = CompressorKind::quantiles;
  Eigen::Index n = 5;
  bool include_intercept = false;  // ar_coeffs only

  /// Length of alpha = h(y).
  Eigen::Index output_dims() const {
    if (kind == CompressorKind::quantile_plot) return n + 2;
    return kind == CompressorKind::ar_coeffs && include_intercept ? n + 1 : n;
  }
  void validate() const;
};

/// Least-squares design matrix lost rank; carries the detected rank.
class DegenerateFitError : public RuntimeError {
 public:
  DegenerateFitError(Eigen::Index rank, Eigen::Index columns);
  Eigen::Index rank() const { return rank_; }
  Eigen::Index columns() const { return columns_; }

 private:
  Eigen::Index rank_;
  Eigen::Index columns_;
};

/// Empirical quantiles at p_k = k/(n+1), k = 1..n. Order statistics are
/// interpolated linearly at position (N-1)*p (0-based).
Vector quantiles(const ObservationSequence& y, Eigen::Index n);

/// Weibull probability-plot fit through the quantiles q_k at p_k = k/(n+1):
/// OLS of ln q_k on ln(-ln(1-p_k)). Returns (shape, scale) = (1/slope,
/// exp(intercept)). Needs n >= 2 and positive quantiles.
Eigen::Vector2d weibull_plot_fit(const Eigen::Ref<const Vector>& q);

/// OLS fit of y(k) on (1?, y(k-1), ..., y(k-n)). Intercept comes first when
/// included. Uses a column-pivoting QR so rank deficiency is detected.
Vector ar_fit(const ObservationSequence& y, Eigen::Index n, bool include_intercept);

/// ln(y(k)^2) elementwise.
ObservationSequence log_square_transform(const ObservationSequence& y);

/// h(y) for the configured compressor. quantile_plot yields the n quantiles
/// followed by weibull_plot_fit of them.
Vector compress(const CompressorSpec& spec, const ObservationSequence& y);

/// Output length of monomial_features for n inputs and the given degree.
constexpr Eigen::Index monomial_feature_count(Eigen::Index n, int degree) {
  return degree <= 1 ? n : n + n + n * (n - 1) / 2;
}

/// Monomial expansion phi(alpha) without the constant term.
///
/// degree 1 returns alpha unchanged. degree 2 returns, in this order:
///   alpha_1..alpha_n, alpha_1^2..alpha_n^2, alpha_i*alpha_j for i < j
/// with the cross terms in row-major (i, then j) order.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> monomial_features(
    const Eigen::MatrixBase<Derived>& alpha, int degree = 2) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = alpha.size();
  if (n < 1) throw DomainError("monomial_features: empty input");
  if (degree < 1 || degree > 2) throw DomainError("monomial_features: degree must be 1 or 2");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> phi(monomial_feature_count(n, degree));
  phi.head(n) = alpha;
  if (degree == 1) return phi;
  phi.segment(n, n) = alpha.array().square().matrix();
  Eigen::Index pos = 2 * n;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) phi[pos++] = alpha[i] * alpha[j];
  return phi;
}

}  // namespace tsgbm
