#include "tsgbm/compression.hpp"

#include <cmath>

namespace tsgbm {

std::string to_string(CompressorKind kind) {
  switch (kind) {
    case CompressorKind::quantiles: return "quantiles";
    case CompressorKind::quantile_plot: return "quantile_plot";
    case CompressorKind::ar_coeffs: return "ar_coeffs";
  }
  return "unknown";
}

CompressorKind compressor_kind_from_string(const std::string& name) {
  if (name == "quantiles") return CompressorKind::quantiles;
  if (name == "quantile_plot") return CompressorKind::quantile_plot;
  if (name == "ar_coeffs") return CompressorKind::ar_coeffs;
  throw ConfigError("unknown compressor kind '" + name + "'");
}

void CompressorSpec::validate() const {
  if (n < 1) throw ConfigError("compressor.n must be >= 1");
  if (kind == CompressorKind::quantile_plot && n < 2)
    throw ConfigError("compressor.n must be >= 2 for quantile_plot");
  if (include_intercept && kind != CompressorKind::ar_coeffs)
    throw ConfigError("compressor.include_intercept applies to ar_coeffs only");
}

DegenerateFitError::DegenerateFitError(Eigen::Index rank, Eigen::Index columns)
    : RuntimeError("ar_fit: regressor matrix is rank deficient (rank " + std::to_string(rank) +
                   " of " + std::to_string(columns) + ")"),
      rank_(rank),
      columns_(columns) {}

Vector quantiles(const ObservationSequence& y, Eigen::Index n) {
  const Eigen::Index N = y.size();
  if (N == 0) throw DomainError("quantiles: empty sequence");
  if (n < 1 || n > N) throw DomainError("quantiles: need 1 <= n <= N");
  std::vector<double> sorted(y.samples().data(), y.samples().data() + N);
  std::sort(sorted.begin(), sorted.end());
  Vector q(n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    const double p = static_cast<double>(k) / static_cast<double>(n + 1);
    const double pos = p * static_cast<double>(N - 1);
    const auto lower = static_cast<std::size_t>(std::floor(pos));
    const std::size_t upper = std::min<std::size_t>(lower + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lower);
    q[k - 1] = sorted[lower] + frac * (sorted[upper] - sorted[lower]);
  }
  return q;
}

Vector ar_fit(const ObservationSequence& y, Eigen::Index n, bool include_intercept) {
  const Eigen::Index N = y.size();
  if (n < 1) throw DomainError("ar_fit: lag order must be >= 1");
  if (N <= 10 * n) throw DomainError("ar_fit: need N > 10*n samples");
  const Eigen::Index rows = N - n;
  const Eigen::Index offset = include_intercept ? 1 : 0;
  const Eigen::Index cols = n + offset;
  const Vector& s = y.samples();

  Eigen::MatrixXd X(rows, cols);
  if (include_intercept) X.col(0).setOnes();
  for (Eigen::Index lag = 1; lag <= n; ++lag) X.col(offset + lag - 1) = s.segment(n - lag, rows);
  const Vector target = s.tail(rows);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < cols) throw DegenerateFitError(qr.rank(), cols);
  return qr.solve(target);
}

ObservationSequence log_square_transform(const ObservationSequence& y) {
  const Vector& s = y.samples();
  if ((s.array() == 0.0).any()) throw DomainError("log_square_transform: zero entry");
  return ObservationSequence(s.array().square().log().matrix(), y.mechanism_id());
}

Eigen::Vector2d weibull_plot_fit(const Eigen::Ref<const Vector>& q) {
  const Eigen::Index n = q.size();
  if (n < 2) throw DomainError("weibull_plot_fit: need at least two quantiles");
  if (!(q.array() > 0.0).all()) throw DomainError("weibull_plot_fit: quantiles must be positive");
  Vector c(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double p = static_cast<double>(k + 1) / static_cast<double>(n + 1);
    c[k] = std::log(-std::log1p(-p));
  }
  const Vector lq = q.array().log().matrix();
  const double cm = c.mean();
  const double lm = lq.mean();
  const double slope = ((c.array() - cm) * (lq.array() - lm)).sum() / (c.array() - cm).square().sum();
  if (!(slope > 0.0)) throw DomainError("weibull_plot_fit: non-positive slope");
  return {1.0 / slope, std::exp(lm - slope * cm)};
}

Vector compress(const CompressorSpec& spec, const ObservationSequence& y) {
  switch (spec.kind) {
    case CompressorKind::quantiles: return quantiles(y, spec.n);
    case CompressorKind::quantile_plot: {
      Vector out(spec.n + 2);
      out.head(spec.n) = quantiles(y, spec.n);
      out.tail(2) = weibull_plot_fit(out.head(spec.n));
      return out;
    }
    case CompressorKind::ar_coeffs: return ar_fit(y, spec.n, spec.include_intercept);
  }
  throw DomainError("compress: unknown compressor");
}

}  // namespace tsgbm
