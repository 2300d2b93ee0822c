#include "tsgbm/pipeline.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace tsgbm {

Simulator make_simulator(const MechanismSpec& mechanism) {
  mechanism.validate();
  return [mechanism](const Vector& theta, std::uint64_t seed) {
    return simulate(mechanism, theta, seed);
  };
}

TsgbmEstimator::TsgbmEstimator(MechanismSpec mechanism, CompressorSpec compressor,
                               int feature_degree, std::vector<GbmModel> models,
                               std::vector<std::string> names)
    : mechanism_(mechanism),
      compressor_(compressor),
      feature_degree_(feature_degree),
      models_(std::move(models)),
      names_(std::move(names)) {
  if (models_.empty()) throw DomainError("TsgbmEstimator: needs one model per dimension");
  if (!names_.empty() && names_.size() != models_.size())
    throw DomainError("TsgbmEstimator: names/models length mismatch");
  const Eigen::Index m = monomial_feature_count(compressor_.output_dims(), feature_degree_);
  for (const GbmModel& model : models_)
    if (model.num_features() != m)
      throw DomainError("TsgbmEstimator: model feature count does not match the feature map");
}

Vector TsgbmEstimator::features(const ObservationSequence& y) const {
  return monomial_features(compress(compressor_, y), feature_degree_);
}

Vector TsgbmEstimator::predict_features(const Eigen::Ref<const Vector>& phi) const {
  Vector theta(dims());
  const Eigen::RowVectorXd row = phi.transpose();
  for (Eigen::Index k = 0; k < dims(); ++k) theta[k] = models_[k].predict_row(row);
  return theta;
}

ParameterVector TsgbmEstimator::estimate(const ObservationSequence& y) const {
  return ParameterVector(predict_features(features(y)), names_);
}

PointEstimator TsgbmEstimator::as_function() const {
  return [this](const ObservationSequence& y) { return predict_features(features(y)); };
}

TrainingSet build_training_set(const Simulator& simulator, const PriorSpec& prior,
                               const CompressorSpec& compressor, int feature_degree,
                               Eigen::Index M_train, std::uint64_t seed, unsigned threads) {
  compressor.validate();
  const Matrix draws =
      sample_prior(prior, M_train, derive_substream_seed(seed, purpose::kPrior, 0));
  const Eigen::Index m = monomial_feature_count(compressor.output_dims(), feature_degree);
  Matrix features(M_train, m);
  std::vector<std::optional<std::string>> failures(static_cast<std::size_t>(M_train));

  parallel_for(static_cast<std::size_t>(M_train), threads, [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    try {
      const Vector theta = draws.row(row).transpose();
      const ObservationSequence y =
          simulator(theta, derive_substream_seed(seed, purpose::kSimulation, i));
      const Vector phi = monomial_features(compress(compressor, y), feature_degree);
      if (!phi.allFinite()) throw RuntimeError("non-finite features");
      features.row(row) = phi.transpose();
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });

  TrainingSet set;
  for (Eigen::Index i = 0; i < M_train; ++i)
    if (failures[static_cast<std::size_t>(i)]) set.dropped.push_back(i);

  if (static_cast<double>(set.dropped.size()) > kMaxDroppedFraction * static_cast<double>(M_train)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "training: " << set.dropped.size() << " of " << M_train
        << " samples failed simulation or compression; offending theta:";
    for (std::size_t j = 0; j < std::min<std::size_t>(set.dropped.size(), 10); ++j) {
      const Eigen::Index i = set.dropped[j];
      msg << " (" << draws.row(i) << ": " << *failures[static_cast<std::size_t>(i)] << ")";
    }
    if (set.dropped.size() > 10) msg << " ...";
    throw RuntimeError(msg.str());
  }

  const Eigen::Index kept = M_train - static_cast<Eigen::Index>(set.dropped.size());
  set.theta.resize(kept, draws.cols());
  set.features.resize(kept, m);
  Eigen::Index out = 0;
  for (Eigen::Index i = 0; i < M_train; ++i) {
    if (failures[static_cast<std::size_t>(i)]) continue;
    set.theta.row(out) = draws.row(i);
    set.features.row(out) = features.row(i);
    ++out;
  }
  return set;
}

TsgbmEstimator train_tsgbm(const Simulator& simulator, const MechanismSpec& mechanism,
                           const PriorSpec& prior, const CompressorSpec& compressor,
                           int feature_degree, const GbmParams& gbm, const LossSpec& loss,
                           Eigen::Index M_train, std::uint64_t seed, unsigned threads,
                           TrainSummary* summary) {
  gbm.validate();
  loss.validate();
  if (M_train < 2 * static_cast<Eigen::Index>(gbm.min_data_in_leaf))
    throw ConfigError("train: M_train must be at least 2 * min_data_in_leaf");
  if (prior.space.dims() != mechanism.dims())
    throw ConfigError("train: prior dimension does not match the mechanism");

  const TrainingSet set =
      build_training_set(simulator, prior, compressor, feature_degree, M_train, seed, threads);
  const Eigen::Index d = set.theta.cols();
  std::vector<GbmModel> models(static_cast<std::size_t>(d));
  std::vector<FitDiagnostics> diagnostics(static_cast<std::size_t>(d));
  parallel_for(static_cast<std::size_t>(d), threads, [&](std::size_t k) {
    const Vector target = set.theta.col(static_cast<Eigen::Index>(k));
    models[k] = fit_gbm(set.features, target, gbm, loss,
                        derive_substream_seed(seed, purpose::kBagging, k), &diagnostics[k]);
  });

  if (summary != nullptr) {
    summary->samples_used = set.theta.rows();
    summary->samples_dropped = static_cast<Eigen::Index>(set.dropped.size());
    summary->diagnostics = std::move(diagnostics);
  }
  std::vector<std::string> names = prior.space.names();
  if (names.empty()) names = parameter_names(mechanism.kind);
  return TsgbmEstimator(mechanism, compressor, feature_degree, std::move(models), std::move(names));
}

TsgbmEstimator train_tsgbm(const MechanismSpec& mechanism, const PriorSpec& prior,
                           const CompressorSpec& compressor, int feature_degree,
                           const GbmParams& gbm, const LossSpec& loss, Eigen::Index M_train,
                           std::uint64_t seed, unsigned threads, TrainSummary* summary) {
  return train_tsgbm(make_simulator(mechanism), mechanism, prior, compressor, feature_degree, gbm,
                     loss, M_train, seed, threads, summary);
}

MseReport evaluate_mse(const Simulator& simulator, const PointEstimator& estimator,
                       const ParameterVector& theta_test, Eigen::Index mc, std::uint64_t seed,
                       unsigned threads) {
  if (mc < 1) throw DomainError("evaluate_mse: MC must be >= 1");
  const Vector& theta = theta_test.values();
  Matrix squared(mc, theta.size());
  parallel_for(static_cast<std::size_t>(mc), threads, [&](std::size_t m) {
    const ObservationSequence y = simulator(theta, derive_substream_seed(seed, purpose::kEvaluation, m));
    const Vector estimate = estimator(y);
    if (estimate.size() != theta.size())
      throw DomainError("evaluate_mse: estimator returned the wrong dimension");
    squared.row(static_cast<Eigen::Index>(m)) = (estimate - theta).array().square().matrix().transpose();
  });
  MseReport report;
  report.theta = theta;
  report.mc = mc;
  report.seed = seed;
  // Accumulated in replication order so the sum is thread-count invariant.
  report.mse = Vector::Zero(theta.size());
  for (Eigen::Index m = 0; m < mc; ++m) report.mse += squared.row(m).transpose();
  report.mse /= static_cast<double>(mc);
  return report;
}

MseReport evaluate_mse(const TsgbmEstimator& estimator, const ParameterVector& theta_test,
                       Eigen::Index mc, std::uint64_t seed, unsigned threads) {
  return evaluate_mse(make_simulator(estimator.mechanism()), estimator.as_function(), theta_test,
                      mc, seed, threads);
}

ScatterData scatter(const Simulator& simulator, const PointEstimator& estimator,
                    const PriorSpec& prior, Eigen::Index M_test, std::uint64_t seed,
                    unsigned threads) {
  ScatterData data;
  data.truth = sample_prior(prior, M_test, derive_substream_seed(seed, purpose::kTest, 0));
  data.estimate.resize(M_test, data.truth.cols());
  parallel_for(static_cast<std::size_t>(M_test), threads, [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    const Vector theta = data.truth.row(row).transpose();
    const ObservationSequence y =
        simulator(theta, derive_substream_seed(seed, purpose::kTest, i + 1));
    data.estimate.row(row) = estimator(y).transpose();
  });
  return data;
}

LinearFit fit_line(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("fit_line: need >= 2 paired points");
  const double mx = x.mean();
  const double my = y.mean();
  const Eigen::ArrayXd dx = x.array() - mx;
  const Eigen::ArrayXd dy = y.array() - my;
  const double sxx = dx.square().sum();
  if (sxx == 0.0) throw DomainError("fit_line: x has zero variance");
  LinearFit fit;
  fit.slope = (dx * dy).sum() / sxx;
  fit.intercept = my - fit.slope * mx;
  const double ss_tot = dy.square().sum();
  const double ss_res = (dy - fit.slope * dx).square().sum();
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

Eigen::Matrix2d weibull_fisher_information(double eta, double gamma) {
  if (!(eta > 0.0) || !(gamma > 0.0))
    throw DomainError("weibull_crlb: scale and shape must be positive");
  // Integrate over u = (y/eta)^gamma, which is Exp(1).
  auto score_eta = [eta, gamma](double u) { return gamma / eta * (u - 1.0); };
  auto score_gamma = [gamma](double u) {
    const double lu = std::log(u);
    return (1.0 + lu - u * lu) / gamma;
  };

  boost::math::quadrature::exp_sinh<double> integrator;
  const double inf = std::numeric_limits<double>::infinity();
  auto expect = [&](auto&& f) {
    return integrator.integrate(
        [&](double u) {
          const double p = std::exp(-u);
          return p == 0.0 || u == 0.0 ? 0.0 : f(u) * p;
        },
        0.0, inf, 1e-13);
  };
  Eigen::Matrix2d info;
  info(0, 0) = expect([&](double t) { return score_eta(t) * score_eta(t); });
  info(1, 1) = expect([&](double t) { return score_gamma(t) * score_gamma(t); });
  info(0, 1) = info(1, 0) = expect([&](double t) { return score_eta(t) * score_gamma(t); });
  if (!info.allFinite()) throw RuntimeError("weibull_crlb: quadrature failed");
  return info;
}

WeibullCrlb weibull_crlb(double eta, double gamma, Eigen::Index N) {
  if (N < 1) throw DomainError("weibull_crlb: N must be >= 1");
  const Eigen::Matrix2d inverse = weibull_fisher_information(eta, gamma).inverse();
  const double n = static_cast<double>(N);
  return WeibullCrlb{inverse(0, 0) / n, inverse(1, 1) / n};
}

}  // namespace tsgbm
