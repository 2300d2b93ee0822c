#pragma once

#include "tsgbm/compression.hpp"
#include "tsgbm/core.hpp"
#include "tsgbm/gbm.hpp"
#include "tsgbm/simulators.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace tsgbm {

/// Draws one observation sequence for theta from the given seed.
using Simulator = std::function<ObservationSequence(const Vector& theta, std::uint64_t seed)>;

/// Maps an observation sequence to a parameter estimate.
using PointEstimator = std::function<Vector(const ObservationSequence& y)>;

Simulator make_simulator(const MechanismSpec& mechanism);

/// delta = g o phi o h, with one boosted model per parameter dimension.
class TsgbmEstimator {
 public:
  TsgbmEstimator() = default;
  TsgbmEstimator(MechanismSpec mechanism, CompressorSpec compressor, int feature_degree,
                 std::vector<GbmModel> models, std::vector<std::string> names);

  const MechanismSpec& mechanism() const { return mechanism_; }
  const CompressorSpec& compressor() const { return compressor_; }
  int feature_degree() const { return feature_degree_; }
  const std::vector<GbmModel>& models() const { return models_; }
  const std::vector<std::string>& names() const { return names_; }
  Eigen::Index dims() const { return static_cast<Eigen::Index>(models_.size()); }

  /// phi(h(y)).
  Vector features(const ObservationSequence& y) const;
  Vector predict_features(const Eigen::Ref<const Vector>& phi) const;
  ParameterVector estimate(const ObservationSequence& y) const;

  PointEstimator as_function() const;

 private:
  MechanismSpec mechanism_;
  CompressorSpec compressor_;
  int feature_degree_ = 1;
  std::vector<GbmModel> models_;
  std::vector<std::string> names_;
};

/// Simulated (phi(alpha_i), theta_i) pairs after dropping failed samples.
struct TrainingSet {
  Matrix theta;
  Matrix features;
  std::vector<Eigen::Index> dropped;  // prior-draw indices that failed
};

/// Failed samples above this fraction abort training.
inline constexpr double kMaxDroppedFraction = 1e-3;

TrainingSet build_training_set(const Simulator& simulator, const PriorSpec& prior,
                               const CompressorSpec& compressor, int feature_degree,
                               Eigen::Index M_train, std::uint64_t seed, unsigned threads = 1);

struct TrainSummary {
  Eigen::Index samples_used = 0;
  Eigen::Index samples_dropped = 0;
  std::vector<FitDiagnostics> diagnostics;  // one per dimension
};

TsgbmEstimator train_tsgbm(const MechanismSpec& mechanism, const PriorSpec& prior,
                           const CompressorSpec& compressor, int feature_degree,
                           const GbmParams& gbm, const LossSpec& loss, Eigen::Index M_train,
                           std::uint64_t seed, unsigned threads = 1,
                           TrainSummary* summary = nullptr);

/// Same, with a caller-supplied simulator; `mechanism` is kept as metadata.
TsgbmEstimator train_tsgbm(const Simulator& simulator, const MechanismSpec& mechanism,
                           const PriorSpec& prior, const CompressorSpec& compressor,
                           int feature_degree, const GbmParams& gbm, const LossSpec& loss,
                           Eigen::Index M_train, std::uint64_t seed, unsigned threads = 1,
                           TrainSummary* summary = nullptr);

struct MseReport {
  Vector theta;
  Vector mse;  // per dimension
  Eigen::Index mc = 0;
  std::uint64_t seed = 0;
};

/// Monte Carlo MSE at a fixed theta. Replication m simulates with
/// derive_substream_seed(seed, "eval", m).
MseReport evaluate_mse(const Simulator& simulator, const PointEstimator& estimator,
                       const ParameterVector& theta_test, Eigen::Index mc, std::uint64_t seed,
                       unsigned threads = 1);

MseReport evaluate_mse(const TsgbmEstimator& estimator, const ParameterVector& theta_test,
                       Eigen::Index mc, std::uint64_t seed, unsigned threads = 1);

/// True/estimated pairs over fresh prior draws.
struct ScatterData {
  Matrix truth;
  Matrix estimate;
};

ScatterData scatter(const Simulator& simulator, const PointEstimator& estimator,
                    const PriorSpec& prior, Eigen::Index M_test, std::uint64_t seed,
                    unsigned threads = 1);

/// Least-squares line estimate = intercept + slope * truth, with R^2.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

LinearFit fit_line(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y);

// ---------------------------------------------------------------------------
// Weibull reference bounds

/// Per-observation Fisher information of Weibull(eta, gamma), ordered
/// (eta, gamma), by adaptive quadrature of the score outer product.
Eigen::Matrix2d weibull_fisher_information(double eta, double gamma);

struct WeibullCrlb {
  double eta = 0.0;
  double gamma = 0.0;
};

/// Diagonal of the inverse Fisher information for N i.i.d. samples.
WeibullCrlb weibull_crlb(double eta, double gamma, Eigen::Index N);

}  // namespace tsgbm
