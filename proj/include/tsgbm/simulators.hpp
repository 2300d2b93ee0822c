#pragma once

#include "tsgbm/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tsgbm {

enum class MechanismKind { weibull, state_space_1p, stoch_vol };

std::string to_string(MechanismKind kind);
MechanismKind mechanism_kind_from_string(const std::string& name);

/// Number of unknown parameters for each mechanism.
Eigen::Index parameter_dims(MechanismKind kind);
std::vector<std::string> parameter_names(MechanismKind kind);

/// Steps simulated and discarded before the N recorded samples of the
/// dynamical mechanisms.
inline constexpr Eigen::Index kBurnIn = 200;

/// Observation noise variance of the single-parameter state-space model.
inline constexpr double kStateSpaceMeasurementVariance = 0.01;

struct MechanismSpec {
  MechanismKind kind = MechanismKind::weibull;
  Eigen::Index N = 1;
  /// stoch_vol only: emit ln(y^2) instead of y.
  bool transformed = false;

  Eigen::Index dims() const { return parameter_dims(kind); }
  void validate() const;
};

struct PriorSpec {
  ParameterSpace space;  // uniform on every dimension
};

// ---------------------------------------------------------------------------
// Mechanisms

/// N i.i.d. Weibull(eta, gamma) draws by inverse transform.
ObservationSequence weibull_sample(double eta, double gamma, Eigen::Index N, std::uint64_t seed);

/// Noise sequences and initial state for the two-state linear model. Each
/// noise vector holds one entry per simulated step (burn-in included).
struct StateSpaceNoise {
  Vector v11;
  Vector v12;
  Vector v2;
};

/// Deterministic recursion of the two-state model driven by given noise.
/// Returns the outputs after dropping the first `burn_in` steps.
Vector state_space_recursion(double a, const StateSpaceNoise& noise, double x1_0, double x2_0,
                             Eigen::Index burn_in);

ObservationSequence state_space_simulate(double a, Eigen::Index N, std::uint64_t seed);

/// Latent log-volatility path and the matching observations.
struct StochVolPath {
  Vector x;       // latent state x(k)
  Vector y;       // y(k) = sqrt(exp(x(k))) * r(k)
  Vector y_bar;   // ln(y(k)^2)
  Vector r;       // observation noise r(k)
};

/// Deterministic stochastic-volatility recursion driven by given noise
/// (v: process noise, r: observation noise), dropping `burn_in` steps.
StochVolPath stoch_vol_recursion(double a, double b, const Vector& v, const Vector& r, double x0,
                                 Eigen::Index burn_in);

StochVolPath stoch_vol_path(double a, double b, Eigen::Index N, std::uint64_t seed);

ObservationSequence stoch_vol_simulate(double a, double b, Eigen::Index N, std::uint64_t seed,
                                       bool transformed);

/// Dispatches on the mechanism kind.
ObservationSequence simulate(const MechanismSpec& mechanism, const Eigen::Ref<const Vector>& theta,
                             std::uint64_t seed);

/// M i.i.d. uniform draws from the prior box, one row per draw.
Matrix sample_prior(const PriorSpec& prior, Eigen::Index M, std::uint64_t seed);

}  // namespace tsgbm
