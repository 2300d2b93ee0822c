#include "tsgbm/simulators.hpp"

#include <cmath>

namespace tsgbm {

std::string to_string(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::weibull: return "weibull";
    case MechanismKind::state_space_1p: return "state_space_1p";
    case MechanismKind::stoch_vol: return "stoch_vol";
  }
  return "unknown";
}

MechanismKind mechanism_kind_from_string(const std::string& name) {
  if (name == "weibull") return MechanismKind::weibull;
  if (name == "state_space_1p") return MechanismKind::state_space_1p;
  if (name == "stoch_vol") return MechanismKind::stoch_vol;
  throw ConfigError("unknown mechanism kind '" + name + "'");
}

Eigen::Index parameter_dims(MechanismKind kind) {
  return kind == MechanismKind::state_space_1p ? 1 : 2;
}

std::vector<std::string> parameter_names(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::weibull: return {"eta", "gamma"};
    case MechanismKind::state_space_1p: return {"a"};
    case MechanismKind::stoch_vol: return {"a", "b"};
  }
  return {};
}

void MechanismSpec::validate() const {
  if (N < 1) throw ConfigError("mechanism.N must be >= 1");
  if (transformed && kind != MechanismKind::stoch_vol)
    throw ConfigError("mechanism.transformed applies to stoch_vol only");
}

ObservationSequence weibull_sample(double eta, double gamma, Eigen::Index N, std::uint64_t seed) {
  if (!(eta > 0.0) || !(gamma > 0.0))
    throw DomainError("weibull_sample: scale and shape must be positive");
  if (N < 1) throw DomainError("weibull_sample: N must be >= 1");
  RandomStream rng(seed);
  Vector y(N);
  const double inv_shape = 1.0 / gamma;
  for (Eigen::Index k = 0; k < N; ++k) y[k] = eta * std::pow(-std::log(rng.uniform()), inv_shape);
  return ObservationSequence(std::move(y), "weibull");
}

Vector state_space_recursion(double a, const StateSpaceNoise& noise, double x1_0, double x2_0,
                             Eigen::Index burn_in) {
  const Eigen::Index steps = noise.v2.size();
  if (noise.v11.size() != steps || noise.v12.size() != steps)
    throw DomainError("state_space_recursion: noise lengths differ");
  if (burn_in < 0 || burn_in >= steps)
    throw DomainError("state_space_recursion: burn-in leaves no samples");
  Vector y(steps - burn_in);
  const double a2 = a * a;
  double x1 = x1_0;
  double x2 = x2_0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    if (k >= burn_in) y[k - burn_in] = a * x1 + x2 + noise.v2[k];
    const double x1_next = a * x1 + noise.v11[k];
    const double x2_next = x1 + a2 * x2 + noise.v12[k];
    x1 = x1_next;
    x2 = x2_next;
  }
  return y;
}

ObservationSequence state_space_simulate(double a, Eigen::Index N, std::uint64_t seed) {
  if (N < 1) throw DomainError("state_space_simulate: N must be >= 1");
  const Eigen::Index steps = N + kBurnIn;
  RandomStream rng(seed);
  StateSpaceNoise noise{Vector(steps), Vector(steps), Vector(steps)};
  const double measurement_sd = std::sqrt(kStateSpaceMeasurementVariance);
  for (Eigen::Index k = 0; k < steps; ++k) {
    noise.v11[k] = rng.normal();
    noise.v12[k] = rng.normal();
    noise.v2[k] = measurement_sd * rng.normal();
  }
  return ObservationSequence(state_space_recursion(a, noise, 0.0, 0.0, kBurnIn), "state_space_1p");
}

StochVolPath stoch_vol_recursion(double a, double b, const Vector& v, const Vector& r, double x0,
                                 Eigen::Index burn_in) {
  const Eigen::Index steps = r.size();
  if (v.size() != steps) throw DomainError("stoch_vol_recursion: noise lengths differ");
  if (burn_in < 0 || burn_in >= steps)
    throw DomainError("stoch_vol_recursion: burn-in leaves no samples");
  const Eigen::Index n = steps - burn_in;
  StochVolPath path{Vector(n), Vector(n), Vector(n), Vector(n)};
  double x = x0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    if (k >= burn_in) {
      const Eigen::Index j = k - burn_in;
      if (r[k] == 0.0) throw DomainError("stoch_vol: zero observation noise makes ln(y^2) undefined");
      path.x[j] = x;
      path.r[j] = r[k];
      path.y[j] = std::sqrt(std::exp(x)) * r[k];
      // Computed from the factors so the additive identity holds exactly
      // even when y underflows.
      path.y_bar[j] = x + std::log(r[k] * r[k]);
    }
    x = a + b * x + v[k];
  }
  return path;
}

StochVolPath stoch_vol_path(double a, double b, Eigen::Index N, std::uint64_t seed) {
  if (N < 1) throw DomainError("stoch_vol_simulate: N must be >= 1");
  if (b == 1.0) throw DomainError("stoch_vol_simulate: b = 1 has no stationary mean");
  const Eigen::Index steps = N + kBurnIn;
  RandomStream rng(seed);
  Vector v(steps);
  Vector r(steps);
  for (Eigen::Index k = 0; k < steps; ++k) {
    v[k] = rng.normal();
    r[k] = rng.normal();
  }
  return stoch_vol_recursion(a, b, v, r, a / (1.0 - b), kBurnIn);
}

ObservationSequence stoch_vol_simulate(double a, double b, Eigen::Index N, std::uint64_t seed,
                                       bool transformed) {
  StochVolPath path = stoch_vol_path(a, b, N, seed);
  return ObservationSequence(transformed ? std::move(path.y_bar) : std::move(path.y), "stoch_vol");
}

ObservationSequence simulate(const MechanismSpec& mechanism, const Eigen::Ref<const Vector>& theta,
                             std::uint64_t seed) {
  if (theta.size() != mechanism.dims())
    throw DomainError("simulate: " + to_string(mechanism.kind) + " expects " +
                      std::to_string(mechanism.dims()) + " parameters");
  switch (mechanism.kind) {
    case MechanismKind::weibull: return weibull_sample(theta[0], theta[1], mechanism.N, seed);
    case MechanismKind::state_space_1p: return state_space_simulate(theta[0], mechanism.N, seed);
    case MechanismKind::stoch_vol:
      return stoch_vol_simulate(theta[0], theta[1], mechanism.N, seed, mechanism.transformed);
  }
  throw DomainError("simulate: unknown mechanism");
}

Matrix sample_prior(const PriorSpec& prior, Eigen::Index M, std::uint64_t seed) {
  const ParameterSpace& space = prior.space;
  if (space.dims() == 0) throw ConfigError("sample_prior: empty parameter space");
  if (M < 1) throw DomainError("sample_prior: M must be >= 1");
  RandomStream rng(seed);
  Matrix draws(M, space.dims());
  const Vector width = space.hi() - space.lo();
  for (Eigen::Index i = 0; i < M; ++i)
    for (Eigen::Index k = 0; k < space.dims(); ++k)
      draws(i, k) = space.lo()[k] + width[k] * rng.uniform();
  return draws;
}

}  // namespace tsgbm
