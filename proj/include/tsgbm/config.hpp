#pragma once

#include "tsgbm/compression.hpp"
#include "tsgbm/gbm.hpp"
#include "tsgbm/simulators.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tsgbm {

/// Which estimator `evaluate` and `scatter` apply. `oracle` returns the true
/// parameter and exists to sanity-check the evaluation harness.
enum class EstimatorSource { trained, oracle };

/// Declarative description of a train/evaluate run.
struct ExperimentConfig {
  std::string name;
  MechanismSpec mechanism;
  ParameterSpace prior;
  CompressorSpec compressor;
  int feature_degree = 1;
  GbmParams gbm;
  LossSpec loss;
  Eigen::Index M_train = 0;
  Eigen::Index M_test = 0;
  Eigen::Index MC = 0;
  std::uint64_t master_seed = 0;
  std::string output_dir = "out";
  std::vector<Vector> test_points;
  EstimatorSource estimator = EstimatorSource::trained;

  PriorSpec prior_spec() const { return PriorSpec{prior}; }

  /// Checks every module-level precondition; throws ConfigError naming the
  /// offending field.
  void validate() const;
};

/// Strict parse: unknown keys and type mismatches raise ConfigError with the
/// JSON path of the field.
ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);

ExperimentConfig load_config(const std::string& path);

/// Content hash of the run-defining fields (output_dir excluded), the tool
/// version and the RNG algorithm, as 16 hex digits.
std::string config_fingerprint(const ExperimentConfig& config);

}  // namespace tsgbm
