#pragma once

#include "tsgbm/gbm.hpp"
#include "tsgbm/pipeline.hpp"

#include "json.hpp"

#include <string>

namespace tsgbm {

/// Version tag written into every model and estimator file. Readers reject
/// files with a different version.
inline constexpr int kModelFormatVersion = 1;
inline constexpr std::string_view kToolVersion = "0.1.0";

nlohmann::json to_json(const LossSpec& loss);
LossSpec loss_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const GbmModel& model);
GbmModel gbm_model_from_json(const nlohmann::json& j);

/// `fingerprint` identifies the configuration that produced the estimator.
nlohmann::json to_json(const TsgbmEstimator& estimator, const std::string& fingerprint = "");
TsgbmEstimator estimator_from_json(const nlohmann::json& j);

void save_estimator(const TsgbmEstimator& estimator, const std::string& path,
                    const std::string& fingerprint = "");
TsgbmEstimator load_estimator(const std::string& path);

}  // namespace tsgbm
