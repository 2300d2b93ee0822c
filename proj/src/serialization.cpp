#include "tsgbm/serialization.hpp"

#include <fstream>

namespace tsgbm {

using nlohmann::json;

namespace {

void check_header(const json& j, const char* format) {
  if (!j.is_object() || j.value("format", std::string{}) != format)
    throw ConfigError(std::string("not a ") + format + " document");
  const int version = j.at("version").get<int>();
  if (version != kModelFormatVersion)
    throw ConfigError(std::string(format) + ": unsupported version " + std::to_string(version));
}

template <typename F>
auto parse_guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

json to_json(const LossSpec& loss) { return {{"kind", to_string(loss.kind)}, {"K", loss.K}}; }

LossSpec loss_spec_from_json(const json& j) {
  LossSpec loss;
  loss.kind = loss_kind_from_string(j.at("kind").get<std::string>());
  loss.K = j.at("K").get<double>();
  loss.validate();
  return loss;
}

json to_json(const GbmModel& model) {
  json trees = json::array();
  for (const RegressionTree& tree : model.trees()) {
    json nodes = json::array();
    for (const TreeNode& n : tree.nodes()) {
      if (n.feature < 0)
        nodes.push_back({{"leaf", n.value}, {"depth", n.depth}, {"count", n.count}});
      else
        nodes.push_back({{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right},
                         {"depth", n.depth},
                         {"count", n.count}});
    }
    trees.push_back(std::move(nodes));
  }
  return {{"format", "tsgbm-gbm"},
          {"version", kModelFormatVersion},
          {"initial", model.initial()},
          {"learning_rate", model.learning_rate()},
          {"num_features", model.num_features()},
          {"loss", to_json(model.loss())},
          {"trees", std::move(trees)}};
}

GbmModel gbm_model_from_json(const json& j) {
  return parse_guarded("gbm model", [&] {
    check_header(j, "tsgbm-gbm");
    std::vector<RegressionTree> trees;
    for (const json& jt : j.at("trees")) {
      std::vector<TreeNode> nodes;
      for (const json& jn : jt) {
        TreeNode n;
        n.depth = jn.at("depth").get<int>();
        n.count = jn.at("count").get<int>();
        if (jn.contains("leaf")) {
          n.value = jn.at("leaf").get<double>();
        } else {
          n.feature = jn.at("feature").get<int>();
          n.threshold = jn.at("threshold").get<double>();
          n.left = jn.at("left").get<int>();
          n.right = jn.at("right").get<int>();
        }
        nodes.push_back(n);
      }
      trees.emplace_back(std::move(nodes));
    }
    const auto num_features = j.at("num_features").get<Eigen::Index>();
    for (const RegressionTree& t : trees)
      for (const TreeNode& n : t.nodes())
        if (n.feature >= num_features) throw ConfigError("gbm model: feature index out of range");
    return GbmModel(j.at("initial").get<double>(), j.at("learning_rate").get<double>(), num_features,
                    loss_spec_from_json(j.at("loss")), std::move(trees));
  });
}

json to_json(const TsgbmEstimator& estimator, const std::string& fingerprint) {
  json models = json::array();
  for (const GbmModel& m : estimator.models()) models.push_back(to_json(m));
  const MechanismSpec& mech = estimator.mechanism();
  const CompressorSpec& comp = estimator.compressor();
  return {{"format", "tsgbm-estimator"},
          {"version", kModelFormatVersion},
          {"config_fingerprint", fingerprint},
          {"mechanism", {{"kind", to_string(mech.kind)}, {"N", mech.N}, {"transformed", mech.transformed}}},
          {"compressor",
           {{"kind", to_string(comp.kind)}, {"n", comp.n}, {"include_intercept", comp.include_intercept}}},
          {"feature_degree", estimator.feature_degree()},
          {"names", estimator.names()},
          {"models", std::move(models)}};
}

TsgbmEstimator estimator_from_json(const json& j) {
  return parse_guarded("estimator", [&] {
    check_header(j, "tsgbm-estimator");
    MechanismSpec mech;
    const json& jm = j.at("mechanism");
    mech.kind = mechanism_kind_from_string(jm.at("kind").get<std::string>());
    mech.N = jm.at("N").get<Eigen::Index>();
    mech.transformed = jm.at("transformed").get<bool>();
    mech.validate();
    CompressorSpec comp;
    const json& jc = j.at("compressor");
    comp.kind = compressor_kind_from_string(jc.at("kind").get<std::string>());
    comp.n = jc.at("n").get<Eigen::Index>();
    comp.include_intercept = jc.at("include_intercept").get<bool>();
    comp.validate();
    std::vector<GbmModel> models;
    for (const json& jg : j.at("models")) models.push_back(gbm_model_from_json(jg));
    return TsgbmEstimator(mech, comp, j.at("feature_degree").get<int>(), std::move(models),
                          j.at("names").get<std::vector<std::string>>());
  });
}

void save_estimator(const TsgbmEstimator& estimator, const std::string& path,
                    const std::string& fingerprint) {
  std::ofstream out(path);
  if (!out) throw RuntimeError("cannot write estimator to '" + path + "'");
  out << to_json(estimator, fingerprint).dump(1) << '\n';
  if (!out) throw RuntimeError("failed writing estimator to '" + path + "'");
}

TsgbmEstimator load_estimator(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read estimator '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("estimator '" + path + "': " + e.what());
  }
  return estimator_from_json(j);
}

}  // namespace tsgbm
