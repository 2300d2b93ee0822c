#include "tsgbm/config.hpp"

#include "tsgbm/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace tsgbm {

using nlohmann::json;

namespace {

/// Walks a JSON object, tracking the path for diagnostics and rejecting
/// keys that are never read.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  T get(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(field(key) + ": missing required field");
    return convert<T>(j_.at(key), field(key));
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(j_.at(key), field(key));
  }

  Reader child(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(field(key) + ": missing required section");
    return Reader(j_.at(key), field(key));
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(field(key) + ": missing required field");
    return j_.at(key);
  }

  std::string field(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError(field(key) + ": unknown key");
  }

 private:
  template <typename T>
  static T convert(const json& value, const std::string& where) {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!value.is_number()) throw ConfigError(where + ": expected a number");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!value.is_number_integer()) throw ConfigError(where + ": expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (value.is_number_integer() && !value.is_number_unsigned())
            throw ConfigError(where + ": expected a non-negative integer");
        }
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!value.is_boolean()) throw ConfigError(where + ": expected true/false");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!value.is_string()) throw ConfigError(where + ": expected a string");
      }
      return value.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Vector vector_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a non-empty array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(where + "[" + std::to_string(i) + "]: expected a number");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

EstimatorSource estimator_source_from_string(const std::string& s, const std::string& where) {
  if (s == "trained") return EstimatorSource::trained;
  if (s == "oracle") return EstimatorSource::oracle;
  throw ConfigError(where + ": expected 'trained' or 'oracle'");
}

template <typename F>
auto at_field(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  at_field("config.mechanism", [&] { mechanism.validate(); return 0; });
  if (prior.dims() != mechanism.dims())
    throw ConfigError("config.prior: " + to_string(mechanism.kind) + " expects " +
                      std::to_string(mechanism.dims()) + " dimensions");
  if (mechanism.kind == MechanismKind::weibull && (prior.lo().array() <= 0.0).any())
    throw ConfigError("config.prior.lo: weibull parameters must be positive");
  at_field("config.compressor", [&] { compressor.validate(); return 0; });
  if (compressor.kind != CompressorKind::ar_coeffs && compressor.n > mechanism.N)
    throw ConfigError("config.compressor.n: quantile count exceeds mechanism.N");
  if (compressor.kind == CompressorKind::ar_coeffs && mechanism.N <= 10 * compressor.n)
    throw ConfigError("config.compressor.n: AR fit needs mechanism.N > 10 * n");
  if (feature_degree < 1 || feature_degree > 2)
    throw ConfigError("config.feature_degree: must be 1 or 2");
  gbm.validate();
  loss.validate();
  if (M_train < 2 * static_cast<Eigen::Index>(gbm.min_data_in_leaf))
    throw ConfigError("config.M_train: must be at least 2 * gbm.min_data_in_leaf");
  if (M_test < 2) throw ConfigError("config.M_test: must be >= 2");
  if (MC < 1) throw ConfigError("config.MC: must be >= 1");
  for (std::size_t i = 0; i < test_points.size(); ++i) {
    const std::string where = "config.test_points[" + std::to_string(i) + "]";
    if (test_points[i].size() != mechanism.dims())
      throw ConfigError(where + ": wrong dimension");
    if (!test_points[i].allFinite()) throw ConfigError(where + ": non-finite value");
    if (mechanism.kind == MechanismKind::weibull && (test_points[i].array() <= 0.0).any())
      throw ConfigError(where + ": weibull parameters must be positive");
  }
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  Reader root(j, "config");
  c.name = root.get_or<std::string>("name", "");

  {
    Reader m = root.child("mechanism");
    c.mechanism.kind = at_field(m.field("kind"), [&] {
      return mechanism_kind_from_string(m.get<std::string>("kind"));
    });
    c.mechanism.N = m.get<Eigen::Index>("N");
    c.mechanism.transformed = m.get_or<bool>("transformed", false);
    m.finish();
  }
  {
    Reader p = root.child("prior");
    Vector lo = vector_from_json(p.raw("lo"), p.field("lo"));
    Vector hi = vector_from_json(p.raw("hi"), p.field("hi"));
    p.finish();
    c.prior = at_field("config.prior", [&] {
      return ParameterSpace(lo, hi,
                            lo.size() == c.mechanism.dims() ? parameter_names(c.mechanism.kind)
                                                            : std::vector<std::string>{});
    });
  }
  {
    Reader h = root.child("compressor");
    c.compressor.kind = at_field(h.field("kind"), [&] {
      return compressor_kind_from_string(h.get<std::string>("kind"));
    });
    c.compressor.n = h.get<Eigen::Index>("n");
    c.compressor.include_intercept = h.get_or<bool>("include_intercept", false);
    h.finish();
  }
  c.feature_degree = root.get_or<int>("feature_degree", 1);
  {
    Reader g = root.child("gbm");
    c.gbm.learning_rate = g.get<double>("learning_rate");
    c.gbm.iterations = g.get<int>("iterations");
    c.gbm.max_depth = g.get<int>("max_depth");
    c.gbm.num_leaves = g.get<int>("num_leaves");
    c.gbm.bagging_fraction = g.get<double>("bagging_fraction");
    c.gbm.min_data_in_leaf = g.get<int>("min_data_in_leaf");
    c.gbm.l1_regularization = g.get<double>("l1_regularization");
    c.gbm.histogram_bins = g.get_or<int>("histogram_bins", 255);
    g.finish();
  }
  {
    Reader l = root.child("loss");
    c.loss.kind = at_field(l.field("kind"), [&] { return loss_kind_from_string(l.get<std::string>("kind")); });
    c.loss.K = l.get_or<double>("K", 1e3);
    l.finish();
  }
  c.M_train = root.get<Eigen::Index>("M_train");
  c.M_test = root.get<Eigen::Index>("M_test");
  c.MC = root.get<Eigen::Index>("MC");
  c.master_seed = root.get<std::uint64_t>("master_seed");
  c.output_dir = root.get_or<std::string>("output_dir", "out");
  if (j.contains("test_points")) {
    const json& points = root.raw("test_points");
    if (!points.is_array()) throw ConfigError("config.test_points: expected an array");
    for (std::size_t i = 0; i < points.size(); ++i)
      c.test_points.push_back(
          vector_from_json(points[i], "config.test_points[" + std::to_string(i) + "]"));
  }
  c.estimator = estimator_source_from_string(root.get_or<std::string>("estimator", "trained"),
                                             root.field("estimator"));
  root.finish();
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json points = json::array();
  for (const Vector& p : c.test_points) points.push_back(vector_to_json(p));
  return {
      {"name", c.name},
      {"mechanism",
       {{"kind", to_string(c.mechanism.kind)}, {"N", c.mechanism.N}, {"transformed", c.mechanism.transformed}}},
      {"prior", {{"lo", vector_to_json(c.prior.lo())}, {"hi", vector_to_json(c.prior.hi())}}},
      {"compressor",
       {{"kind", to_string(c.compressor.kind)},
        {"n", c.compressor.n},
        {"include_intercept", c.compressor.include_intercept}}},
      {"feature_degree", c.feature_degree},
      {"gbm",
       {{"learning_rate", c.gbm.learning_rate},
        {"iterations", c.gbm.iterations},
        {"max_depth", c.gbm.max_depth},
        {"num_leaves", c.gbm.num_leaves},
        {"bagging_fraction", c.gbm.bagging_fraction},
        {"min_data_in_leaf", c.gbm.min_data_in_leaf},
        {"l1_regularization", c.gbm.l1_regularization},
        {"histogram_bins", c.gbm.histogram_bins}}},
      {"loss", to_json(c.loss)},
      {"M_train", c.M_train},
      {"M_test", c.M_test},
      {"MC", c.MC},
      {"master_seed", c.master_seed},
      {"output_dir", c.output_dir},
      {"test_points", std::move(points)},
      {"estimator", c.estimator == EstimatorSource::trained ? "trained" : "oracle"},
  };
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_config(j);
}

std::string config_fingerprint(const ExperimentConfig& config) {
  json j = to_json(config);
  j.erase("output_dir");
  const std::string canonical =
      j.dump() + "|" + std::string(kToolVersion) + "|" + std::string(kRngAlgorithm);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical)));
  return hex;
}

}  // namespace tsgbm
