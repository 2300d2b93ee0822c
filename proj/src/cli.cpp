#include "tsgbm/cli.hpp"

#include "tsgbm/config.hpp"
#include "tsgbm/pipeline.hpp"
#include "tsgbm/serialization.hpp"

#include "CLI11.hpp"

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace tsgbm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  return std::string(buf, result.ptr);
}

namespace {

struct Options {
  std::string config_path;
  std::string out_dir;
  std::string model_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned threads = 1;
};

/// Wall-clock bookkeeping for the run manifest.
class StageTimer {
 public:
  void begin(std::string stage) {
    stage_ = std::move(stage);
    start_ = std::chrono::steady_clock::now();
  }
  void end() {
    const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start_;
    timings_[stage_] = d.count();
  }
  const std::string& stage() const { return stage_; }
  const json& timings() const { return timings_; }

 private:
  std::string stage_ = "setup";
  std::chrono::steady_clock::time_point start_;
  json timings_ = json::object();
};

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::string& command, const std::string& fingerprint,
            const ExperimentConfig& config)
      : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw RuntimeError("cannot write '" + path.string() + "'");
    out_ << "# tsgbm " << command << "\n";
    out_ << "# manifest: " << fingerprint << "\n";
    out_ << "# config: " << config.name << "\n";
  }

  void comment(const std::string& text) { out_ << "# " << text << "\n"; }

  void header(const std::vector<std::string>& columns) { write(columns); }

  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    write(cells);
  }

  void close() {
    out_.close();
    if (!out_) throw RuntimeError("failed writing '" + path_.string() + "'");
  }

 private:
  void write(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

  fs::path path_;
  std::ofstream out_;
};

std::vector<std::string> names_of(const ExperimentConfig& config) {
  return parameter_names(config.mechanism.kind);
}

std::vector<Vector> require_test_points(const ExperimentConfig& config) {
  if (config.test_points.empty()) throw ConfigError("config.test_points: required by this command");
  return config.test_points;
}

void write_manifest(const fs::path& dir, const std::string& command, const std::string& fingerprint,
                    const ExperimentConfig& config, const StageTimer& timer, double total_seconds,
                    const std::vector<std::string>& outputs, unsigned threads) {
  json manifest = {{"command", command},
                   {"config_fingerprint", fingerprint},
                   {"config", to_json(config)},
                   {"tool_version", kToolVersion},
                   {"rng_algorithm", kRngAlgorithm},
                   {"threads", threads},
                   {"wall_clock_seconds", total_seconds},
                   {"stage_seconds", timer.timings()},
                   {"outputs", outputs}};
  std::ofstream out(dir / ("manifest_" + command + ".json"));
  if (!out) throw RuntimeError("cannot write manifest in '" + dir.string() + "'");
  out << manifest.dump(2) << "\n";
}

PointEstimator estimator_for(const ExperimentConfig& config, const Options& opts,
                             const fs::path& out_dir, std::optional<TsgbmEstimator>& storage,
                             const ParameterVector* oracle_theta) {
  if (config.estimator == EstimatorSource::oracle) {
    if (oracle_theta == nullptr) throw ConfigError("config.estimator: oracle needs a fixed theta");
    const Vector theta = oracle_theta->values();
    return [theta](const ObservationSequence&) { return theta; };
  }
  if (!storage) {
    const std::string path =
        opts.model_path.empty() ? (out_dir / "estimator.json").string() : opts.model_path;
    storage = load_estimator(path);
    if (storage->mechanism().kind != config.mechanism.kind)
      throw DomainError("estimator '" + path + "' was trained for " +
                        to_string(storage->mechanism().kind));
  }
  return storage->as_function();
}

int dispatch(const std::string& command, const Options& opts, std::ostream& out,
             std::ostream& err, StageTimer& timer) {
  const auto started = std::chrono::steady_clock::now();
  timer.begin("config");
  ExperimentConfig config = load_config(opts.config_path);
  if (opts.seed_set) config.master_seed = opts.seed;
  if (!opts.out_dir.empty()) config.output_dir = opts.out_dir;
  config.validate();
  const std::string fingerprint = config_fingerprint(config);
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  timer.end();

  const std::vector<std::string> names = names_of(config);
  const Simulator simulator = make_simulator(config.mechanism);
  std::vector<std::string> outputs;
  json summary = {{"command", command}, {"config_fingerprint", fingerprint}};

  if (command == "simulate") {
    timer.begin("simulate");
    const auto points = require_test_points(config);
    for (std::size_t r = 0; r < points.size(); ++r) {
      const std::uint64_t seed = derive_substream_seed(config.master_seed, "simulate", r);
      const ObservationSequence y = simulator(points[r], seed);
      const std::string file = "simulate_" + std::to_string(r) + ".csv";
      CsvWriter csv(dir / file, command, fingerprint, config);
      csv.comment("mechanism: " + to_string(config.mechanism.kind) +
                  (config.mechanism.transformed ? " (log-square transformed)" : ""));
      std::string theta_text;
      for (std::size_t k = 0; k < names.size(); ++k)
        theta_text += (k ? "," : "") + names[k] + "=" + format_double(points[r][static_cast<Eigen::Index>(k)]);
      csv.comment("theta: " + theta_text);
      csv.comment("N: " + std::to_string(config.mechanism.N));
      csv.comment("seed: " + std::to_string(seed));
      csv.header({"y"});
      for (Eigen::Index k = 0; k < y.size(); ++k) csv.row({y.samples()[k]});
      csv.close();
      outputs.push_back(file);
    }
    timer.end();
  } else if (command == "train") {
    timer.begin("train");
    err << "training " << config.name << ": M_train=" << config.M_train
        << " N=" << config.mechanism.N << " iterations=" << config.gbm.iterations << "\n";
    TrainSummary train_summary;
    const TsgbmEstimator estimator = train_tsgbm(
        simulator, config.mechanism, config.prior_spec(), config.compressor, config.feature_degree,
        config.gbm, config.loss, config.M_train, config.master_seed, opts.threads, &train_summary);
    if (train_summary.samples_dropped > 0)
      err << "dropped " << train_summary.samples_dropped << " failed training samples\n";
    save_estimator(estimator, (dir / "estimator.json").string(), fingerprint);
    outputs.push_back("estimator.json");

    CsvWriter csv(dir / "training_loss.csv", command, fingerprint, config);
    std::vector<std::string> columns{"iteration"};
    for (const auto& n : names) columns.push_back("loss_" + n);
    csv.header(columns);
    const std::size_t rows = train_summary.diagnostics.front().loss_history.size();
    for (std::size_t it = 0; it < rows; ++it) {
      std::vector<double> row{static_cast<double>(it)};
      for (const FitDiagnostics& d : train_summary.diagnostics) row.push_back(d.loss_history[it]);
      csv.row(row);
    }
    csv.close();
    outputs.push_back("training_loss.csv");
    summary["samples_used"] = train_summary.samples_used;
    summary["samples_dropped"] = train_summary.samples_dropped;
    timer.end();
  } else if (command == "evaluate") {
    timer.begin("evaluate");
    const auto points = require_test_points(config);
    const bool with_crlb = config.mechanism.kind == MechanismKind::weibull;
    std::optional<TsgbmEstimator> storage;
    if (config.estimator == EstimatorSource::trained) estimator_for(config, opts, dir, storage, nullptr);
    CsvWriter csv(dir / "mse.csv", command, fingerprint, config);
    csv.comment("estimator: " +
                std::string(config.estimator == EstimatorSource::oracle ? "oracle" : "trained"));
    std::vector<std::string> columns;
    for (const auto& n : names) columns.push_back(n + "_true");
    for (const auto& n : names) columns.push_back("mse_" + n);
    if (with_crlb)
      for (const auto& n : names) columns.push_back("crlb_" + n);
    columns.push_back("mc");
    csv.header(columns);
    json rows = json::array();
    for (std::size_t r = 0; r < points.size(); ++r) {
      const ParameterVector theta(points[r], names);
      const PointEstimator estimate = estimator_for(config, opts, dir, storage, &theta);
      const MseReport report =
          evaluate_mse(simulator, estimate, theta, config.MC,
                       derive_substream_seed(config.master_seed, "eval-point", r), opts.threads);
      std::vector<double> row(report.theta.data(), report.theta.data() + report.theta.size());
      row.insert(row.end(), report.mse.data(), report.mse.data() + report.mse.size());
      if (with_crlb) {
        const WeibullCrlb bound = weibull_crlb(points[r][0], points[r][1], config.mechanism.N);
        row.push_back(bound.eta);
        row.push_back(bound.gamma);
      }
      row.push_back(static_cast<double>(report.mc));
      csv.row(row);
      rows.push_back(std::vector<double>(report.mse.data(), report.mse.data() + report.mse.size()));
      err << "evaluated test point " << r + 1 << "/" << points.size() << "\n";
    }
    csv.close();
    outputs.push_back("mse.csv");
    summary["mse"] = rows;
    timer.end();
  } else if (command == "scatter") {
    timer.begin("scatter");
    if (config.estimator == EstimatorSource::oracle)
      throw ConfigError("config.estimator: scatter needs a trained estimator");
    std::optional<TsgbmEstimator> storage;
    const PointEstimator estimate = estimator_for(config, opts, dir, storage, nullptr);
    const ScatterData data =
        scatter(simulator, estimate, config.prior_spec(), config.M_test,
                derive_substream_seed(config.master_seed, "scatter", 0), opts.threads);
    CsvWriter csv(dir / "scatter.csv", command, fingerprint, config);
    std::vector<std::string> columns;
    for (const auto& n : names) columns.push_back(n + "_true");
    for (const auto& n : names) columns.push_back(n + "_est");
    csv.header(columns);
    for (Eigen::Index i = 0; i < data.truth.rows(); ++i) {
      std::vector<double> row;
      for (Eigen::Index k = 0; k < data.truth.cols(); ++k) row.push_back(data.truth(i, k));
      for (Eigen::Index k = 0; k < data.estimate.cols(); ++k) row.push_back(data.estimate(i, k));
      csv.row(row);
    }
    csv.close();
    outputs.push_back("scatter.csv");
    json fits = json::object();
    for (Eigen::Index k = 0; k < data.truth.cols(); ++k) {
      const LinearFit fit = fit_line(data.truth.col(k), data.estimate.col(k));
      fits[names[static_cast<std::size_t>(k)]] = {
          {"slope", fit.slope}, {"intercept", fit.intercept}, {"r_squared", fit.r_squared}};
    }
    summary["fit"] = fits;
    timer.end();
  } else if (command == "crlb") {
    timer.begin("crlb");
    if (config.mechanism.kind != MechanismKind::weibull)
      throw ConfigError("config.mechanism.kind: crlb is available for weibull only");
    const auto points = require_test_points(config);
    CsvWriter csv(dir / "crlb.csv", command, fingerprint, config);
    csv.header({"eta", "gamma", "N", "crlb_eta", "crlb_gamma"});
    for (const Vector& p : points) {
      const WeibullCrlb bound = weibull_crlb(p[0], p[1], config.mechanism.N);
      csv.row({p[0], p[1], static_cast<double>(config.mechanism.N), bound.eta, bound.gamma});
    }
    csv.close();
    outputs.push_back("crlb.csv");
    timer.end();
  }

  const std::chrono::duration<double> total = std::chrono::steady_clock::now() - started;
  write_manifest(dir, command, fingerprint, config, timer, total.count(), outputs, opts.threads);
  summary["outputs"] = outputs;
  out << summary.dump() << "\n";
  return kOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Minimax two-stage gradient boosting estimator"};
  app.require_subcommand(1);
  Options opts;
  std::string command;
  for (const char* name : {"simulate", "train", "evaluate", "scatter", "crlb"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", opts.config_path, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "override master_seed")
        ->each([&](const std::string&) { opts.seed_set = true; });
    sub->add_option("--threads", opts.threads, "worker threads (results do not depend on it)")
        ->check(CLI::Range(1u, 1024u));
    sub->add_option("--out", opts.out_dir, "output directory (overrides output_dir)");
    if (std::string(name) == "evaluate" || std::string(name) == "scatter")
      sub->add_option("--model", opts.model_path, "estimator file (default <out>/estimator.json)");
    sub->callback([&command, name] { command = name; });
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  StageTimer timer;
  try {
    return dispatch(command, opts, out, err, timer);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const DomainError& e) {
    err << "validation error [" << timer.stage() << "]: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    err << "runtime error [" << timer.stage() << "]: " << e.what() << "\n";
    return kRuntime;
  }
}

}  // namespace tsgbm::cli
