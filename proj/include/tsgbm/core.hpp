#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tsgbm {

// Error hierarchy. Every failure surfaces as one of these so the CLI can map
// them onto exit codes and stage names.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure while running a stage (simulation, fit, evaluation).
class RuntimeError : public Error {
 public:
  using Error::Error;
};

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Box constraints on the parameter space; lo[k] < hi[k], all finite.
class ParameterSpace {
 public:
  ParameterSpace() = default;
  ParameterSpace(Vector lo, Vector hi, std::vector<std::string> names = {});

  Eigen::Index dims() const { return lo_.size(); }
  const Vector& lo() const { return lo_; }
  const Vector& hi() const { return hi_; }
  const std::vector<std::string>& names() const { return names_; }

  bool contains(const Eigen::Ref<const Vector>& theta) const;

 private:
  Vector lo_;
  Vector hi_;
  std::vector<std::string> names_;
};

/// A point theta in the parameter space, with optional per-dimension labels.
class ParameterVector {
 public:
  ParameterVector() = default;
  explicit ParameterVector(Vector values, std::vector<std::string> names = {});
  ParameterVector(Vector values, const ParameterSpace& bounds);

  Eigen::Index dims() const { return values_.size(); }
  const Vector& values() const { return values_; }
  double operator[](Eigen::Index k) const { return values_[k]; }
  const std::vector<std::string>& names() const { return names_; }

 private:
  Vector values_;
  std::vector<std::string> names_;
};

/// Length-N output trajectory of a data-generating mechanism.
class ObservationSequence {
 public:
  ObservationSequence() = default;
  ObservationSequence(Vector samples, std::string mechanism_id);

  Eigen::Index size() const { return samples_.size(); }
  const Vector& samples() const { return samples_; }
  const std::string& mechanism_id() const { return mechanism_id_; }

 private:
  Vector samples_;
  std::string mechanism_id_;
};

// ---------------------------------------------------------------------------
// Seeding
//
// Every random draw in the library comes from a std::mt19937_64 engine whose
// seed is derived by hashing (master seed, purpose tag, index) through the
// SplitMix64 finalizer. Substreams are indexed rather than consumed in
// order, so results do not depend on the execution schedule.

inline constexpr std::string_view kRngAlgorithm =
    "mt19937_64; seeds=splitmix64(master,fnv1a64(purpose),index); "
    "uniform=(u64>>11+0.5)*2^-53; normal=box-muller(pairs)";

namespace purpose {
inline constexpr std::string_view kPrior = "prior";
inline constexpr std::string_view kSimulation = "sim";
inline constexpr std::string_view kEvaluation = "eval";
inline constexpr std::string_view kBagging = "bagging";
inline constexpr std::string_view kTest = "test";
}  // namespace purpose

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);

/// Pure, reentrant substream seed derivation.
std::uint64_t derive_substream_seed(std::uint64_t master, std::string_view purpose,
                                    std::uint64_t index);

/// Engine plus the two transforms every simulator needs.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; draws are produced in pairs.
  double normal();

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// Runs body(i) for i in [0, count) over at most `threads` workers.
/// Each index is processed exactly once; callers write to slot i only.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace tsgbm
