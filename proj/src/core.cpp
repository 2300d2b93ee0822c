#include "tsgbm/core.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

namespace tsgbm {

namespace {

bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace

ParameterSpace::ParameterSpace(Vector lo, Vector hi, std::vector<std::string> names)
    : lo_(std::move(lo)), hi_(std::move(hi)), names_(std::move(names)) {
  if (lo_.size() == 0) throw ConfigError("parameter space must have at least one dimension");
  if (lo_.size() != hi_.size()) throw ConfigError("parameter space: lo/hi length mismatch");
  if (!names_.empty() && names_.size() != static_cast<std::size_t>(lo_.size()))
    throw ConfigError("parameter space: names length mismatch");
  if (!all_finite(lo_) || !all_finite(hi_)) throw ConfigError("parameter space: bounds must be finite");
  for (Eigen::Index k = 0; k < lo_.size(); ++k) {
    if (!(lo_[k] < hi_[k]))
      throw ConfigError("parameter space: lo[" + std::to_string(k) + "] must be < hi");
  }
}

bool ParameterSpace::contains(const Eigen::Ref<const Vector>& theta) const {
  if (theta.size() != lo_.size()) return false;
  return (theta.array() >= lo_.array()).all() && (theta.array() <= hi_.array()).all();
}

ParameterVector::ParameterVector(Vector values, std::vector<std::string> names)
    : values_(std::move(values)), names_(std::move(names)) {
  if (values_.size() == 0) throw DomainError("parameter vector must have at least one entry");
  if (!all_finite(values_)) throw DomainError("parameter vector has non-finite entries");
  if (!names_.empty() && names_.size() != static_cast<std::size_t>(values_.size()))
    throw DomainError("parameter vector: names length mismatch");
}

ParameterVector::ParameterVector(Vector values, const ParameterSpace& bounds)
    : ParameterVector(std::move(values), bounds.names()) {
  if (!bounds.contains(values_)) throw DomainError("parameter vector outside its bounds");
}

ObservationSequence::ObservationSequence(Vector samples, std::string mechanism_id)
    : samples_(std::move(samples)), mechanism_id_(std::move(mechanism_id)) {
  if (samples_.size() == 0) throw DomainError("observation sequence is empty");
  if (!all_finite(samples_))
    throw RuntimeError("observation sequence from '" + mechanism_id_ + "' has non-finite entries");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_substream_seed(std::uint64_t master, std::string_view purpose,
                                    std::uint64_t index) {
  // Two rounds keep (purpose, index) pairs from aliasing through a linear
  // combination before the mixer.
  const std::uint64_t tagged = splitmix64(master ^ splitmix64(fnv1a64(purpose)));
  return splitmix64(tagged + splitmix64(index));
}

double RandomStream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_ = r * std::sin(angle);
  has_cached_ = true;
  return r * std::cos(angle);
}

void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body) {
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace tsgbm
