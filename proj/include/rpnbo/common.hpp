#ifndef RPNBO_COMMON_HPP
#define RPNBO_COMMON_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace rpnbo {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

struct TrainingError : std::runtime_error {
  explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown by black-box problem evaluations that fail (e.g. solver blowup).
struct EvaluationError : std::runtime_error {
  explicit EvaluationError(const std::string& what) : std::runtime_error(what) {}
};

struct OptimizationError : std::runtime_error {
  explicit OptimizationError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct SerializationError : std::runtime_error {
  explicit SerializationError(const std::string& what) : std::runtime_error(what) {}
};

/// Stable stream splitter: maps (seed, a, b) to an independent 64-bit seed.
/// Every source of randomness in the library derives its own seed through
/// this, so runs are reproducible regardless of execution order.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Worker count used when a config asks for the default pool size:
/// RPNBO_WORKERS if set, otherwise std::thread::hardware_concurrency().
int default_worker_count();

/// Runs fn(0..n-1) on `workers` threads. workers <= 1 runs serially.
/// Iterations must be independent; the first exception thrown by any
/// iteration is rethrown in the caller after all threads join.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

/// A known scalar map over a vector quantity, with its gradient. Problems
/// use these for the objective reducer f(y) and constraint reducers c_k(y).
struct ScalarReducer {
  std::function<double(const VectorXd&)> value;
  std::function<VectorXd(const VectorXd&)> grad;
};

bool all_finite(const Eigen::Ref<const MatrixXd>& m);

}  // namespace rpnbo

#endif
