#ifndef RPNBO_ACQOPT_HPP
#define RPNBO_ACQOPT_HPP

#include "rpnbo/common.hpp"
#include "rpnbo/domain.hpp"

#include <cstdint>
#include <functional>

namespace rpnbo {

struct AcqOptConfig {
  int restarts = 16;
  int steps = 200;
  double lr = 1e-2;  // Adam step size in normalized [0,1] coordinates
  int workers = 1;   // restarts may run in parallel; results are identical
};

/// Batch score callable: X is q x d in original units; when grad is non-null
/// it receives dScore/dX of the same shape. Higher scores are better.
using BatchScoreFn = std::function<double(const MatrixXd& X, MatrixXd* grad)>;

struct BatchResult {
  MatrixXd X;  // q x d, every row inside the box
  double score = 0.0;
};

/// Multi-restart projected Adam ascent over the q*d batch coordinates,
/// Latin-hypercube initialized, clipped to the box after every step.
/// Returns the best batch over all restarts and all visited iterates.
/// Restarts that produce a non-finite score or gradient are discarded;
/// if every restart is discarded an OptimizationError is thrown.
BatchResult optimize_batch(const BatchScoreFn& score, const BoxDomain& domain, int q,
                           const AcqOptConfig& config, std::uint64_t seed);

/// Gradient of a batch score; throws OptimizationError naming the first
/// offending point if the gradient is non-finite.
MatrixXd acq_gradient(const BatchScoreFn& score, const MatrixXd& X);

}  // namespace rpnbo

#endif
