#ifndef RPNBO_ADAM_HPP
#define RPNBO_ADAM_HPP

#include "rpnbo/common.hpp"

#include <vector>

namespace rpnbo {

struct AdamConfig {
  double base_lr = 1e-3;
  double decay = 0.999;  // multiplied in once per 1000 completed steps
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<VectorXd> m;  // first moments, one flat block per parameter block
  std::vector<VectorXd> v;  // second moments
  long step = 0;            // completed steps
  AdamConfig config;
};

AdamState make_adam_state(const std::vector<Eigen::Index>& block_sizes, const AdamConfig& config);

/// base_lr * decay^(step / 1000), integer division: the rate is piecewise
/// constant and drops only when a multiple of 1000 steps has completed.
double effective_lr(const AdamState& state);

/// One Adam update (bias-corrected) over matched parameter/gradient blocks,
/// at the current effective learning rate; increments state.step.
void adam_step(std::vector<Eigen::Map<VectorXd>>& params,
               const std::vector<Eigen::Map<const VectorXd>>& grads, AdamState& state);

}  // namespace rpnbo

#endif
