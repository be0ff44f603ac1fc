#include "rpnbo/adam.hpp"

#include <cmath>

namespace rpnbo {

AdamState make_adam_state(const std::vector<Eigen::Index>& block_sizes, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  for (const Eigen::Index n : block_sizes) {
    state.m.push_back(VectorXd::Zero(n));
    state.v.push_back(VectorXd::Zero(n));
  }
  return state;
}

double effective_lr(const AdamState& state) {
  return state.config.base_lr * std::pow(state.config.decay, static_cast<double>(state.step / 1000));
}

void adam_step(std::vector<Eigen::Map<VectorXd>>& params,
               const std::vector<Eigen::Map<const VectorXd>>& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw DimensionError("adam_step: block count mismatch");
  const AdamConfig& c = state.config;
  const double lr = effective_lr(state);
  const double t = static_cast<double>(state.step + 1);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size() || params[b].size() != state.m[b].size())
      throw DimensionError("adam_step: block size mismatch");
    if (!grads[b].allFinite()) throw TrainingError("adam_step: non-finite gradient");
    auto& m = state.m[b];
    auto& v = state.v[b];
    m = c.beta1 * m + (1.0 - c.beta1) * grads[b];
    v = c.beta2 * v.array() + (1.0 - c.beta2) * grads[b].array().square();
    params[b].array() -=
        lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + c.eps);
  }
  ++state.step;
}

}  // namespace rpnbo
