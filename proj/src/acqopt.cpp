#include "rpnbo/acqopt.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace rpnbo {

namespace {

struct RestartOutcome {
  MatrixXd best_x;
  double best_score = -std::numeric_limits<double>::infinity();
  bool valid = false;
};

MatrixXd to_original(const MatrixXd& Z, const BoxDomain& box) {
  MatrixXd X = Z;
  for (int j = 0; j < X.cols(); ++j)
    X.col(j) = box.lower[j] + X.col(j).array() * (box.upper[j] - box.lower[j]);
  for (int r = 0; r < X.rows(); ++r)
    X.row(r) = box.clamp(X.row(r).transpose()).transpose();
  return X;
}

RestartOutcome run_restart(const BatchScoreFn& score, const BoxDomain& box, int q,
                           const AcqOptConfig& cfg, std::uint64_t restart_seed) {
  const int d = box.dim();
  std::mt19937_64 rng(restart_seed);
  BoxDomain unit{VectorXd::Zero(d), VectorXd::Ones(d)};
  MatrixXd Z = latin_hypercube(unit, q, rng);
  const VectorXd span = box.upper - box.lower;

  // Adam state over the flattened batch.
  MatrixXd m = MatrixXd::Zero(q, d);
  MatrixXd v = MatrixXd::Zero(q, d);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  RestartOutcome out;
  for (int step = 0; step <= cfg.steps; ++step) {
    const MatrixXd X = to_original(Z, box);
    MatrixXd grad(q, d);
    const double s = score(X, &grad);
    if (!std::isfinite(s) || !grad.allFinite()) return {};  // discard this restart
    if (s > out.best_score) {
      out.best_score = s;
      out.best_x = X;
      out.valid = true;
    }
    if (step == cfg.steps) break;
    // Ascent in normalized coordinates; chain rule picks up the box span.
    const MatrixXd g = -(grad.array().rowwise() * span.transpose().array());
    const double t = static_cast<double>(step + 1);
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v.array() + (1.0 - beta2) * g.array().square();
    const MatrixXd m_hat = m / (1.0 - std::pow(beta1, t));
    const MatrixXd v_hat = v / (1.0 - std::pow(beta2, t));
    Z.array() -= cfg.lr * m_hat.array() / (v_hat.array().sqrt() + eps);
    Z = Z.cwiseMax(0.0).cwiseMin(1.0);
  }
  return out;
}

}  // namespace

BatchResult optimize_batch(const BatchScoreFn& score, const BoxDomain& domain, int q,
                           const AcqOptConfig& config, std::uint64_t seed) {
  if (q < 1) throw ConfigError("optimize_batch: q must be at least 1");
  if (config.restarts < 1 || config.steps < 1)
    throw ConfigError("optimize_batch: restarts and steps must be at least 1");
  std::vector<RestartOutcome> outcomes(static_cast<std::size_t>(config.restarts));
  parallel_for(config.restarts, config.workers, [&](int r) {
    outcomes[static_cast<std::size_t>(r)] =
        run_restart(score, domain, q, config, derive_seed(seed, 23, static_cast<std::uint64_t>(r)));
  });
  // Best across restarts; lowest restart index wins ties so parallel and
  // serial execution agree.
  BatchResult best;
  bool found = false;
  for (const RestartOutcome& o : outcomes) {
    if (!o.valid) continue;
    if (!found || o.best_score > best.score) {
      best.X = o.best_x;
      best.score = o.best_score;
      found = true;
    }
  }
  if (!found) throw OptimizationError("optimize_batch: every restart produced non-finite scores");
  return best;
}

MatrixXd acq_gradient(const BatchScoreFn& score, const MatrixXd& X) {
  MatrixXd grad(X.rows(), X.cols());
  score(X, &grad);
  for (int r = 0; r < grad.rows(); ++r)
    if (!grad.row(r).allFinite())
      throw OptimizationError("acq_gradient: non-finite gradient at batch point " + std::to_string(r));
  return grad;
}

}  // namespace rpnbo
