#include "rpnbo/bo.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace rpnbo {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct PointEval {
  VectorXd y;               // objective vector output
  std::vector<VectorXd> h;  // distinct constraint outputs (empty entry when shared)
  VectorXd c;               // observed constraint scalars
  double f = kNaN;
  bool ok = false;
};

PointEval evaluate_point(const Problem& problem, const VectorXd& x, bool low_fidelity) {
  PointEval ev;
  const std::size_t n_con = problem.constraints.size();
  ev.h.resize(n_con);
  ev.c = VectorXd::Constant(static_cast<Eigen::Index>(n_con), kNaN);
  try {
    ev.y = low_fidelity ? problem.low->g(x) : problem.g(x);
    if (!ev.y.allFinite()) return ev;
    ev.f = problem.f.value(ev.y);
    for (std::size_t k = 0; k < n_con; ++k) {
      const Constraint& con = problem.constraints[k];
      const auto& h_fn = low_fidelity ? con.h_low : con.h;
      VectorXd hy;
      if (h_fn) {
        hy = h_fn(x);
        if (!hy.allFinite()) return ev;
        ev.h[k] = hy;
      } else {
        hy = ev.y;  // shared-output constraint
      }
      ev.c[static_cast<Eigen::Index>(k)] = con.c.value(hy);
    }
    if (!std::isfinite(ev.f) || !ev.c.allFinite()) return ev;
    ev.ok = true;
  } catch (const EvaluationError&) {
    ev.ok = false;
  }
  return ev;
}

bool observed_feasible(const PointEval& ev) {
  return ev.ok && (ev.c.size() == 0 || (ev.c.array() >= 0.0).all());
}

struct Incumbent {
  double value = kNaN;
  VectorXd point;

  bool defined() const { return std::isfinite(value); }
  void offer(const PointEval& ev, const VectorXd& x, bool require_feasible) {
    if (!ev.ok) return;
    if (require_feasible && !observed_feasible(ev)) return;
    if (!defined() || ev.f < value) {
      value = ev.f;
      point = x;
    }
  }
};

/// Per-quantity training data at one fidelity level.
struct FidelityData {
  Dataset objective;
  std::vector<Dataset> constraints;  // distinct-h constraints only (parallel to problem list)
};

/// Appends a successful evaluation to each dataset it contributes to.
void absorb(FidelityData& data, const Problem& problem, const VectorXd& x, const PointEval& ev) {
  data.objective.append(x, ev.y);
  data.constraints.resize(problem.constraints.size());
  for (std::size_t k = 0; k < problem.constraints.size(); ++k)
    if (ev.h[k].size() > 0) data.constraints[k].append(x, ev.h[k]);
}

IterationLog log_event(const Problem& problem, int iteration, char fidelity, const MatrixXd& X,
                       const std::vector<PointEval>& evals, const Incumbent& incumbent) {
  IterationLog log;
  log.iteration = iteration;
  log.fidelity = fidelity;
  log.x = X;
  const Eigen::Index n = X.rows();
  const Eigen::Index s =
      fidelity == 'L' && problem.low ? problem.low->output_dim : problem.output_dim;
  log.y = MatrixXd::Constant(n, s, kNaN);
  log.f_values = VectorXd::Constant(n, kNaN);
  log.c_values = MatrixXd::Constant(n, static_cast<Eigen::Index>(problem.constraints.size()), kNaN);
  log.failed.assign(static_cast<std::size_t>(n), 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const PointEval& ev = evals[static_cast<std::size_t>(i)];
    if (!ev.ok) continue;
    log.failed[static_cast<std::size_t>(i)] = 0;
    log.y.row(i) = ev.y.transpose();
    log.f_values[i] = ev.f;
    if (ev.c.size() > 0) log.c_values.row(i) = ev.c.transpose();
  }
  log.best_feasible = incumbent.defined() ? incumbent.value : kNaN;
  return log;
}

void validate_common(const Problem& problem, const BoConfig& config) {
  if (config.n_init < 2) throw ConfigError("bo: n_init must be at least 2");
  if (config.budget < 0) throw ConfigError("bo: budget must be non-negative");
  config.acq.validate();
  if (problem.output_dim <= 0) throw ConfigError("bo: problem output_dim must be positive");
  if (config.ens.arch == Arch::DeepOnet && problem.output_coords.rows() != problem.output_dim)
    throw ConfigError("bo: DeepONet runs need problem output coordinates");
}

/// The scalar ensemble mean of the objective, used by the weight-model fit.
std::function<double(const VectorXd&)> scalar_mean_fn(const Ensemble& e, const ScalarReducer& f) {
  return [&e, &f](const VectorXd& x) {
    const MatrixXd samples = predict_members(e, x);
    double acc = 0.0;
    for (int i = 0; i < samples.rows(); ++i) acc += f.value(samples.row(i).transpose());
    return acc / static_cast<double>(samples.rows());
  };
}

std::function<double(const VectorXd&)> scalar_mean_fn_mf(const MfEnsemble& e,
                                                         const ScalarReducer& f) {
  return [&e, &f](const VectorXd& x) {
    const MatrixXd samples = predict_mf_members(e, x);
    double acc = 0.0;
    for (int i = 0; i < samples.rows(); ++i) acc += f.value(samples.row(i).transpose());
    return acc / static_cast<double>(samples.rows());
  };
}

double best_observed_objective(const std::vector<IterationLog>& logs, char fidelity) {
  double best = kNaN;
  for (const IterationLog& log : logs) {
    if (log.fidelity != fidelity) continue;
    for (Eigen::Index i = 0; i < log.f_values.size(); ++i) {
      const double f = log.f_values[i];
      if (std::isfinite(f) && (!std::isfinite(best) || f < best)) best = f;
    }
  }
  return best;
}

}  // namespace

bool RunRecord::has_incumbent() const {
  return !iterations.empty() && std::isfinite(iterations.back().best_feasible);
}

double RunRecord::final_incumbent() const {
  return iterations.empty() ? kNaN : iterations.back().best_feasible;
}

std::optional<VectorXd> RunRecord::incumbent_point() const {
  if (!has_incumbent()) return std::nullopt;
  const double target = final_incumbent();
  for (const IterationLog& log : iterations)
    for (Eigen::Index i = 0; i < log.f_values.size(); ++i)
      if (log.f_values[i] == target) return VectorXd(log.x.row(i).transpose());
  return std::nullopt;
}

RunRecord run_bo(const Problem& problem, const BoConfig& config) {
  validate_common(problem, config);
  const bool constrained = !problem.constraints.empty() && !config.ignore_constraints;
  if (constrained && !config.acq.constrained() && config.acq.family != AcqFamily::Ts)
    throw ConfigError("bo: constrained problems need the lcbc or lw-lcbc acquisition");
  if (constrained && config.acq.family == AcqFamily::Ts)
    throw ConfigError("bo: Thompson sampling does not support constraints");
  if (!constrained && config.acq.constrained())
    throw ConfigError("bo: " + family_name(config.acq.family) + " needs a constrained problem");

  RunRecord record;
  record.problem_id = problem.id;
  record.seed = config.seed;
  record.n_init = config.n_init;
  record.budget = config.budget;
  record.q = config.acq.q;
  record.acquisition = family_name(config.acq.family);

  const Normalizer domain_norm = Normalizer::from_box(problem.domain);
  Incumbent incumbent;
  FidelityData data;
  data.constraints.resize(problem.constraints.size());

  // Initial design.
  std::mt19937_64 init_rng(derive_seed(config.seed, 0));
  const MatrixXd X0 = latin_hypercube(problem.domain, config.n_init, init_rng);
  std::vector<PointEval> init_evals;
  for (int i = 0; i < X0.rows(); ++i) {
    PointEval ev = evaluate_point(problem, X0.row(i).transpose(), false);
    if (ev.ok) {
      absorb(data, problem, X0.row(i).transpose(), ev);
      ++record.n_evals_h;
      incumbent.offer(ev, X0.row(i).transpose(), constrained);
    }
    init_evals.push_back(std::move(ev));
  }
  record.iterations.push_back(log_event(problem, 0, 'H', X0, init_evals, incumbent));

  if (data.objective.size() < 2) {
    record.status = RunStatus::Aborted;
    return record;
  }

  int consecutive_total_failures = 0;
  for (int t = 1; t <= config.budget; ++t) {
    // Retrain every surrogate from scratch on the data so far.
    const auto t_train = std::chrono::steady_clock::now();
    EnsembleConfig ens_cfg = config.ens;
    ens_cfg.seed = derive_seed(config.seed, 1, static_cast<std::uint64_t>(t));
    const Ensemble objective_ens =
        train_ensemble(data.objective, ens_cfg, domain_norm, problem.output_coords);
    int trained = 1;

    std::vector<Ensemble> constraint_ens;
    std::vector<int> constraint_slot(problem.constraints.size(), -1);
    if (constrained) {
      for (std::size_t k = 0; k < problem.constraints.size(); ++k) {
        if (!problem.constraints[k].h) continue;  // shared output: reuse objective ensemble
        EnsembleConfig c_cfg = config.ens;
        c_cfg.arch = Arch::Mlp;  // constraint outputs carry no coordinate grid
        c_cfg.seed = derive_seed(config.seed, 2,
                                 static_cast<std::uint64_t>(t) * 131 + static_cast<std::uint64_t>(k));
        constraint_slot[k] = static_cast<int>(constraint_ens.size());
        constraint_ens.push_back(train_ensemble(data.constraints[k], c_cfg, domain_norm));
        ++trained;
      }
    }
    const double train_seconds = seconds_since(t_train);
    record.total_ensembles_trained += trained;

    // Acquire q points.
    const auto t_acq = std::chrono::steady_clock::now();
    WeightModel weights;
    if (config.acq.likelihood_weighted()) {
      std::mt19937_64 wm_rng(derive_seed(config.seed, 3, static_cast<std::uint64_t>(t)));
      weights = fit_weight_model(scalar_mean_fn(objective_ens, problem.f), problem.domain,
                                 config.acq.n_probe, config.acq.n_gmm, wm_rng);
    }
    MatrixXd X_next;
    if (config.acq.family == AcqFamily::Ts) {
      X_next = thompson_select(objective_ens, problem.f, problem.domain, config.acq.q, config.opt,
                               derive_seed(config.seed, 4, static_cast<std::uint64_t>(t)))
                   .points;
    } else {
      std::vector<BoundQuantity> bound_constraints;
      if (constrained)
        for (std::size_t k = 0; k < problem.constraints.size(); ++k) {
          const Ensemble& e = constraint_slot[k] >= 0
                                  ? constraint_ens[static_cast<std::size_t>(constraint_slot[k])]
                                  : objective_ens;
          bound_constraints.push_back({SurrogateRef::single(e), problem.constraints[k].c});
        }
      const double f_star = best_observed_objective(record.iterations, 'H');
      const BatchScorer scorer(config.acq, {SurrogateRef::single(objective_ens), problem.f},
                               std::move(bound_constraints),
                               config.acq.likelihood_weighted() ? &weights : nullptr, f_star);
      X_next = optimize_batch(scorer.as_score_fn(), problem.domain, config.acq.q, config.opt,
                              derive_seed(config.seed, 5, static_cast<std::uint64_t>(t)))
                   .X;
    }
    const double acq_seconds = seconds_since(t_acq);

    // Evaluate and absorb.
    std::vector<PointEval> evals;
    int failures = 0;
    for (int i = 0; i < X_next.rows(); ++i) {
      PointEval ev = evaluate_point(problem, X_next.row(i).transpose(), false);
      if (ev.ok) {
        absorb(data, problem, X_next.row(i).transpose(), ev);
        ++record.n_evals_h;
        incumbent.offer(ev, X_next.row(i).transpose(), constrained);
      } else {
        ++failures;
      }
      evals.push_back(std::move(ev));
    }
    IterationLog log = log_event(problem, t, 'H', X_next, evals, incumbent);
    log.ensembles_trained = trained;
    log.train_seconds = train_seconds;
    log.acq_seconds = acq_seconds;
    record.iterations.push_back(std::move(log));

    consecutive_total_failures = (failures == X_next.rows()) ? consecutive_total_failures + 1 : 0;
    if (consecutive_total_failures >= 2) {
      record.status = RunStatus::Aborted;
      return record;
    }
  }

  if (constrained && !incumbent.defined()) record.status = RunStatus::NoFeasibleIncumbent;
  return record;
}

RunRecord run_constrained_mf_bo(const Problem& problem, const BoConfig& config) {
  validate_common(problem, config);
  if (!problem.low) throw ConfigError("mf bo: the problem has no low-fidelity level");
  if (problem.constraints.empty()) throw ConfigError("mf bo: the problem has no constraints");
  if (config.ignore_constraints) throw ConfigError("mf bo: ignore_constraints is not supported here");
  if (!config.acq.constrained())
    throw ConfigError("mf bo: the objective acquisition must be lcbc or lw-lcbc");
  if (config.lf_acq.family != AcqFamily::Clsf)
    throw ConfigError("mf bo: the low-fidelity acquisition must be clsf");
  config.lf_acq.validate();
  for (const char c : config.fidelity_schedule)
    if (c != 'H' && c != 'L') throw ConfigError("mf bo: fidelity schedule may only contain H and L");
  if (config.fidelity_schedule.empty()) throw ConfigError("mf bo: empty fidelity schedule");
  if (config.ens.n_members != config.ens_low.n_members)
    throw ConfigError("mf bo: member counts must match across fidelity levels");
  if (config.ens_low.arch == Arch::DeepOnet &&
      problem.low->output_coords.rows() != problem.low->output_dim)
    throw ConfigError("mf bo: DeepONet low level needs low-fidelity output coordinates");

  RunRecord record;
  record.problem_id = problem.id;
  record.seed = config.seed;
  record.n_init = config.n_init;
  record.budget = config.budget;
  record.q = config.acq.q;
  record.acquisition = family_name(config.acq.family) + "+" + family_name(config.lf_acq.family);

  const Normalizer domain_norm = Normalizer::from_box(problem.domain);
  const int n_init_low = config.n_init_low > 0 ? config.n_init_low : 2 * config.n_init;
  Incumbent incumbent;
  FidelityData high, low;
  high.constraints.resize(problem.constraints.size());
  low.constraints.resize(problem.constraints.size());

  // Initial designs at both fidelity levels.
  {
    std::mt19937_64 rng_h(derive_seed(config.seed, 0));
    const MatrixXd X0 = latin_hypercube(problem.domain, config.n_init, rng_h);
    std::vector<PointEval> evals;
    for (int i = 0; i < X0.rows(); ++i) {
      PointEval ev = evaluate_point(problem, X0.row(i).transpose(), false);
      if (ev.ok) {
        absorb(high, problem, X0.row(i).transpose(), ev);
        ++record.n_evals_h;
        incumbent.offer(ev, X0.row(i).transpose(), true);
      }
      evals.push_back(std::move(ev));
    }
    record.iterations.push_back(log_event(problem, 0, 'H', X0, evals, incumbent));
  }
  {
    std::mt19937_64 rng_l(derive_seed(config.seed, 6));
    const MatrixXd X0 = latin_hypercube(problem.domain, n_init_low, rng_l);
    std::vector<PointEval> evals;
    for (int i = 0; i < X0.rows(); ++i) {
      PointEval ev = evaluate_point(problem, X0.row(i).transpose(), true);
      if (ev.ok) {
        absorb(low, problem, X0.row(i).transpose(), ev);
        ++record.n_evals_l;
      }
      evals.push_back(std::move(ev));
    }
    record.iterations.push_back(log_event(problem, 0, 'L', X0, evals, incumbent));
  }

  if (high.objective.size() < 2 || low.objective.size() < 2) {
    record.status = RunStatus::Aborted;
    return record;
  }

  int consecutive_total_failures = 0;
  for (int t = 1; t <= config.budget; ++t) {
    // One stacked surrogate per quantity, retrained from scratch.
    const auto t_train = std::chrono::steady_clock::now();
    EnsembleConfig low_cfg = config.ens_low;
    low_cfg.seed = derive_seed(config.seed, 7, static_cast<std::uint64_t>(t));
    EnsembleConfig high_cfg = config.ens;
    high_cfg.seed = derive_seed(config.seed, 8, static_cast<std::uint64_t>(t));
    const MfEnsemble objective_mf =
        train_mf(low.objective, high.objective, low_cfg, high_cfg, domain_norm,
                 problem.low->output_coords, problem.output_coords);
    int trained = 2;

    std::vector<MfEnsemble> constraint_mf;
    std::vector<int> constraint_slot(problem.constraints.size(), -1);
    for (std::size_t k = 0; k < problem.constraints.size(); ++k) {
      if (!problem.constraints[k].h) continue;
      EnsembleConfig cl = low_cfg, ch = high_cfg;
      cl.arch = Arch::Mlp;
      ch.arch = Arch::Mlp;
      cl.seed = derive_seed(config.seed, 9,
                            static_cast<std::uint64_t>(t) * 131 + static_cast<std::uint64_t>(k));
      ch.seed = derive_seed(config.seed, 10,
                            static_cast<std::uint64_t>(t) * 131 + static_cast<std::uint64_t>(k));
      constraint_slot[k] = static_cast<int>(constraint_mf.size());
      constraint_mf.push_back(train_mf(low.constraints[k], high.constraints[k], cl, ch, domain_norm));
      trained += 2;
    }
    const double train_seconds = seconds_since(t_train);
    record.total_ensembles_trained += trained;

    int failures_this_iteration = 0;
    int points_this_iteration = 0;
    bool first_event_of_iteration = true;
    for (const char fid : config.fidelity_schedule) {
      const auto t_acq = std::chrono::steady_clock::now();
      MatrixXd X_next;
      if (fid == 'H') {
        WeightModel weights;
        if (config.acq.likelihood_weighted()) {
          std::mt19937_64 wm_rng(derive_seed(config.seed, 11, static_cast<std::uint64_t>(t)));
          weights = fit_weight_model(scalar_mean_fn_mf(objective_mf, problem.f), problem.domain,
                                     config.acq.n_probe, config.acq.n_gmm, wm_rng);
        }
        std::vector<BoundQuantity> bound_constraints;
        for (std::size_t k = 0; k < problem.constraints.size(); ++k) {
          const MfEnsemble& e = constraint_slot[k] >= 0
                                    ? constraint_mf[static_cast<std::size_t>(constraint_slot[k])]
                                    : objective_mf;
          bound_constraints.push_back({SurrogateRef::multi(e), problem.constraints[k].c});
        }
        const BatchScorer scorer(config.acq, {SurrogateRef::multi(objective_mf), problem.f},
                                 std::move(bound_constraints),
                                 config.acq.likelihood_weighted() ? &weights : nullptr, 0.0);
        X_next = optimize_batch(scorer.as_score_fn(), problem.domain, config.acq.q, config.opt,
                                derive_seed(config.seed, 12, static_cast<std::uint64_t>(t)))
                     .X;
      } else {
        // Boundary refinement on the low-fidelity constraint surrogate,
        // cycling through constraints across iterations.
        const std::size_t k = static_cast<std::size_t>((t - 1) % static_cast<int>(problem.constraints.size()));
        const Ensemble& lf_ens = constraint_slot[k] >= 0
                                     ? constraint_mf[static_cast<std::size_t>(constraint_slot[k])].low
                                     : objective_mf.low;
        AcquisitionSpec lf_spec = config.lf_acq;
        const BatchScorer scorer(lf_spec, {SurrogateRef::single(lf_ens), problem.constraints[k].c});
        X_next = optimize_batch(scorer.as_score_fn(), problem.domain, lf_spec.q, config.opt,
                                derive_seed(config.seed, 13, static_cast<std::uint64_t>(t)))
                     .X;
      }
      const double acq_seconds = seconds_since(t_acq);

      std::vector<PointEval> evals;
      for (int i = 0; i < X_next.rows(); ++i) {
        const bool is_low = fid == 'L';
        PointEval ev = evaluate_point(problem, X_next.row(i).transpose(), is_low);
        ++points_this_iteration;
        if (ev.ok) {
          if (is_low) {
            absorb(low, problem, X_next.row(i).transpose(), ev);
            ++record.n_evals_l;
          } else {
            absorb(high, problem, X_next.row(i).transpose(), ev);
            ++record.n_evals_h;
            incumbent.offer(ev, X_next.row(i).transpose(), true);
          }
        } else {
          ++failures_this_iteration;
        }
        evals.push_back(std::move(ev));
      }
      IterationLog log = log_event(problem, t, fid, X_next, evals, incumbent);
      if (first_event_of_iteration) {
        log.ensembles_trained = trained;
        log.train_seconds = train_seconds;
        first_event_of_iteration = false;
      }
      log.acq_seconds = acq_seconds;
      record.iterations.push_back(std::move(log));
    }

    consecutive_total_failures =
        (failures_this_iteration == points_this_iteration) ? consecutive_total_failures + 1 : 0;
    if (consecutive_total_failures >= 2) {
      record.status = RunStatus::Aborted;
      return record;
    }
  }

  if (!incumbent.defined()) record.status = RunStatus::NoFeasibleIncumbent;
  return record;
}

RunRecord run_random_baseline(const Problem& problem, const BoConfig& config) {
  validate_common(problem, config);
  const bool constrained = !problem.constraints.empty() && !config.ignore_constraints;

  RunRecord record;
  record.problem_id = problem.id;
  record.seed = config.seed;
  record.n_init = config.n_init;
  record.budget = config.budget;
  record.q = config.acq.q;
  record.acquisition = "random";

  Incumbent incumbent;
  std::mt19937_64 init_rng(derive_seed(config.seed, 0));
  const MatrixXd X0 = latin_hypercube(problem.domain, config.n_init, init_rng);
  std::vector<PointEval> init_evals;
  for (int i = 0; i < X0.rows(); ++i) {
    PointEval ev = evaluate_point(problem, X0.row(i).transpose(), false);
    if (ev.ok) {
      ++record.n_evals_h;
      incumbent.offer(ev, X0.row(i).transpose(), constrained);
    }
    init_evals.push_back(std::move(ev));
  }
  record.iterations.push_back(log_event(problem, 0, 'H', X0, init_evals, incumbent));

  for (int t = 1; t <= config.budget; ++t) {
    std::mt19937_64 rng(derive_seed(config.seed, 14, static_cast<std::uint64_t>(t)));
    const MatrixXd X = sample_uniform(problem.domain, config.acq.q, rng);
    std::vector<PointEval> evals;
    for (int i = 0; i < X.rows(); ++i) {
      PointEval ev = evaluate_point(problem, X.row(i).transpose(), false);
      if (ev.ok) {
        ++record.n_evals_h;
        incumbent.offer(ev, X.row(i).transpose(), constrained);
      }
      evals.push_back(std::move(ev));
    }
    record.iterations.push_back(log_event(problem, t, 'H', X, evals, incumbent));
  }

  if (constrained && !incumbent.defined()) record.status = RunStatus::NoFeasibleIncumbent;
  return record;
}

}  // namespace rpnbo
