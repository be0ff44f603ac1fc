#ifndef RPNBO_BO_HPP
#define RPNBO_BO_HPP

#include "rpnbo/acqopt.hpp"
#include "rpnbo/acquisition.hpp"
#include "rpnbo/common.hpp"
#include "rpnbo/domain.hpp"
#include "rpnbo/surrogate.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rpnbo {

/// Black-box constraint c(h(x)) >= 0. An empty h means the constraint
/// reducer applies to the objective's own vector output (shared-output
/// problems train a single ensemble per fidelity for everything).
struct Constraint {
  std::function<VectorXd(const VectorXd&)> h;      // empty -> shares objective output
  std::function<VectorXd(const VectorXd&)> h_low;  // low-fidelity variant, empty -> shares
  int h_dim = 0;                                   // output dim of h when distinct
  int h_low_dim = 0;
  ScalarReducer c;
};

struct LowFidelity {
  std::function<VectorXd(const VectorXd&)> g;
  int output_dim = 0;
  MatrixXd output_coords;  // optional, one row per output index
};

/// A black-box optimization problem: minimize f(g(x)) over the box, subject
/// to c_k(h_k(x)) >= 0.
struct Problem {
  std::string id;
  BoxDomain domain;
  std::function<VectorXd(const VectorXd&)> g;
  int output_dim = 0;
  ScalarReducer f;
  std::vector<Constraint> constraints;
  std::optional<LowFidelity> low;
  MatrixXd output_coords;  // optional, one row per output index
};

struct BoConfig {
  int n_init = 5;
  int n_init_low = 0;  // multi-fidelity only; 0 -> 2*n_init
  int budget = 30;
  AcquisitionSpec acq;
  AcquisitionSpec lf_acq;  // low-fidelity exploration (CLSF), multi-fidelity runs
  EnsembleConfig ens;
  EnsembleConfig ens_low;  // multi-fidelity low level
  AcqOptConfig opt;
  std::string fidelity_schedule = "HL";
  std::uint64_t seed = 0;
  /// Diagnostic: run the problem as if unconstrained (acquisition ignores
  /// constraints and the incumbent is the best observed objective); the
  /// constraint observations are still recorded.
  bool ignore_constraints = false;

  BoConfig() {
    lf_acq.family = AcqFamily::Clsf;
    lf_acq.kappa = 1.0;
  }
};

enum class RunStatus { Success = 0, ConfigInvalid = 2, Aborted = 3, NoFeasibleIncumbent = 4 };

/// One evaluation event: the initial design, a high-fidelity acquisition,
/// or a low-fidelity acquisition.
struct IterationLog {
  int iteration = 0;  // 0 is the initial design
  char fidelity = 'H';
  MatrixXd x;             // evaluated points, one per row
  MatrixXd y;             // raw outputs (NaN rows for failed evaluations)
  VectorXd f_values;      // scalar objective per point (NaN for failed)
  MatrixXd c_values;      // observed constraint values per point (n x K)
  std::vector<std::uint8_t> failed;
  double best_feasible = std::numeric_limits<double>::quiet_NaN();
  int ensembles_trained = 0;  // ensembles trained for this event
  double train_seconds = 0.0;
  double acq_seconds = 0.0;
};

struct RunRecord {
  std::string problem_id;
  std::uint64_t seed = 0;
  std::string config_hash;  // filled by the experiment driver
  int n_init = 0;
  int budget = 0;
  int q = 1;
  std::string acquisition;
  std::vector<IterationLog> iterations;
  int total_ensembles_trained = 0;
  int n_evals_h = 0;  // successful high-fidelity evaluations
  int n_evals_l = 0;
  RunStatus status = RunStatus::Success;

  bool has_incumbent() const;
  double final_incumbent() const;
  /// Input point achieving the final incumbent, if any.
  std::optional<VectorXd> incumbent_point() const;
};

/// Single-fidelity loop (constrained or not): retrains the ensemble(s) from
/// scratch every iteration, optimizes the acquisition for q points,
/// evaluates the black box, and tracks the best observed-feasible objective.
RunRecord run_bo(const Problem& problem, const BoConfig& config);

/// Constrained multi-fidelity loop: per iteration, the fidelity schedule
/// acquires high-fidelity points by the constrained acquisition on the
/// stacked surrogate and low-fidelity points by CLSF boundary refinement on
/// the low-fidelity constraint surrogate. The incumbent uses high-fidelity
/// observations only.
RunRecord run_constrained_mf_bo(const Problem& problem, const BoConfig& config);

/// Uniform-random baseline with the same evaluation budget and record format.
RunRecord run_random_baseline(const Problem& problem, const BoConfig& config);

}  // namespace rpnbo

#endif
