#ifndef RPNBO_ACQUISITION_HPP
#define RPNBO_ACQUISITION_HPP

#include "rpnbo/acqopt.hpp"
#include "rpnbo/common.hpp"
#include "rpnbo/domain.hpp"
#include "rpnbo/surrogate.hpp"

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rpnbo {

enum class AcqFamily { Ei, Lcb, Ts, LwLcb, Clsf, Lcbc, LwLcbc };

std::string family_name(AcqFamily f);
std::optional<AcqFamily> family_from_name(const std::string& name);

struct AcquisitionSpec {
  AcqFamily family = AcqFamily::Lcb;
  double kappa = 2.0;
  int q = 1;
  double epsilon = 1e-3;           // CLSF stabilizer
  double delta = 3.0;              // LCBC shift
  double sigmoid_steepness = 10.0; // smooth feasibility indicator slope
  int n_gmm = 2;                   // likelihood-weight mixture size
  int n_probe = 256;               // probes for the weight model fit

  void validate() const;
  bool likelihood_weighted() const { return family == AcqFamily::LwLcb || family == AcqFamily::LwLcbc; }
  bool constrained() const { return family == AcqFamily::Lcbc || family == AcqFamily::LwLcbc; }
};

/// Partial derivatives of an estimator with respect to its matrix inputs.
/// Callers chain these through the surrogate members; d_mu is reported
/// separately because mu is itself the member average.
struct AcqPartials {
  MatrixXd d_members;                   // N x q
  VectorXd d_mu;                        // q
  VectorXd d_weights;                   // q
  std::vector<MatrixXd> d_constraints;  // per constraint: N x q
};

/// Expected improvement over the incumbent, improvements f_star - xi
/// (minimization convention), max over the batch inside the sample mean.
double eval_ei(const Eigen::Ref<const MatrixXd>& members, double f_star,
               AcqPartials* partials = nullptr);

/// Gaussian-posterior form: samples mu + L*eps with L the (jittered)
/// Cholesky factor of cov; improvements sample - f_star. Validation and
/// GP-style baselines only.
double eval_ei_gaussian(const VectorXd& mu, const MatrixXd& cov, double f_star,
                        const Eigen::Ref<const MatrixXd>& eps_samples);

/// Lower confidence bound with per-point uncertainty weights (all ones for
/// the plain variant); lower values are preferred.
double eval_lcb(const Eigen::Ref<const MatrixXd>& members, const VectorXd& mu,
                const VectorXd& weights, double kappa, AcqPartials* partials = nullptr);

/// Boundary-seeking ratio of weighted spread to |mu|^(1/kappa) + epsilon;
/// higher values are preferred.
double eval_clsf(const Eigen::Ref<const MatrixXd>& members, const VectorXd& mu,
                 const VectorXd& weights, double kappa, double epsilon,
                 AcqPartials* partials = nullptr);

/// Constrained LCB: a delta-shifted weighted LCB factor times one smooth
/// feasibility probability factor per constraint; lower values preferred.
double eval_lcbc(const Eigen::Ref<const MatrixXd>& obj_members, const VectorXd& mu,
                 const VectorXd& weights, const std::vector<MatrixXd>& constraint_members,
                 double kappa, double delta, double steepness, AcqPartials* partials = nullptr);

/// Gaussian mixture model of the likelihood weight w(x) = p_x(x) / p(mu(x)),
/// rescaled so the probe-average weight is one. An empty component list is
/// the degenerate flat model w == 1.
struct WeightModel {
  struct Component {
    double alpha = 0.0;
    VectorXd mean;
    MatrixXd cov;
    MatrixXd cov_inverse;
    double norm_constant = 0.0;  // (2*pi)^(-d/2) * det(cov)^(-1/2)
  };
  std::vector<Component> components;
  double rescale = 1.0;
  int dim = 0;

  bool flat() const { return components.empty(); }
  double operator()(const VectorXd& x) const;
  VectorXd gradient(const VectorXd& x) const;
};

/// Likelihood-weighted LCB: per-point weights come from the model's density
/// at the batch points (rows of X).
double eval_lw_lcb(const Eigen::Ref<const MatrixXd>& members, const VectorXd& mu,
                   const WeightModel& weights, const MatrixXd& X, double kappa,
                   AcqPartials* partials = nullptr);

/// Fits the weight model from n_probe uniform probes: a kernel density
/// (Silverman bandwidth) estimates p(mu) over the probe objective means,
/// probe importances 1/p(mu) feed a weighted EM fit of n_gmm Gaussians
/// (50 iterations, diagonal covariance floor 1e-6, components below weight
/// 1e-8 dropped). Degenerate importance signals fall back to the flat model.
WeightModel fit_weight_model(const std::function<double(const VectorXd&)>& scalar_mean,
                             const BoxDomain& domain, int n_probe, int n_gmm,
                             std::mt19937_64& rng);
/// Convenience overload: scalar mean = ensemble average of reduce(member(x)).
WeightModel fit_weight_model(const Ensemble& ensemble, const ScalarReducer& reduce,
                             const BoxDomain& domain, int n_probe, int n_gmm,
                             std::mt19937_64& rng);

/// Thompson sampling: q distinct members drawn at random, each minimized
/// over the domain with the inner optimizer.
struct ThompsonSelection {
  MatrixXd points;           // q x d minimizers, one per drawn member
  std::vector<int> members;  // which member produced each row
};
ThompsonSelection thompson_select(const Ensemble& ensemble, const ScalarReducer& reduce,
                                  const BoxDomain& domain, int q, const AcqOptConfig& opt,
                                  std::uint64_t seed);

/// A surrogate posterior usable by the scorer: single- or multi-fidelity.
struct SurrogateRef {
  const Ensemble* sf = nullptr;
  const MfEnsemble* mf = nullptr;

  static SurrogateRef single(const Ensemble& e) { return {&e, nullptr}; }
  static SurrogateRef multi(const MfEnsemble& m) { return {nullptr, &m}; }
  int n_members() const;
  int output_dim() const;
  bool same_as(const SurrogateRef& other) const { return sf == other.sf && mf == other.mf; }
};

/// A scalar quantity bound to a surrogate: reduce(member_prediction(x)).
struct BoundQuantity {
  SurrogateRef surrogate;
  ScalarReducer reduce;
};

/// Differentiable batch objective for optimize_batch: evaluates the chosen
/// acquisition on surrogate member predictions and backpropagates through
/// the reducers, networks and weight model. Scores are sign-adjusted so
/// higher is always better; acquisition_value reports the family's native
/// sign. Deterministic given the bound state.
class BatchScorer {
 public:
  BatchScorer(AcquisitionSpec spec, BoundQuantity objective,
              std::vector<BoundQuantity> constraints = {}, const WeightModel* weights = nullptr,
              double f_star = 0.0);

  double score(const MatrixXd& X, MatrixXd* grad = nullptr) const;
  double acquisition_value(const MatrixXd& X) const;
  BatchScoreFn as_score_fn() const;
  /// +1 when the family maximizes its native value, -1 when it minimizes.
  double native_sign() const { return sign_; }

 private:
  AcquisitionSpec spec_;
  BoundQuantity objective_;
  std::vector<BoundQuantity> constraints_;
  const WeightModel* weights_;
  double f_star_;
  double sign_;
};

}  // namespace rpnbo

#endif
