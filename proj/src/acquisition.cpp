#include "rpnbo/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rpnbo {

namespace {

constexpr double kPi = 3.14159265358979323846;

double sgn(double z) { return z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0); }

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_members(const Eigen::Ref<const MatrixXd>& members, const char* who) {
  if (members.rows() == 0 || members.cols() == 0)
    throw DimensionError(std::string(who) + ": empty member matrix");
}

void init_partials(AcqPartials* p, Eigen::Index n, Eigen::Index q, std::size_t n_constraints) {
  if (!p) return;
  p->d_members = MatrixXd::Zero(n, q);
  p->d_mu = VectorXd::Zero(q);
  p->d_weights = VectorXd::Zero(q);
  p->d_constraints.assign(n_constraints, MatrixXd::Zero(n, q));
}

}  // namespace

std::string family_name(AcqFamily f) {
  switch (f) {
    case AcqFamily::Ei: return "ei";
    case AcqFamily::Lcb: return "lcb";
    case AcqFamily::Ts: return "ts";
    case AcqFamily::LwLcb: return "lw-lcb";
    case AcqFamily::Clsf: return "clsf";
    case AcqFamily::Lcbc: return "lcbc";
    case AcqFamily::LwLcbc: return "lw-lcbc";
  }
  return "?";
}

std::optional<AcqFamily> family_from_name(const std::string& name) {
  for (AcqFamily f : {AcqFamily::Ei, AcqFamily::Lcb, AcqFamily::Ts, AcqFamily::LwLcb,
                      AcqFamily::Clsf, AcqFamily::Lcbc, AcqFamily::LwLcbc})
    if (family_name(f) == name) return f;
  return std::nullopt;
}

void AcquisitionSpec::validate() const {
  if (q < 1) throw ConfigError("acquisition: q must be at least 1");
  if (kappa <= 0.0) throw ConfigError("acquisition: kappa must be positive");
  if (epsilon <= 0.0) throw ConfigError("acquisition: epsilon must be positive");
  if (sigmoid_steepness <= 0.0) throw ConfigError("acquisition: sigmoid_steepness must be positive");
  if (n_gmm < 1) throw ConfigError("acquisition: n_gmm must be at least 1");
  if (n_probe < 10 * n_gmm) throw ConfigError("acquisition: n_probe must be at least 10*n_gmm");
}

double eval_ei(const Eigen::Ref<const MatrixXd>& members, double f_star, AcqPartials* partials) {
  check_members(members, "eval_ei");
  const Eigen::Index n = members.rows(), q = members.cols();
  init_partials(partials, n, q, 0);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = 0.0;
    Eigen::Index best_j = -1;
    for (Eigen::Index j = 0; j < q; ++j) {
      const double improvement = f_star - members(i, j);
      if (improvement > best) {  // strict: ties keep the earliest index
        best = improvement;
        best_j = j;
      }
    }
    acc += best;
    if (partials && best_j >= 0) partials->d_members(i, best_j) -= 1.0 / static_cast<double>(n);
  }
  return acc / static_cast<double>(n);
}

double eval_ei_gaussian(const VectorXd& mu, const MatrixXd& cov, double f_star,
                        const Eigen::Ref<const MatrixXd>& eps_samples) {
  const Eigen::Index q = mu.size();
  if (cov.rows() != q || cov.cols() != q)
    throw DimensionError("eval_ei_gaussian: covariance must be q x q");
  check_members(eps_samples, "eval_ei_gaussian");
  if (eps_samples.cols() != q) throw DimensionError("eval_ei_gaussian: eps sample width mismatch");

  MatrixXd L = MatrixXd::Zero(q, q);
  if (cov.norm() > 0.0) {
    Eigen::LLT<MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) {
      L = llt.matrixL();
    } else {
      double jitter = 1e-10;
      bool ok = false;
      for (int attempt = 0; attempt <= 10; ++attempt, jitter *= 2.0) {
        llt.compute(cov + jitter * MatrixXd::Identity(q, q));
        if (llt.info() == Eigen::Success) {
          L = llt.matrixL();
          ok = true;
          break;
        }
      }
      if (!ok)
        throw OptimizationError("eval_ei_gaussian: covariance not factorizable after jitter escalation");
    }
  }

  const Eigen::Index n = eps_samples.rows();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const VectorXd sample = mu + L * eps_samples.row(i).transpose();
    acc += std::max(0.0, (sample.array() - f_star).maxCoeff());
  }
  return acc / static_cast<double>(n);
}

double eval_lcb(const Eigen::Ref<const MatrixXd>& members, const VectorXd& mu,
                const VectorXd& weights, double kappa, AcqPartials* partials) {
  check_members(members, "eval_lcb");
  if (kappa <= 0.0) throw ConfigError("eval_lcb: kappa must be positive");
  const Eigen::Index n = members.rows(), q = members.cols();
  if (mu.size() != q || weights.size() != q)
    throw DimensionError("eval_lcb: mu/weights must have one entry per batch point");
  init_partials(partials, n, q, 0);
  const double spread_scale = std::sqrt(kappa * kPi / 2.0);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index best_j = 0;
    for (Eigen::Index j = 0; j < q; ++j) {
      const double term = mu[j] - spread_scale * weights[j] * std::abs(members(i, j) - mu[j]);
      if (term < best) {
        best = term;
        best_j = j;
      }
    }
    acc += best;
    if (partials) {
      const double s = sgn(members(i, best_j) - mu[best_j]);
      const double inv_n = 1.0 / static_cast<double>(n);
      partials->d_members(i, best_j) -= inv_n * spread_scale * weights[best_j] * s;
      partials->d_mu[best_j] += inv_n * (1.0 + spread_scale * weights[best_j] * s);
      partials->d_weights[best_j] -= inv_n * spread_scale * std::abs(members(i, best_j) - mu[best_j]);
    }
  }
  return acc / static_cast<double>(n);
}

double eval_clsf(const Eigen::Ref<const MatrixXd>& members, const VectorXd& mu,
                 const VectorXd& weights, double kappa, double epsilon, AcqPartials* partials) {
  check_members(members, "eval_clsf");
  if (kappa <= 0.0) throw ConfigError("eval_clsf: kappa must be positive");
  if (epsilon <= 0.0) throw ConfigError("eval_clsf: epsilon must be positive");
  const Eigen::Index n = members.rows(), q = members.cols();
  if (mu.size() != q || weights.size() != q)
    throw DimensionError("eval_clsf: mu/weights must have one entry per batch point");
  init_partials(partials, n, q, 0);
  const double spread_scale = std::sqrt(kPi / 2.0);
  VectorXd denom(q);
  for (Eigen::Index j = 0; j < q; ++j)
    denom[j] = std::pow(std::abs(mu[j]), 1.0 / kappa) + epsilon;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    Eigen::Index best_j = 0;
    for (Eigen::Index j = 0; j < q; ++j) {
      const double term = spread_scale * weights[j] * std::abs(members(i, j) - mu[j]) / denom[j];
      if (term > best) {
        best = term;
        best_j = j;
      }
    }
    acc += best;
    if (partials) {
      const double inv_n = 1.0 / static_cast<double>(n);
      const double dev = members(i, best_j) - mu[best_j];
      const double s = sgn(dev);
      const double a = std::abs(dev);
      const double b = denom[best_j];
      partials->d_members(i, best_j) += inv_n * spread_scale * weights[best_j] * s / b;
      // d(|mu|^(1/kappa))/dmu, taken as 0 at the cusp mu = 0.
      const double abs_mu = std::abs(mu[best_j]);
      const double d_denom =
          abs_mu > 0.0 ? sgn(mu[best_j]) * std::pow(abs_mu, 1.0 / kappa - 1.0) / kappa : 0.0;
      partials->d_mu[best_j] +=
          inv_n * spread_scale * weights[best_j] * (-s / b - a * d_denom / (b * b));
      partials->d_weights[best_j] += inv_n * spread_scale * a / b;
    }
  }
  return acc / static_cast<double>(n);
}

double eval_lcbc(const Eigen::Ref<const MatrixXd>& obj_members, const VectorXd& mu,
                 const VectorXd& weights, const std::vector<MatrixXd>& constraint_members,
                 double kappa, double delta, double steepness, AcqPartials* partials) {
  check_members(obj_members, "eval_lcbc");
  if (constraint_members.empty()) throw ConfigError("eval_lcbc: at least one constraint required");
  if (kappa <= 0.0) throw ConfigError("eval_lcbc: kappa must be positive");
  const Eigen::Index n = obj_members.rows(), q = obj_members.cols();
  if (mu.size() != q || weights.size() != q)
    throw DimensionError("eval_lcbc: mu/weights must have one entry per batch point");
  for (const MatrixXd& cm : constraint_members)
    if (cm.rows() != n || cm.cols() != q)
      throw DimensionError("eval_lcbc: constraint member shape mismatch");
  init_partials(partials, n, q, constraint_members.size());

  // Delta-shifted weighted LCB factor.
  AcqPartials lcb_partials;
  const double lcb =
      eval_lcb(obj_members, mu, weights, kappa, partials ? &lcb_partials : nullptr);
  const double objective_factor = lcb - delta;

  // One smooth feasibility factor per constraint: mean over members of the
  // best (max) sigmoid across the batch.
  const std::size_t n_con = constraint_members.size();
  std::vector<double> feas(n_con, 0.0);
  std::vector<MatrixXd> d_feas;
  if (partials) d_feas.assign(n_con, MatrixXd::Zero(n, q));
  for (std::size_t k = 0; k < n_con; ++k) {
    const MatrixXd& cm = constraint_members[k];
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      Eigen::Index best_j = 0;
      for (Eigen::Index j = 0; j < q; ++j) {
        const double s = sigmoid(steepness * cm(i, j));
        if (s > best) {
          best = s;
          best_j = j;
        }
      }
      acc += best;
      if (partials)
        d_feas[k](i, best_j) = steepness * best * (1.0 - best) / static_cast<double>(n);
    }
    feas[k] = acc / static_cast<double>(n);
  }

  double product = 1.0;
  for (const double p : feas) product *= p;
  const double value = objective_factor * product;

  if (partials) {
    partials->d_members = product * lcb_partials.d_members;
    partials->d_mu = product * lcb_partials.d_mu;
    partials->d_weights = product * lcb_partials.d_weights;
    for (std::size_t k = 0; k < n_con; ++k) {
      double others = objective_factor;
      for (std::size_t l = 0; l < n_con; ++l)
        if (l != k) others *= feas[l];
      partials->d_constraints[k] = others * d_feas[k];
    }
  }
  return value;
}

// ---------------------------------------------------------------------------
// Likelihood weight model.

namespace {

struct GaussianEval {
  double density;
  VectorXd d_x;  // gradient of the density w.r.t. x
};

GaussianEval eval_component(const WeightModel::Component& c, const VectorXd& x, bool want_grad) {
  const VectorXd diff = x - c.mean;
  const VectorXd solved = c.cov_inverse * diff;
  const double density = c.norm_constant * std::exp(-0.5 * diff.dot(solved));
  GaussianEval out{density, VectorXd()};
  if (want_grad) out.d_x = -density * solved;
  return out;
}

}  // namespace

double WeightModel::operator()(const VectorXd& x) const {
  if (flat()) return 1.0;
  double density = 0.0;
  for (const Component& c : components) density += c.alpha * eval_component(c, x, false).density;
  return rescale * density;
}

VectorXd WeightModel::gradient(const VectorXd& x) const {
  if (flat()) return VectorXd::Zero(dim == 0 ? x.size() : dim);
  VectorXd g = VectorXd::Zero(x.size());
  for (const Component& c : components) g += c.alpha * eval_component(c, x, true).d_x;
  return rescale * g;
}

double eval_lw_lcb(const Eigen::Ref<const MatrixXd>& members, const VectorXd& mu,
                   const WeightModel& weights, const MatrixXd& X, double kappa,
                   AcqPartials* partials) {
  if (X.rows() != members.cols())
    throw DimensionError("eval_lw_lcb: X needs one row per batch point");
  VectorXd w(X.rows());
  for (Eigen::Index j = 0; j < X.rows(); ++j) w[j] = weights(X.row(j).transpose());
  return eval_lcb(members, mu, w, kappa, partials);
}

namespace {

double mixture_density(const std::vector<WeightModel::Component>& comps, const VectorXd& x) {
  double d = 0.0;
  for (const auto& c : comps) d += c.alpha * eval_component(c, x, false).density;
  return d;
}

void finalize_component(WeightModel::Component& c) {
  const Eigen::Index d = c.mean.size();
  Eigen::LLT<MatrixXd> llt(c.cov);
  if (llt.info() != Eigen::Success) {
    // The covariance floor keeps this path rare; escalate the floor if hit.
    c.cov += 1e-6 * MatrixXd::Identity(d, d);
    llt.compute(c.cov);
    if (llt.info() != Eigen::Success)
      throw TrainingError("fit_weight_model: degenerate mixture covariance");
  }
  c.cov_inverse = llt.solve(MatrixXd::Identity(d, d));
  const double log_det = 2.0 * MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  c.norm_constant = std::exp(-0.5 * (d * std::log(2.0 * kPi) + log_det));
}

/// Gaussian KDE with Silverman's bandwidth; returns the density at each
/// sample point, or nothing if the sample spread is degenerate.
std::optional<VectorXd> kde_self_density(const VectorXd& values) {
  const Eigen::Index n = values.size();
  const double mean = values.mean();
  const double sd = std::sqrt((values.array() - mean).square().mean());
  VectorXd sorted = values;
  std::sort(sorted.data(), sorted.data() + n);
  const auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(n - 1);
    const Eigen::Index lo = static_cast<Eigen::Index>(std::floor(pos));
    const Eigen::Index hi = std::min(lo + 1, n - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  const double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  if (!(h > 0.0) || h < 1e-12 * std::max(1.0, std::abs(mean))) return std::nullopt;
  VectorXd density(n);
  const double norm = 1.0 / (static_cast<double>(n) * h * std::sqrt(2.0 * kPi));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto z = (values.array() - values[i]) / h;
    density[i] = norm * (-0.5 * z.square()).exp().sum();
  }
  return density;
}

}  // namespace

WeightModel fit_weight_model(const std::function<double(const VectorXd&)>& scalar_mean,
                             const BoxDomain& domain, int n_probe, int n_gmm,
                             std::mt19937_64& rng) {
  if (n_probe < 10 * n_gmm)
    throw ConfigError("fit_weight_model: n_probe must be at least 10*n_gmm");
  const int d = domain.dim();
  WeightModel model;
  model.dim = d;

  const MatrixXd probes = sample_uniform(domain, n_probe, rng);
  VectorXd mu(n_probe);
  for (int r = 0; r < n_probe; ++r) mu[r] = scalar_mean(probes.row(r).transpose());

  const auto output_density = kde_self_density(mu);
  if (!output_density) return model;  // constant outputs: flat weights

  // Uniform p_x is constant over the box, so importances reduce to 1/p(mu).
  VectorXd importance = output_density->cwiseInverse();
  if (!importance.allFinite()) return model;
  importance /= importance.sum();
  const double ratio = importance.maxCoeff() / importance.minCoeff();
  if (ratio < 1.05) return model;  // no usable output-density signal

  // Weighted EM.
  std::vector<WeightModel::Component> comps;
  {
    // Initial means: weighted draws without replacement.
    VectorXd pool = importance;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<int> chosen;
    for (int k = 0; k < n_gmm; ++k) {
      const double total = pool.sum();
      double target = unit(rng) * total;
      int pick = 0;
      for (int r = 0; r < n_probe; ++r) {
        target -= pool[r];
        if (target <= 0.0) {
          pick = r;
          break;
        }
      }
      chosen.push_back(pick);
      pool[pick] = 0.0;
    }
    const VectorXd w_mean = importance.transpose() * probes;
    MatrixXd w_cov = MatrixXd::Zero(d, d);
    for (int r = 0; r < n_probe; ++r) {
      const VectorXd diff = probes.row(r).transpose() - w_mean;
      w_cov += importance[r] * diff * diff.transpose();
    }
    w_cov += 1e-6 * MatrixXd::Identity(d, d);
    for (int k = 0; k < n_gmm; ++k) {
      WeightModel::Component c;
      c.alpha = 1.0 / n_gmm;
      c.mean = probes.row(chosen[static_cast<std::size_t>(k)]).transpose();
      c.cov = w_cov;
      finalize_component(c);
      comps.push_back(std::move(c));
    }
  }

  for (int iter = 0; iter < 50; ++iter) {
    const int k_active = static_cast<int>(comps.size());
    MatrixXd resp(n_probe, k_active);
    for (int r = 0; r < n_probe; ++r) {
      double total = 0.0;
      for (int k = 0; k < k_active; ++k) {
        const double pd =
            comps[static_cast<std::size_t>(k)].alpha *
            eval_component(comps[static_cast<std::size_t>(k)], probes.row(r).transpose(), false).density;
        resp(r, k) = pd;
        total += pd;
      }
      if (total > 0.0)
        resp.row(r) /= total;
      else
        resp.row(r).setConstant(1.0 / k_active);
    }
    std::vector<WeightModel::Component> next;
    for (int k = 0; k < k_active; ++k) {
      const VectorXd rk = resp.col(k).cwiseProduct(importance);
      const double alpha = rk.sum();
      if (alpha < 1e-8) continue;  // collapsed component: drop and renormalize below
      WeightModel::Component c;
      c.alpha = alpha;
      c.mean = (rk.transpose() * probes).transpose() / alpha;
      MatrixXd cov = MatrixXd::Zero(d, d);
      for (int r = 0; r < n_probe; ++r) {
        const VectorXd diff = probes.row(r).transpose() - c.mean;
        cov += rk[r] * diff * diff.transpose();
      }
      c.cov = cov / alpha + 1e-6 * MatrixXd::Identity(d, d);
      finalize_component(c);
      next.push_back(std::move(c));
    }
    if (next.empty()) return model;  // total collapse: flat weights
    double alpha_sum = 0.0;
    for (const auto& c : next) alpha_sum += c.alpha;
    for (auto& c : next) c.alpha /= alpha_sum;
    comps = std::move(next);
  }

  double probe_mean = 0.0;
  for (int r = 0; r < n_probe; ++r) probe_mean += mixture_density(comps, probes.row(r).transpose());
  probe_mean /= n_probe;
  if (!(probe_mean > 0.0)) return model;

  model.components = std::move(comps);
  model.rescale = 1.0 / probe_mean;
  return model;
}

WeightModel fit_weight_model(const Ensemble& ensemble, const ScalarReducer& reduce,
                             const BoxDomain& domain, int n_probe, int n_gmm,
                             std::mt19937_64& rng) {
  const auto scalar_mean = [&](const VectorXd& x) {
    const MatrixXd samples = predict_members(ensemble, x);
    double acc = 0.0;
    for (int i = 0; i < samples.rows(); ++i) acc += reduce.value(samples.row(i).transpose());
    return acc / static_cast<double>(samples.rows());
  };
  return fit_weight_model(scalar_mean, domain, n_probe, n_gmm, rng);
}

ThompsonSelection thompson_select(const Ensemble& ensemble, const ScalarReducer& reduce,
                                  const BoxDomain& domain, int q, const AcqOptConfig& opt,
                                  std::uint64_t seed) {
  const int n = ensemble.n_members();
  if (q < 1) throw ConfigError("thompson_select: q must be at least 1");
  if (q > n) throw ConfigError("thompson_select: q exceeds the ensemble size");
  std::mt19937_64 rng(derive_seed(seed, 29));
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < q; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }

  ThompsonSelection selection;
  selection.points.resize(q, domain.dim());
  for (int slot = 0; slot < q; ++slot) {
    const int member = idx[static_cast<std::size_t>(slot)];
    selection.members.push_back(member);
    const BatchScoreFn fn = [&, member](const MatrixXd& X, MatrixXd* grad) {
      MemberBatchCache cache;
      const MatrixXd Y = predict_member_rows(ensemble, member, X, grad ? &cache : nullptr);
      const double value = reduce.value(Y.row(0).transpose());
      if (grad) {
        MatrixXd upstream(1, Y.cols());
        upstream.row(0) = -reduce.grad(Y.row(0).transpose()).transpose();
        *grad = member_input_gradient_rows(ensemble, member, cache, upstream);
      }
      return -value;  // the optimizer maximizes; we want the member's minimum
    };
    const BatchResult res =
        optimize_batch(fn, domain, 1, opt, derive_seed(seed, 31, static_cast<std::uint64_t>(slot)));
    selection.points.row(slot) = res.X.row(0);
  }
  return selection;
}

// ---------------------------------------------------------------------------
// BatchScorer.

namespace {

int surrogate_members(const SurrogateRef& s) {
  return s.sf ? s.sf->n_members() : s.mf->n_members();
}

}  // namespace

int SurrogateRef::n_members() const { return surrogate_members(*this); }

int SurrogateRef::output_dim() const { return sf ? sf->output_dim : mf->high.output_dim; }

BatchScorer::BatchScorer(AcquisitionSpec spec, BoundQuantity objective,
                         std::vector<BoundQuantity> constraints, const WeightModel* weights,
                         double f_star)
    : spec_(spec),
      objective_(std::move(objective)),
      constraints_(std::move(constraints)),
      weights_(weights),
      f_star_(f_star) {
  spec_.validate();
  if (!objective_.surrogate.sf && !objective_.surrogate.mf)
    throw ConfigError("BatchScorer: objective surrogate missing");
  if (spec_.family == AcqFamily::Ts)
    throw ConfigError("BatchScorer: Thompson sampling uses thompson_select, not a batch score");
  if (spec_.constrained() && constraints_.empty())
    throw ConfigError("BatchScorer: constrained acquisition needs constraint surrogates");
  if (!spec_.constrained() && !constraints_.empty())
    throw ConfigError("BatchScorer: unconstrained acquisition given constraint surrogates");
  if (spec_.likelihood_weighted() && weights_ == nullptr)
    throw ConfigError("BatchScorer: likelihood-weighted acquisition needs a weight model");
  switch (spec_.family) {
    case AcqFamily::Ei:
    case AcqFamily::Clsf:
      sign_ = 1.0;
      break;
    default:
      sign_ = -1.0;  // LCB-type values are minimized
  }
}

namespace {

struct MemberEval {
  MatrixXd y;  // q x s
  MemberBatchCache sf_cache;
  std::vector<MfMemberCache> mf_caches;
};

MemberEval evaluate_member(const SurrogateRef& s, int i, const MatrixXd& X, bool want_cache) {
  MemberEval out;
  if (s.sf) {
    out.y = predict_member_rows(*s.sf, i, X, want_cache ? &out.sf_cache : nullptr);
    return out;
  }
  const Eigen::Index q = X.rows();
  out.y.resize(q, s.mf->high.output_dim);
  if (want_cache) out.mf_caches.resize(static_cast<std::size_t>(q));
  for (Eigen::Index j = 0; j < q; ++j)
    out.y.row(j) = predict_mf_member(*s.mf, i, X.row(j).transpose(),
                                     want_cache ? &out.mf_caches[static_cast<std::size_t>(j)] : nullptr)
                       .transpose();
  return out;
}

MatrixXd member_grad(const SurrogateRef& s, int i, const MemberEval& ev, const MatrixXd& upstream) {
  if (s.sf) return member_input_gradient_rows(*s.sf, i, ev.sf_cache, upstream);
  MatrixXd g(upstream.rows(), s.mf->low.input_dim);
  for (Eigen::Index j = 0; j < upstream.rows(); ++j)
    g.row(j) = mf_member_input_gradient(*s.mf, i, ev.mf_caches[static_cast<std::size_t>(j)],
                                        upstream.row(j).transpose())
                   .transpose();
  return g;
}

}  // namespace

double BatchScorer::score(const MatrixXd& X, MatrixXd* grad) const {
  const Eigen::Index q = X.rows();
  if (q < 1) throw DimensionError("BatchScorer: empty batch");
  const int n = objective_.surrogate.n_members();
  const bool want_grad = grad != nullptr;

  // Unique surrogates, evaluated once per member even when shared between
  // the objective and constraints.
  std::vector<SurrogateRef> unique_refs{objective_.surrogate};
  std::vector<std::size_t> constraint_slot(constraints_.size());
  for (std::size_t k = 0; k < constraints_.size(); ++k) {
    const SurrogateRef& s = constraints_[k].surrogate;
    if (s.n_members() != n)
      throw DimensionError("BatchScorer: member counts differ across surrogates");
    std::size_t slot = unique_refs.size();
    for (std::size_t u = 0; u < unique_refs.size(); ++u)
      if (unique_refs[u].same_as(s)) {
        slot = u;
        break;
      }
    if (slot == unique_refs.size()) unique_refs.push_back(s);
    constraint_slot[k] = slot;
  }

  std::vector<std::vector<MemberEval>> evals(unique_refs.size());
  for (std::size_t u = 0; u < unique_refs.size(); ++u) {
    evals[u].reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      evals[u].push_back(evaluate_member(unique_refs[u], i, X, want_grad));
  }

  MatrixXd obj_scalars(n, q);
  for (int i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < q; ++j)
      obj_scalars(i, j) = objective_.reduce.value(evals[0][static_cast<std::size_t>(i)].y.row(j).transpose());
  const VectorXd mu = obj_scalars.colwise().mean();

  VectorXd w = VectorXd::Ones(q);
  if (spec_.likelihood_weighted())
    for (Eigen::Index j = 0; j < q; ++j) w[j] = (*weights_)(X.row(j).transpose());

  std::vector<MatrixXd> con_scalars;
  for (std::size_t k = 0; k < constraints_.size(); ++k) {
    MatrixXd cm(n, q);
    for (int i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < q; ++j)
        cm(i, j) = constraints_[k].reduce.value(
            evals[constraint_slot[k]][static_cast<std::size_t>(i)].y.row(j).transpose());
    con_scalars.push_back(std::move(cm));
  }

  AcqPartials partials;
  AcqPartials* p = want_grad ? &partials : nullptr;
  double value = 0.0;
  switch (spec_.family) {
    case AcqFamily::Ei:
      value = eval_ei(obj_scalars, f_star_, p);
      break;
    case AcqFamily::Lcb:
    case AcqFamily::LwLcb:
      value = eval_lcb(obj_scalars, mu, w, spec_.kappa, p);
      break;
    case AcqFamily::Clsf:
      value = eval_clsf(obj_scalars, mu, w, spec_.kappa, spec_.epsilon, p);
      break;
    case AcqFamily::Lcbc:
    case AcqFamily::LwLcbc:
      value = eval_lcbc(obj_scalars, mu, w, con_scalars, spec_.kappa, spec_.delta,
                        spec_.sigmoid_steepness, p);
      break;
    case AcqFamily::Ts:
      throw ConfigError("BatchScorer: unreachable family");
  }

  if (want_grad) {
    grad->setZero(q, X.cols());
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t u = 0; u < unique_refs.size(); ++u) {
      for (int i = 0; i < n; ++i) {
        const MemberEval& ev = evals[u][static_cast<std::size_t>(i)];
        MatrixXd upstream = MatrixXd::Zero(q, ev.y.cols());
        bool any = false;
        for (Eigen::Index j = 0; j < q; ++j) {
          double coef = 0.0;
          if (u == 0) coef += partials.d_members(i, j) + partials.d_mu[j] * inv_n;
          if (u == 0 && coef != 0.0) {
            upstream.row(j) += coef * objective_.reduce.grad(ev.y.row(j).transpose()).transpose();
            any = true;
          }
          for (std::size_t k = 0; k < constraints_.size(); ++k) {
            if (constraint_slot[k] != u) continue;
            const double ck = partials.d_constraints[k](i, j);
            if (ck != 0.0) {
              upstream.row(j) += ck * constraints_[k].reduce.grad(ev.y.row(j).transpose()).transpose();
              any = true;
            }
          }
        }
        if (any) *grad += member_grad(unique_refs[u], i, ev, upstream);
      }
    }
    if (spec_.likelihood_weighted() && !weights_->flat())
      for (Eigen::Index j = 0; j < q; ++j)
        grad->row(j) += partials.d_weights[j] * weights_->gradient(X.row(j).transpose()).transpose();
    *grad *= sign_;
  }
  return sign_ * value;
}

double BatchScorer::acquisition_value(const MatrixXd& X) const {
  return sign_ * score(X, nullptr);
}

BatchScoreFn BatchScorer::as_score_fn() const {
  return [this](const MatrixXd& X, MatrixXd* grad) { return score(X, grad); };
}

}  // namespace rpnbo
