#include "rpnbo/acquisition.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace rpnbo;
using namespace rpnbo::testing;

namespace {

constexpr double kPi = 3.14159265358979323846;

MatrixXd standard_normals(Eigen::Index n, Eigen::Index q, std::uint64_t seed) {
  auto rng = make_rng(seed);
  return random_matrix(n, q, rng);
}

VectorXd col_means(const MatrixXd& m) { return m.colwise().mean(); }

/// Analytic expected improvement for minimizing with samples N(m, s^2):
/// E[max(f_star - xi, 0)].
double gaussian_ei(double m, double s, double f_star) {
  const double z = (f_star - m) / s;
  const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi);
  const double Phi = 0.5 * std::erfc(-z / std::sqrt(2.0));
  return (f_star - m) * Phi + s * phi;
}

}  // namespace

TEST_CASE("ei: no improvement anywhere gives zero") {
  const MatrixXd members = MatrixXd::Constant(8, 3, 1.25);
  CHECK(eval_ei(members, 1.25) == 0.0);
}

TEST_CASE("ei: brute-force check on a 2x2 improvement table") {
  // f_star = 2 turns these into improvements {{0,1},{2,0}}.
  MatrixXd members(2, 2);
  members << 2.0, 1.0, 0.0, 2.0;
  CHECK(eval_ei(members, 2.0) == doctest::Approx(1.5).epsilon(1e-14));
}

TEST_CASE("ei: recovers the analytic Gaussian value") {
  const MatrixXd members = standard_normals(100000, 1, 21);
  const double mc = eval_ei(members, 0.0);
  const double exact = gaussian_ei(0.0, 1.0, 0.0);  // 1/sqrt(2*pi) = 0.39894
  CHECK(std::abs(mc - exact) / exact < 0.02);
}

TEST_CASE("ei: empty member matrix raises") {
  CHECK_THROWS_AS(eval_ei(MatrixXd(), 0.0), DimensionError);
}

TEST_CASE("ei gaussian: zero covariance reduces exactly to the deterministic value") {
  VectorXd mu(3);
  mu << 0.3, 1.2, -0.4;
  const MatrixXd eps = standard_normals(50, 3, 22);
  const double v = eval_ei_gaussian(mu, MatrixXd::Zero(3, 3), 0.5, eps);
  CHECK(v == doctest::Approx(0.7).epsilon(1e-14));  // max_j max(mu_j - 0.5, 0)
}

TEST_CASE("ei gaussian: recovers the analytic value for a unit normal") {
  const VectorXd mu = VectorXd::Zero(1);
  const MatrixXd cov = MatrixXd::Identity(1, 1);
  const MatrixXd eps = standard_normals(100000, 1, 23);
  const double v = eval_ei_gaussian(mu, cov, 0.0, eps);
  CHECK(std::abs(v - 0.39894) / 0.39894 < 0.02);
}

TEST_CASE("ei gaussian: agrees with the ensemble form on synthetic Gaussian members") {
  auto rng = make_rng(24);
  for (int q = 1; q <= 3; ++q) {
    const VectorXd mu = random_vector(q, rng);
    MatrixXd a = random_matrix(q, q, rng);
    const MatrixXd cov = a * a.transpose() + 0.1 * MatrixXd::Identity(q, q);
    const Eigen::LLT<MatrixXd> llt(cov);
    const MatrixXd L = llt.matrixL();
    const MatrixXd eps = standard_normals(20000, q, 25 + static_cast<std::uint64_t>(q));
    // Members mu + L*eps feed the ensemble estimator; the Gaussian form with
    // the mirrored mean, incumbent and noise evaluates the same improvements.
    MatrixXd members(eps.rows(), q);
    for (Eigen::Index i = 0; i < eps.rows(); ++i)
      members.row(i) = (mu + L * eps.row(i).transpose()).transpose();
    const double f_star = mu.mean();
    const double from_members = eval_ei(members, f_star);
    const double from_gaussian = eval_ei_gaussian(-mu, cov, -f_star, -eps);
    CHECK(std::abs(from_members - from_gaussian) < 1e-12);
  }
}

TEST_CASE("ei gaussian: non-factorizable covariance raises after jitter escalation") {
  MatrixXd cov(2, 2);
  cov << 1.0, 0.0, 0.0, -5.0;  // indefinite
  const MatrixXd eps = standard_normals(10, 2, 26);
  CHECK_THROWS_AS(eval_ei_gaussian(VectorXd::Zero(2), cov, 0.0, eps), OptimizationError);
}

TEST_CASE("lcb: zero spread reduces to the smallest mean") {
  VectorXd mu(3);
  mu << 0.7, -0.2, 1.4;
  MatrixXd members(5, 3);
  for (int i = 0; i < 5; ++i) members.row(i) = mu.transpose();
  CHECK(eval_lcb(members, mu, VectorXd::Ones(3), 2.0) == doctest::Approx(-0.2).epsilon(1e-14));
}

TEST_CASE("lcb: half-normal identity recovers mu - sqrt(kappa)*sigma") {
  const double m = 0.8, s = 1.7;
  const MatrixXd members = m + s * standard_normals(100000, 1, 27).array();
  const VectorXd mu = col_means(members);
  for (const double kappa : {1.0, 2.0}) {
    const double v = eval_lcb(members, mu, VectorXd::Ones(1), kappa);
    const double expected = m - std::sqrt(kappa) * s;
    CHECK(std::abs(v - expected) / std::abs(expected) < 0.02);
  }
}

TEST_CASE("lcb: kappa must be positive") {
  const MatrixXd members = MatrixXd::Zero(2, 1);
  CHECK_THROWS_AS(eval_lcb(members, VectorXd::Zero(1), VectorXd::Ones(1), 0.0), ConfigError);
}

TEST_CASE("lw-lcb: a flat weight model reduces exactly to lcb") {
  auto rng = make_rng(28);
  const MatrixXd members = random_matrix(32, 4, rng);
  const VectorXd mu = col_means(members);
  const MatrixXd X = random_matrix(4, 2, rng);
  const WeightModel flat;  // no components
  CHECK(eval_lw_lcb(members, mu, flat, X, 2.0) == eval_lcb(members, mu, VectorXd::Ones(4), 2.0));
}

TEST_CASE("lw-lcb: doubling the weights never raises the value") {
  auto rng = make_rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd members = random_matrix(16, 3, rng);
    const VectorXd mu = col_means(members);
    const VectorXd w = random_vector(3, rng).cwiseAbs();
    const double base = eval_lcb(members, mu, w, 2.0);
    const double doubled = eval_lcb(members, mu, 2.0 * w, 2.0);
    CHECK(doubled <= base + 1e-14);
  }
}

TEST_CASE("clsf: zero ensemble spread gives zero") {
  VectorXd mu(2);
  mu << 0.4, -1.0;
  MatrixXd members(6, 2);
  for (int i = 0; i < 6; ++i) members.row(i) = mu.transpose();
  CHECK(eval_clsf(members, mu, VectorXd::Ones(2), 1.0, 1e-3) == 0.0);
}

TEST_CASE("clsf: the decision boundary dominates the batch max") {
  // Two points with equal spread; one sits on the boundary mu = 0.
  const int n = 64;
  MatrixXd members(n, 2);
  auto rng = make_rng(30);
  const VectorXd noise = random_vector(n, rng);
  members.col(0) = noise;
  members.col(1) = 10.0 + noise.array();
  VectorXd mu(2);
  mu << 0.0, 10.0;
  const double both = eval_clsf(members, mu, VectorXd::Ones(2), 1.0, 1e-3);
  const double boundary_only = eval_clsf(members.col(0), mu.head(1), VectorXd::Ones(1), 1.0, 1e-3);
  CHECK(both == doctest::Approx(boundary_only).epsilon(1e-12));
}

TEST_CASE("clsf: half-normal identity gives w*s/(|m|^(1/kappa)+eps)") {
  const double m = 1.3, s = 0.9, w = 2.0, eps = 1e-3;
  const MatrixXd members = m + s * standard_normals(100000, 1, 31).array();
  const VectorXd mu = col_means(members);
  for (const double kappa : {1.0, 2.0}) {
    const double v = eval_clsf(members, mu, VectorXd::Constant(1, w), kappa, eps);
    const double expected = w * s / (std::pow(std::abs(m), 1.0 / kappa) + eps);
    CHECK(std::abs(v - expected) / expected < 0.02);
  }
}

TEST_CASE("lcbc: deeply infeasible constraints drive the value to zero") {
  auto rng = make_rng(32);
  const MatrixXd members = random_matrix(16, 2, rng);
  const VectorXd mu = col_means(members);
  const std::vector<MatrixXd> con{MatrixXd::Constant(16, 2, -1000.0)};
  CHECK(eval_lcbc(members, mu, VectorXd::Ones(2), con, 2.0, 3.0, 10.0) == 0.0);
}

TEST_CASE("lcbc: saturated-feasible constraints reduce to lcb minus delta") {
  auto rng = make_rng(33);
  const MatrixXd members = random_matrix(16, 2, rng);
  const VectorXd mu = col_means(members);
  const std::vector<MatrixXd> con{MatrixXd::Constant(16, 2, 1000.0)};
  const double v = eval_lcbc(members, mu, VectorXd::Ones(2), con, 2.0, 3.0, 10.0);
  const double lcb = eval_lcb(members, mu, VectorXd::Ones(2), 2.0);
  CHECK(std::abs(v - (lcb - 3.0)) < 1e-6);
}

TEST_CASE("lcbc: a feasible candidate beats an infeasible one with equal objectives") {
  auto rng = make_rng(34);
  const MatrixXd obj = random_matrix(32, 1, rng);
  const VectorXd mu = col_means(obj);
  const std::vector<MatrixXd> feasible{MatrixXd::Constant(32, 1, 0.8)};
  const std::vector<MatrixXd> infeasible{MatrixXd::Constant(32, 1, -0.8)};
  const VectorXd w = VectorXd::Ones(1);
  const double with_feasible = eval_lcbc(obj, mu, w, feasible, 2.0, 3.0, 10.0);
  const double with_infeasible = eval_lcbc(obj, mu, w, infeasible, 2.0, 3.0, 10.0);
  CHECK(with_feasible < with_infeasible);
}

TEST_CASE("lcbc: missing constraint members raise") {
  const MatrixXd members = MatrixXd::Zero(4, 1);
  CHECK_THROWS_AS(eval_lcbc(members, VectorXd::Zero(1), VectorXd::Ones(1), {}, 2.0, 3.0, 10.0),
                  ConfigError);
}

TEST_CASE("half-normal identity: the reparameterization backbone holds to 1%") {
  const double sigma = 2.3;
  const MatrixXd xi = sigma * standard_normals(100000, 1, 35).array();
  const double estimate = std::sqrt(kPi / 2.0) * xi.cwiseAbs().mean();
  CHECK(std::abs(estimate - sigma) / sigma < 0.01);
}

TEST_CASE("batch monotonicity: adding a point never hurts, sample-wise") {
  auto rng = make_rng(36);
  std::uniform_int_distribution<int> qdist(1, 4), ndist(2, 12);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = ndist(rng), q = qdist(rng);
    const MatrixXd members = random_matrix(n, q + 1, rng);
    const MatrixXd base = members.leftCols(q);
    const VectorXd mu_all = col_means(members);
    const VectorXd mu = mu_all.head(q);
    const VectorXd w_all = random_vector(q + 1, rng).cwiseAbs();
    const VectorXd w = w_all.head(q);
    const MatrixXd con_all = random_matrix(n, q + 1, rng);
    const std::vector<MatrixXd> con{con_all.leftCols(q)};
    const std::vector<MatrixXd> con_ext{con_all};

    CHECK(eval_ei(members, 0.3) >= eval_ei(base, 0.3));
    CHECK(eval_lcb(members, mu_all, w_all, 2.0) <= eval_lcb(base, mu, w, 2.0));
    CHECK(eval_clsf(members, mu_all, w_all, 1.0, 1e-3) >= eval_clsf(base, mu, w, 1.0, 1e-3));
    CHECK(eval_lcbc(members, mu_all, w_all, con_ext, 2.0, 3.0, 10.0) <=
          eval_lcbc(base, mu, w, con, 2.0, 3.0, 10.0));
  }
}

TEST_CASE("estimators are deterministic given the member matrix") {
  auto rng = make_rng(37);
  const MatrixXd members = random_matrix(16, 3, rng);
  const VectorXd mu = col_means(members);
  const VectorXd w = VectorXd::Ones(3);
  CHECK(eval_ei(members, 0.0) == eval_ei(members, 0.0));
  CHECK(eval_lcb(members, mu, w, 2.0) == eval_lcb(members, mu, w, 2.0));
  CHECK(eval_clsf(members, mu, w, 1.0, 1e-3) == eval_clsf(members, mu, w, 1.0, 1e-3));
}

TEST_CASE("weight model: constant objective collapses to flat weights") {
  BoxDomain box{VectorXd::Zero(2), VectorXd::Ones(2)};
  auto rng = make_rng(38);
  const WeightModel wm =
      fit_weight_model([](const VectorXd&) { return 3.7; }, box, 256, 2, rng);
  CHECK(wm.flat());
  auto probe_rng = make_rng(39);
  for (int i = 0; i < 100; ++i) {
    const VectorXd x = sample_uniform(box, 1, probe_rng).row(0).transpose();
    CHECK(wm(x) == doctest::Approx(1.0).epsilon(0.1));
    CHECK(wm.gradient(x).isZero(0.0));
  }
}

TEST_CASE("weight model: double-well weights emphasize inputs with rare outputs") {
  // For this function the rare outputs are the high tail reached only at
  // the domain edges; outputs near the interior minima are common (the
  // output density has an integrable singularity at smooth minima), so the
  // weight must rank edge inputs above well inputs. Verified against a
  // 2e6-sample histogram of p(f(x)).
  BoxDomain box{VectorXd::Constant(1, -1.5), VectorXd::Constant(1, 1.5)};
  auto rng = make_rng(40);
  const auto f = [](const VectorXd& x) {
    const double v = x[0] * x[0] - 1.0;
    return v * v + 0.2 * x[0];
  };
  const WeightModel wm = fit_weight_model(f, box, 512, 2, rng);
  REQUIRE(!wm.flat());
  const auto w_at = [&wm](double x) { return wm(VectorXd::Constant(1, x)); };
  const double at_edges = 0.5 * (w_at(-1.5) + w_at(1.5));
  const double near_wells = 0.5 * (w_at(-1.0) + w_at(1.0));
  CHECK(at_edges > near_wells);
}

TEST_CASE("weight model: mixture weights sum to one and densities are non-negative") {
  BoxDomain box{VectorXd::Zero(2), VectorXd::Ones(2)};
  auto rng = make_rng(41);
  const auto f = [](const VectorXd& x) { return std::sin(5.0 * x[0]) + x[1] * x[1]; };
  const WeightModel wm = fit_weight_model(f, box, 256, 3, rng);
  REQUIRE(!wm.flat());
  double alpha_sum = 0.0;
  for (const auto& c : wm.components) {
    CHECK(c.alpha >= 0.0);
    alpha_sum += c.alpha;
  }
  CHECK(alpha_sum == doctest::Approx(1.0).epsilon(1e-9));
  auto probe_rng = make_rng(42);
  const MatrixXd probes = sample_uniform(box, 10000, probe_rng);
  for (int i = 0; i < probes.rows(); ++i) {
    const double w = wm(probes.row(i).transpose());
    CHECK(w >= 0.0);
    CHECK(std::isfinite(w));
  }
}

TEST_CASE("weight model: probe budget must cover the mixture size") {
  BoxDomain box{VectorXd::Zero(1), VectorXd::Ones(1)};
  auto rng = make_rng(43);
  CHECK_THROWS_AS(fit_weight_model([](const VectorXd&) { return 0.0; }, box, 15, 2, rng),
                  ConfigError);
}

TEST_CASE("weight model: gradient matches finite differences") {
  BoxDomain box{VectorXd::Zero(2), VectorXd::Ones(2)};
  auto rng = make_rng(44);
  const auto f = [](const VectorXd& x) { return x[0] * x[0] + 0.5 * x[1]; };
  const WeightModel wm = fit_weight_model(f, box, 256, 2, rng);
  REQUIRE(!wm.flat());
  auto probe_rng = make_rng(45);
  for (int trial = 0; trial < 10; ++trial) {
    VectorXd x = sample_uniform(box, 1, probe_rng).row(0).transpose();
    const VectorXd g = wm.gradient(x);
    for (int j = 0; j < 2; ++j) {
      const double step = 1e-6, saved = x[j];
      x[j] = saved + step;
      const double up = wm(x);
      x[j] = saved - step;
      const double down = wm(x);
      x[j] = saved;
      const double fd = (up - down) / (2.0 * step);
      CHECK(std::abs(g[j] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}
