#include "rpnbo/acqopt.hpp"
#include "rpnbo/acquisition.hpp"
#include "rpnbo/problems.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <mutex>

using namespace rpnbo;
using namespace rpnbo::testing;

namespace {

BoxDomain unit_box(int d) { return {VectorXd::Zero(d), VectorXd::Ones(d)}; }

/// Small ensemble trained on the double-well problem, reused across cases.
struct TrainedFixture {
  Problem problem = problems::make_problem("doublewell");
  Dataset data;
  Ensemble ensemble;

  TrainedFixture() {
    auto rng = make_rng(7);
    const MatrixXd X = latin_hypercube(problem.domain, 8, rng);
    data.x = X;
    data.y.resize(8, 1);
    for (int i = 0; i < 8; ++i) data.y.row(i) = problem.g(X.row(i).transpose()).transpose();
    EnsembleConfig cfg;
    cfg.n_members = 8;
    cfg.hidden = {16, 16};
    cfg.iterations = 400;
    cfg.seed = 11;
    cfg.workers = 1;
    ensemble = train_ensemble(data, cfg, Normalizer::from_box(problem.domain));
  }
};

const TrainedFixture& fixture() {
  static const TrainedFixture f;
  return f;
}

double fd_score(const BatchScoreFn& fn, MatrixXd X, int i, int j, double step) {
  const double saved = X(i, j);
  X(i, j) = saved + step;
  const double up = fn(X, nullptr);
  X(i, j) = saved - step;
  const double down = fn(X, nullptr);
  return (up - down) / (2.0 * step);
}

}  // namespace

TEST_CASE("optimize_batch: recovers the maximizer of a concave quadratic") {
  const BoxDomain box = unit_box(3);
  VectorXd x0(3);
  x0 << 0.3, 0.7, 0.5;
  const BatchScoreFn fn = [&x0](const MatrixXd& X, MatrixXd* grad) {
    const VectorXd diff = X.row(0).transpose() - x0;
    if (grad) grad->row(0) = -2.0 * diff.transpose();
    return -diff.squaredNorm();
  };
  AcqOptConfig cfg;
  cfg.restarts = 4;
  cfg.steps = 300;
  const BatchResult res = optimize_batch(fn, box, 1, cfg, 5);
  CHECK((res.X.row(0).transpose() - x0).norm() < 1e-3);
}

TEST_CASE("optimize_batch: unused batch points stay in bounds") {
  const BoxDomain box = unit_box(2);
  VectorXd x0(2);
  x0 << 0.25, 0.6;
  const BatchScoreFn fn = [&x0](const MatrixXd& X, MatrixXd* grad) {
    const VectorXd diff = X.row(0).transpose() - x0;
    if (grad) {
      grad->setZero();
      grad->row(0) = -2.0 * diff.transpose();
    }
    return -diff.squaredNorm();
  };
  AcqOptConfig cfg;
  cfg.restarts = 3;
  cfg.steps = 200;
  const BatchResult res = optimize_batch(fn, box, 3, cfg, 6);
  CHECK((res.X.row(0).transpose() - x0).norm() < 1e-2);
  for (int i = 0; i < 3; ++i) CHECK(box.contains(res.X.row(i).transpose()));
}

TEST_CASE("optimize_batch: beats a dense grid on a trained EI landscape") {
  const auto& f = fixture();
  const double f_star = [&] {
    double best = 1e300;
    for (int i = 0; i < f.data.y.rows(); ++i) best = std::min(best, f.data.y(i, 0));
    return best;
  }();
  const BatchScorer scorer({.family = AcqFamily::Ei, .q = 1},
                           {SurrogateRef::single(f.ensemble), f.problem.f}, {}, nullptr, f_star);
  AcqOptConfig cfg;
  cfg.restarts = 10;
  cfg.steps = 250;
  const BatchResult res = optimize_batch(scorer.as_score_fn(), f.problem.domain, 1, cfg, 9);
  double grid_best = -1e300;
  for (int i = 0; i < 10000; ++i) {
    MatrixXd X(1, 1);
    X(0, 0) = -1.5 + 3.0 * i / 9999.0;
    grid_best = std::max(grid_best, scorer.score(X));
  }
  CHECK(res.score >= grid_best - 1e-6);
}

TEST_CASE("scorer gradients match finite differences at random batches") {
  const auto& f = fixture();
  const SurrogateRef ref = SurrogateRef::single(f.ensemble);
  auto rng = make_rng(13);
  const WeightModel wm = fit_weight_model(
      [&](const VectorXd& x) {
        const MatrixXd samples = predict_members(f.ensemble, x);
        double acc = 0.0;
        for (int i = 0; i < samples.rows(); ++i) acc += samples(i, 0);
        return acc / samples.rows();
      },
      f.problem.domain, 128, 2, rng);

  ScalarReducer constraint;
  constraint.value = [](const VectorXd& y) { return y[0] - 0.5; };
  constraint.grad = [](const VectorXd&) { return VectorXd::Ones(1); };

  const std::vector<BatchScorer> scorers = [&] {
    std::vector<BatchScorer> out;
    out.emplace_back(AcquisitionSpec{.family = AcqFamily::Ei, .q = 2},
                     BoundQuantity{ref, f.problem.f}, std::vector<BoundQuantity>{}, nullptr, 0.1);
    out.emplace_back(AcquisitionSpec{.family = AcqFamily::Lcb, .kappa = 2.0, .q = 2},
                     BoundQuantity{ref, f.problem.f});
    out.emplace_back(AcquisitionSpec{.family = AcqFamily::LwLcb, .kappa = 2.0, .q = 2},
                     BoundQuantity{ref, f.problem.f}, std::vector<BoundQuantity>{}, &wm);
    out.emplace_back(AcquisitionSpec{.family = AcqFamily::Clsf, .kappa = 1.0, .q = 2},
                     BoundQuantity{ref, f.problem.f});
    out.emplace_back(AcquisitionSpec{.family = AcqFamily::Lcbc, .kappa = 2.0, .q = 2},
                     BoundQuantity{ref, f.problem.f},
                     std::vector<BoundQuantity>{BoundQuantity{ref, constraint}});
    return out;
  }();

  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd X = latin_hypercube(f.problem.domain, 2, rng);
    for (const BatchScorer& scorer : scorers) {
      MatrixXd grad(2, 1);
      scorer.score(X, &grad);
      for (int i = 0; i < 2; ++i) {
        const double fd = fd_score(scorer.as_score_fn(), X, i, 0, 1e-5);
        const double err = std::abs(grad(i, 0) - fd) / std::max(std::abs(fd), 1e-4);
        CHECK(err < 1e-3);
        ++checked;
      }
    }
  }
  CHECK(checked == 20 * 5 * 2);
}

TEST_CASE("scorer gradient: zero-spread LCB reduces to the gradient of the mean") {
  const auto& f = fixture();
  // Collapse the ensemble: every member identical makes the spread zero.
  Ensemble collapsed = f.ensemble;
  for (auto& m : collapsed.members) m = collapsed.members[0];
  const BatchScorer scorer({.family = AcqFamily::Lcb, .kappa = 2.0, .q = 1},
                           {SurrogateRef::single(collapsed), f.problem.f});
  MatrixXd X(1, 1);
  X(0, 0) = 0.4;
  MatrixXd grad(1, 1);
  scorer.score(X, &grad);
  // Finite-difference gradient of the (sign-flipped) scalar mean.
  const auto mean_at = [&](double x) {
    const MatrixXd samples = predict_members(collapsed, VectorXd::Constant(1, x));
    return samples.col(0).mean();
  };
  const double fd = (mean_at(0.4 + 1e-6) - mean_at(0.4 - 1e-6)) / 2e-6;
  CHECK(std::abs(-grad(0, 0) - fd) < 1e-5 * std::max(1.0, std::abs(fd)));
}

TEST_CASE("scorer gradient: EI is exactly zero where every improvement clamps") {
  const auto& f = fixture();
  // An incumbent far below anything the surrogate can predict.
  const BatchScorer scorer({.family = AcqFamily::Ei, .q = 1},
                           {SurrogateRef::single(f.ensemble), f.problem.f}, {}, nullptr, -100.0);
  MatrixXd X(1, 1);
  X(0, 0) = 0.2;
  MatrixXd grad(1, 1);
  const double value = scorer.score(X, &grad);
  CHECK(value == 0.0);
  CHECK(grad(0, 0) == 0.0);
}

TEST_CASE("optimize_batch: returned batch is the best visited iterate") {
  const BoxDomain box = unit_box(2);
  std::mutex mu;
  std::vector<double> seen;
  const BatchScoreFn fn = [&](const MatrixXd& X, MatrixXd* grad) {
    const double v = -(X.row(0).squaredNorm());
    if (grad) grad->row(0) = -2.0 * X.row(0);
    std::lock_guard<std::mutex> lock(mu);
    seen.push_back(v);
    return v;
  };
  AcqOptConfig cfg;
  cfg.restarts = 3;
  cfg.steps = 50;
  const BatchResult res = optimize_batch(fn, box, 1, cfg, 17);
  double best_seen = -1e300;
  for (const double v : seen) best_seen = std::max(best_seen, v);
  CHECK(res.score == best_seen);
}

TEST_CASE("optimize_batch: identical seeds give identical batches") {
  const auto& f = fixture();
  const BatchScorer scorer({.family = AcqFamily::Lcb, .kappa = 2.0, .q = 2},
                           {SurrogateRef::single(f.ensemble), f.problem.f});
  AcqOptConfig cfg;
  cfg.restarts = 4;
  cfg.steps = 60;
  const BatchResult a = optimize_batch(scorer.as_score_fn(), f.problem.domain, 2, cfg, 23);
  const BatchResult b = optimize_batch(scorer.as_score_fn(), f.problem.domain, 2, cfg, 23);
  CHECK(a.X == b.X);
  CHECK(a.score == b.score);
}

TEST_CASE("optimize_batch: parallel restarts select the same batch as serial") {
  const auto& f = fixture();
  const BatchScorer scorer({.family = AcqFamily::Lcb, .kappa = 2.0, .q = 1},
                           {SurrogateRef::single(f.ensemble), f.problem.f});
  AcqOptConfig serial;
  serial.restarts = 4;
  serial.steps = 40;
  serial.workers = 1;
  AcqOptConfig parallel = serial;
  parallel.workers = 4;
  const BatchResult a = optimize_batch(scorer.as_score_fn(), f.problem.domain, 1, serial, 29);
  const BatchResult b = optimize_batch(scorer.as_score_fn(), f.problem.domain, 1, parallel, 29);
  CHECK(a.X == b.X);
}

TEST_CASE("optimize_batch: all-non-finite scores raise an optimization error") {
  const BoxDomain box = unit_box(1);
  const BatchScoreFn fn = [](const MatrixXd&, MatrixXd* grad) {
    if (grad) grad->setZero();
    return std::numeric_limits<double>::quiet_NaN();
  };
  AcqOptConfig cfg;
  cfg.restarts = 2;
  cfg.steps = 5;
  CHECK_THROWS_AS(optimize_batch(fn, box, 1, cfg, 31), OptimizationError);
}

TEST_CASE("acq_gradient: names the offending point on non-finite gradients") {
  const BatchScoreFn fn = [](const MatrixXd& X, MatrixXd* grad) {
    if (grad) {
      grad->setZero(X.rows(), X.cols());
      (*grad)(1, 0) = std::numeric_limits<double>::infinity();
    }
    return 0.0;
  };
  CHECK_THROWS_WITH_AS(acq_gradient(fn, MatrixXd::Zero(2, 1)),
                       doctest::Contains("batch point 1"), OptimizationError);
}

TEST_CASE("thompson: selected points minimize their member's closed-form objective") {
  // Members built by hand: y = a*x + b with the reducer f(y) = y^2 makes
  // each member's objective a parabola with vertex at -b/a.
  auto rng = make_rng(37);
  Ensemble e;
  e.arch = Arch::Mlp;
  e.input_dim = 1;
  e.output_dim = 1;
  e.input_norm = Normalizer::identity(1);
  e.output_norm = Normalizer::identity(1);
  const double slopes[4] = {1.0, 2.0, -1.5, 0.8};
  const double intercepts[4] = {-0.5, 0.6, 0.9, -0.16};
  for (int i = 0; i < 4; ++i) {
    RpnMember m;
    Mlp net = make_mlp(1, {}, 1, Activation::Tanh, rng);
    net.weights[0](0, 0) = slopes[i];
    net.biases[0][0] = intercepts[i];
    m.trainable = net;
    Mlp prior = make_mlp(1, {}, 1, Activation::Tanh, rng);
    prior.weights[0].setZero();
    prior.biases[0].setZero();
    m.prior = prior;
    m.beta = 1.0;
    e.members.push_back(std::move(m));
  }
  ScalarReducer square;
  square.value = [](const VectorXd& y) { return y[0] * y[0]; };
  square.grad = [](const VectorXd& y) { return VectorXd(2.0 * y); };
  const BoxDomain box{VectorXd::Constant(1, -1.0), VectorXd::Constant(1, 1.0)};
  AcqOptConfig cfg;
  cfg.restarts = 6;
  cfg.steps = 800;
  cfg.lr = 5e-3;
  const ThompsonSelection sel = thompson_select(e, square, box, 3, cfg, 41);
  for (int slot = 0; slot < 3; ++slot) {
    const int member = sel.members[static_cast<std::size_t>(slot)];
    const double vertex = -intercepts[member] / slopes[member];
    CHECK(std::abs(sel.points(slot, 0) - vertex) < 1e-3);
  }
}

TEST_CASE("thompson: q beyond the ensemble size raises") {
  const auto& f = fixture();
  AcqOptConfig cfg;
  CHECK_THROWS_AS(
      thompson_select(f.ensemble, f.problem.f, f.problem.domain, f.ensemble.n_members() + 1, cfg, 1),
      ConfigError);
}

TEST_CASE("thompson: q=1 picks the same first point as a larger draw") {
  const auto& f = fixture();
  AcqOptConfig cfg;
  cfg.restarts = 2;
  cfg.steps = 50;
  const ThompsonSelection one = thompson_select(f.ensemble, f.problem.f, f.problem.domain, 1, cfg, 43);
  const ThompsonSelection two = thompson_select(f.ensemble, f.problem.f, f.problem.domain, 2, cfg, 43);
  CHECK(one.members[0] == two.members[0]);
  CHECK(one.points.row(0) == two.points.row(0));
}

TEST_CASE("thompson: identical members select essentially identical points") {
  // Two copies of one member with a single interior minimum: both slots
  // solve the same deterministic inner problem and must agree up to the
  // optimizer's restart tolerance.
  auto rng = make_rng(47);
  Ensemble e;
  e.arch = Arch::Mlp;
  e.input_dim = 1;
  e.output_dim = 1;
  e.input_norm = Normalizer::identity(1);
  e.output_norm = Normalizer::identity(1);
  RpnMember member;
  Mlp net = make_mlp(1, {}, 1, Activation::Tanh, rng);
  net.weights[0](0, 0) = 1.3;
  net.biases[0][0] = -0.4;
  member.trainable = net;
  Mlp prior = make_mlp(1, {}, 1, Activation::Tanh, rng);
  prior.weights[0].setZero();
  prior.biases[0].setZero();
  member.prior = prior;
  e.members = {member, member};
  ScalarReducer square;
  square.value = [](const VectorXd& y) { return y[0] * y[0]; };
  square.grad = [](const VectorXd& y) { return VectorXd(2.0 * y); };
  const BoxDomain box{VectorXd::Constant(1, -1.0), VectorXd::Constant(1, 1.0)};
  AcqOptConfig cfg;
  cfg.restarts = 6;
  cfg.steps = 400;
  cfg.lr = 5e-3;
  const ThompsonSelection sel = thompson_select(e, square, box, 2, cfg, 47);
  CHECK(std::abs(sel.points(0, 0) - sel.points(1, 0)) < 1e-3);
}
