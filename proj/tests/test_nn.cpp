#include "rpnbo/adam.hpp"
#include "rpnbo/nn.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace rpnbo;
using namespace rpnbo::testing;

namespace {

Mlp zeroed(Mlp net) {
  for (auto& w : net.weights) w.setZero();
  for (auto& b : net.biases) b.setZero();
  return net;
}

MatrixXd forward_of(const Mlp& net, const MatrixXd& X) { return mlp_forward(net, X); }

}  // namespace

TEST_CASE("mlp forward: zero parameters give zero output") {
  auto rng = make_rng(1);
  const Mlp net = zeroed(make_mlp(3, {8, 8}, 4, Activation::Tanh, rng));
  MatrixXd x = random_matrix(1, 3, rng);
  CHECK(mlp_forward(net, x).isZero(0.0));
}

TEST_CASE("mlp forward: single identity layer passes the input through") {
  auto rng = make_rng(2);
  Mlp net = make_mlp(2, {}, 2, Activation::Tanh, rng);
  net.weights[0] = MatrixXd::Identity(2, 2);
  net.biases[0].setZero();
  MatrixXd x(1, 2);
  x << 1.0, 2.0;
  const MatrixXd y = mlp_forward(net, x);
  CHECK(y(0, 0) == 1.0);
  CHECK(y(0, 1) == 2.0);
}

TEST_CASE("mlp forward: matches an independent implementation") {
  auto rng = make_rng(3);
  const Mlp net = make_mlp(4, {16, 16}, 3, Activation::Tanh, rng);
  for (int trial = 0; trial < 5; ++trial) {
    const VectorXd x = random_vector(4, rng);
    const VectorXd lib = mlp_forward(net, MatrixXd(x.transpose())).row(0).transpose();
    const VectorXd ref = naive_mlp_forward(net, x);
    CHECK((lib - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("mlp forward: shape mismatch raises a dimension error") {
  auto rng = make_rng(4);
  const Mlp net = make_mlp(3, {4}, 2, Activation::Tanh, rng);
  CHECK_THROWS_AS(mlp_forward(net, MatrixXd::Zero(1, 5)), DimensionError);
}

TEST_CASE("mlp mse gradient: zero loss gives exactly zero gradients") {
  auto rng = make_rng(5);
  const Mlp net = make_mlp(2, {8}, 2, Activation::Tanh, rng);
  const MatrixXd X = random_matrix(6, 2, rng);
  const MatrixXd T = mlp_forward(net, X);
  double loss = 1.0;
  const MlpGrads g = mlp_mse_backward(net, X, T, &loss);
  CHECK(loss == 0.0);
  for (const auto& w : g.weights) CHECK(w.isZero(0.0));
  for (const auto& b : g.biases) CHECK(b.isZero(0.0));
}

TEST_CASE("mlp mse gradient: closed-form linear regression gradient") {
  auto rng = make_rng(6);
  Mlp net = make_mlp(1, {}, 1, Activation::Tanh, rng);
  const double w = 0.37, b = -0.21;
  net.weights[0](0, 0) = w;
  net.biases[0][0] = b;
  const MatrixXd X = random_matrix(10, 1, rng);
  const MatrixXd Y = random_matrix(10, 1, rng);
  const MlpGrads g = mlp_mse_backward(net, X, Y);
  double dw = 0.0, db = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double resid = w * X(i, 0) + b - Y(i, 0);
    dw += 2.0 * X(i, 0) * resid / 10.0;
    db += 2.0 * resid / 10.0;
  }
  CHECK(std::abs(g.weights[0](0, 0) - dw) < 1e-12);
  CHECK(std::abs(g.biases[0][0] - db) < 1e-12);
}

TEST_CASE("mlp mse gradient: matches central finite differences") {
  auto rng = make_rng(7);
  const Mlp net = make_mlp(2, {32, 32}, 3, Activation::Tanh, rng);
  const MatrixXd X = random_matrix(5, 2, rng);
  const MatrixXd T = random_matrix(5, 3, rng);
  const MlpGrads g = mlp_mse_backward(net, X, T);
  CHECK(max_param_grad_error(net, forward_of, X, T, grad_blocks(g)) < 1e-4);
}

TEST_CASE("mlp gradients are finite-difference accurate across seeds and architectures") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto rng = make_rng(100 + seed);
    const Mlp small = make_mlp(2, {16}, 2, Activation::Tanh, rng);
    const Mlp deep = make_mlp(3, {8, 8, 8, 8}, 2, Activation::Tanh, rng);
    const Mlp rectified = make_mlp(2, {16}, 2, Activation::Relu, rng);
    for (const Mlp& net : {small, deep, rectified}) {
      const MatrixXd X = random_matrix(4, net.input_dim(), rng);
      const MatrixXd T = random_matrix(4, net.output_dim(), rng);
      const MlpGrads g = mlp_mse_backward(net, X, T);
      CHECK(max_param_grad_error(net, forward_of, X, T, grad_blocks(g)) < 1e-4);
    }
  }
}

TEST_CASE("mlp input gradient matches finite differences") {
  auto rng = make_rng(8);
  const Mlp net = make_mlp(3, {16, 16}, 2, Activation::Tanh, rng);
  MatrixXd X = random_matrix(4, 3, rng);
  const MatrixXd upstream = random_matrix(4, 2, rng);
  MlpCache cache;
  mlp_forward(net, X, &cache);
  MatrixXd input_grad;
  mlp_backward(net, cache, upstream, nullptr, &input_grad);
  const double step = 1e-6;
  for (int i = 0; i < X.rows(); ++i)
    for (int j = 0; j < X.cols(); ++j) {
      const double saved = X(i, j);
      X(i, j) = saved + step;
      const double up = (mlp_forward(net, X).array() * upstream.array()).sum();
      X(i, j) = saved - step;
      const double down = (mlp_forward(net, X).array() * upstream.array()).sum();
      X(i, j) = saved;
      const double fd = (up - down) / (2.0 * step);
      CHECK(std::abs(input_grad(i, j) - fd) / std::max(std::abs(fd), 1e-3) < 1e-4);
    }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged and decays moments") {
  auto rng = make_rng(9);
  Mlp net = make_mlp(2, {4}, 1, Activation::Tanh, rng);
  const Mlp before = net;
  auto params = param_blocks(net);
  std::vector<Eigen::Index> sizes;
  for (const auto& p : params) sizes.push_back(p.size());
  AdamState state = make_adam_state(sizes, {});
  // Seed a nonzero moment, then step with a zero gradient.
  state.m[0].setConstant(0.5);
  state.v[0].setConstant(0.25);
  const MlpGrads zeros = zero_grads(net);
  adam_step(params, grad_blocks(zeros), state);
  CHECK(state.m[0][0] == doctest::Approx(0.5 * 0.9).epsilon(1e-12));
  CHECK(state.v[0][0] == doctest::Approx(0.25 * 0.999).epsilon(1e-12));
  CHECK(state.step == 1);
  // Fresh moments with zero gradient: parameters must not move at all.
  Mlp net2 = before;
  auto params2 = param_blocks(net2);
  AdamState fresh = make_adam_state(sizes, {});
  adam_step(params2, grad_blocks(zeros), fresh);
  for (std::size_t l = 0; l < net2.weights.size(); ++l) {
    CHECK(net2.weights[l] == before.weights[l]);
    CHECK(net2.biases[l] == before.biases[l]);
  }
}

TEST_CASE("adam: learning rate drops by the decay factor after 1000 steps") {
  AdamState state = make_adam_state({1}, {});
  state.step = 999;
  CHECK(effective_lr(state) == doctest::Approx(1e-3).epsilon(1e-12));
  state.step = 1000;
  CHECK(effective_lr(state) == doctest::Approx(0.999e-3).epsilon(1e-12));
}

TEST_CASE("adam: schedule is piecewise constant between multiples of 1000") {
  AdamState state = make_adam_state({1}, {});
  double last = effective_lr(state);
  int changes = 0;
  for (long s = 1; s <= 3500; ++s) {
    state.step = s;
    const double lr = effective_lr(state);
    if (lr != last) {
      CHECK(s % 1000 == 0);
      ++changes;
      last = lr;
    }
  }
  CHECK(changes == 3);
}

TEST_CASE("adam: 200 steps shrink a convex quadratic loss at least 100x") {
  VectorXd p = VectorXd::Constant(4, 2.0);
  const VectorXd target = VectorXd::Constant(4, 1.9);
  AdamConfig config;
  config.base_lr = 1e-2;
  AdamState state = make_adam_state({4}, config);
  const double initial = 0.5 * (p - target).squaredNorm();
  for (int i = 0; i < 200; ++i) {
    const VectorXd grad = p - target;
    std::vector<Eigen::Map<VectorXd>> params;
    params.emplace_back(p.data(), 4);
    std::vector<Eigen::Map<const VectorXd>> grads;
    grads.emplace_back(grad.data(), 4);
    adam_step(params, grads, state);
  }
  CHECK(0.5 * (p - target).squaredNorm() < initial / 100.0);
}

TEST_CASE("adam: non-finite gradients raise a training error") {
  VectorXd p = VectorXd::Zero(2);
  VectorXd g = VectorXd::Zero(2);
  g[0] = std::numeric_limits<double>::quiet_NaN();
  AdamState state = make_adam_state({2}, {});
  std::vector<Eigen::Map<VectorXd>> params;
  params.emplace_back(p.data(), 2);
  std::vector<Eigen::Map<const VectorXd>> grads;
  grads.emplace_back(g.data(), 2);
  CHECK_THROWS_AS(adam_step(params, grads, state), TrainingError);
}

TEST_CASE("deeponet: zero branch output yields the bias everywhere") {
  auto rng = make_rng(10);
  DeepOnet net = make_deeponet(2, {8}, 1, {8}, 4, Activation::Tanh, rng);
  net.branch = zeroed(net.branch);
  net.bias = 0.75;
  const MatrixXd coords = random_matrix(6, 1, rng);
  const MatrixXd y = deeponet_forward(net, random_matrix(3, 2, rng), coords);
  CHECK((y.array() - 0.75).abs().maxCoeff() == 0.0);
}

TEST_CASE("deeponet: latent width 1 factorizes into branch times trunk") {
  auto rng = make_rng(11);
  DeepOnet net = make_deeponet(1, {}, 1, {}, 1, Activation::Tanh, rng);
  // branch == 2 identically, trunk(coord) == coord, zero shared bias
  net.branch.weights[0].setZero();
  net.branch.biases[0][0] = 2.0;
  net.trunk.weights[0](0, 0) = 1.0;
  net.trunk.biases[0][0] = 0.0;
  net.bias = 0.0;
  MatrixXd coords(3, 1);
  coords << 0.5, -1.0, 2.0;
  const MatrixXd y = deeponet_forward(net, MatrixXd::Zero(1, 1), coords);
  CHECK(y(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(y(0, 1) == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(y(0, 2) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("deeponet: matches a direct dot-product evaluation") {
  auto rng = make_rng(12);
  const DeepOnet net = make_deeponet(3, {8, 8}, 2, {8, 8}, 5, Activation::Tanh, rng);
  const MatrixXd coords = random_matrix(7, 2, rng);
  const VectorXd x = random_vector(3, rng);
  const VectorXd lib = deeponet_forward(net, MatrixXd(x.transpose()), coords).row(0).transpose();
  const VectorXd branch = naive_mlp_forward(net.branch, x);
  for (int j = 0; j < 7; ++j) {
    const VectorXd trunk = naive_mlp_forward(net.trunk, coords.row(j).transpose());
    CHECK(std::abs(lib[j] - (branch.dot(trunk) + net.bias)) < 1e-12);
  }
}

TEST_CASE("deeponet: latent width mismatch raises a dimension error") {
  auto rng = make_rng(13);
  DeepOnet net = make_deeponet(2, {4}, 1, {4}, 3, Activation::Tanh, rng);
  net.trunk = make_mlp(1, {4}, 2, Activation::Tanh, rng);  // latent 2 != 3
  CHECK_THROWS_AS(deeponet_forward(net, MatrixXd::Zero(1, 2), MatrixXd::Zero(4, 1)),
                  DimensionError);
}

TEST_CASE("deeponet gradients are finite-difference accurate across seeds") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto rng = make_rng(200 + seed);
    const DeepOnet net = make_deeponet(2, {8}, 1, {8}, 4, Activation::Tanh, rng);
    const MatrixXd coords = random_matrix(5, 1, rng);
    const MatrixXd X = random_matrix(4, 2, rng);
    const MatrixXd T = random_matrix(4, 5, rng);
    const DeepOnetGrads g = deeponet_mse_backward(net, X, coords, T);
    const auto forward = [&coords](const DeepOnet& n, const MatrixXd& XX) {
      return deeponet_forward(n, XX, coords);
    };
    CHECK(max_param_grad_error(net, forward, X, T, grad_blocks(g)) < 1e-4);
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto build_and_train = [] {
    auto rng = make_rng(42);
    Mlp net = make_mlp(2, {8}, 1, Activation::Tanh, rng);
    const MatrixXd X = random_matrix(6, 2, rng);
    const MatrixXd T = random_matrix(6, 1, rng);
    auto params = param_blocks(net);
    std::vector<Eigen::Index> sizes;
    for (const auto& p : params) sizes.push_back(p.size());
    AdamState state = make_adam_state(sizes, {});
    for (int i = 0; i < 50; ++i) {
      const MlpGrads g = mlp_mse_backward(net, X, T);
      adam_step(params, grad_blocks(g), state);
    }
    return net;
  };
  const Mlp a = build_and_train();
  const Mlp b = build_and_train();
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    CHECK(a.weights[l] == b.weights[l]);
    CHECK(a.biases[l] == b.biases[l]);
  }
}
