#include "rpnbo/problems.hpp"

#include <cmath>
#include <vector>

namespace rpnbo {
namespace problems {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double env_concentration(double M, double D, double L, double tau, double s, double t) {
  if (t <= 0.0) throw EvaluationError("env_concentration: time must be positive");
  const double first = M / std::sqrt(4.0 * kPi * D * t) * std::exp(-s * s / (4.0 * D * t));
  if (t <= tau) return first;
  const double dt = t - tau;
  const double decay = std::exp(-(s - L) * (s - L) / (4.0 * D * dt));
  if (decay == 0.0) return first;
  return first + M * decay / std::sqrt(4.0 * kPi * D * dt);
}

namespace {
const double kEnvS[3] = {0.0, 1.0, 2.5};
const double kEnvT[4] = {15.0, 30.0, 45.0, 60.0};
}  // namespace

VectorXd env_true_params() {
  VectorXd p(4);
  p << 10.0, 0.07, 1.505, 30.1525;
  return p;
}

VectorXd env_output(const VectorXd& params) {
  if (params.size() != 4) throw DimensionError("env_output: expected (M, D, L, tau)");
  VectorXd y(12);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j)
      y[i * 4 + j] =
          env_concentration(params[0], params[1], params[2], params[3], kEnvS[i], kEnvT[j]);
  return y;
}

namespace {
const VectorXd& env_true_grid() {
  static const VectorXd grid = env_output(env_true_params());
  return grid;
}
}  // namespace

double env_objective(const VectorXd& y) {
  return (y - env_true_grid()).squaredNorm() / 12.0;
}

VectorXd brusselator_solve(double a, double b, double d0, double d1,
                           const BrusselatorOptions& options) {
  const int n = options.grid_n;
  if (n < 2) throw ConfigError("brusselator_solve: grid must be at least 2x2");
  if (a == 0.0) throw EvaluationError("brusselator_solve: a must be nonzero");
  const double h = 1.0 / n;
  const double d_max = std::max(d0, d1);
  double dt = 0.9 * h * h / (4.0 * std::max(d_max, 1e-12));
  dt = std::min(dt, 0.25 / (1.0 + b));  // keep the reaction terms resolved
  if (options.dt > 0.0) dt = std::min(dt, options.dt);
  const long steps = static_cast<long>(std::ceil(options.t_end / dt));

  MatrixXd u(n, n), v(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      u(i, j) = a + 0.1 * std::sin(2.0 * kPi * i * h) * std::sin(2.0 * kPi * j * h);
  v.setConstant(b / a);

  std::vector<int> prev(static_cast<std::size_t>(n)), next(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    prev[static_cast<std::size_t>(i)] = (i + n - 1) % n;
    next[static_cast<std::size_t>(i)] = (i + 1) % n;
  }

  MatrixXd un(n, n), vn(n, n);
  const double inv_h2 = 1.0 / (h * h);
  for (long step = 0; step < steps; ++step) {
    for (int i = 0; i < n; ++i) {
      const int im = prev[static_cast<std::size_t>(i)], ip = next[static_cast<std::size_t>(i)];
      for (int j = 0; j < n; ++j) {
        const int jm = prev[static_cast<std::size_t>(j)], jp = next[static_cast<std::size_t>(j)];
        const double uc = u(i, j), vc = v(i, j);
        const double lap_u = (u(im, j) + u(ip, j) + u(i, jm) + u(i, jp) - 4.0 * uc) * inv_h2;
        const double lap_v = (v(im, j) + v(ip, j) + v(i, jm) + v(i, jp) - 4.0 * vc) * inv_h2;
        const double uv2 = vc * uc * uc;
        un(i, j) = uc + dt * (d0 * lap_u + a - (1.0 + b) * uc + uv2);
        vn(i, j) = vc + dt * (d1 * lap_v + b * uc - uv2);
      }
    }
    u.swap(un);
    v.swap(vn);
    if (step % 64 == 0 && (!u.allFinite() || !v.allFinite()))
      throw EvaluationError("brusselator_solve: solution blew up");
  }
  if (!u.allFinite() || !v.allFinite())
    throw EvaluationError("brusselator_solve: solution blew up");

  VectorXd y(2 * n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      y[i * n + j] = u(i, j);
      y[n * n + i * n + j] = v(i, j);
    }
  return y;
}

double brusselator_objective(const VectorXd& y) {
  const double mean = y.mean();
  return (y.array() - mean).square().mean();
}

double double_well(double x) {
  return (x * x - 1.0) * (x * x - 1.0) + 0.2 * x;
}

// ---------------------------------------------------------------------------
// Synthetic constrained multi-fidelity problem.

namespace mfblade {

namespace {
const double kAmp[kInputDim] = {0.9, 0.7, 0.55, 0.45, 0.35, 0.3, 0.25, 0.2};
const double kCurve[kInputDim] = {0.6, 0.5, 0.45, 0.4, 0.35, 0.3, 0.25, 0.2};
constexpr int kLowTerms = 5;  // coarse truncation of the mode sum

double grid_coord(int m) { return static_cast<double>(m) / (kOutputDim - 1); }

VectorXd output_terms(const VectorXd& x, int n_terms) {
  VectorXd y(kOutputDim);
  for (int m = 0; m < kOutputDim; ++m) {
    const double zeta = grid_coord(m);
    double acc = 1.0;
    for (int k = 0; k < n_terms; ++k) {
      acc += kAmp[k] * std::sin(kPi * (k + 1) * zeta / 2.0 + 2.0 * x[k]);
      acc += kCurve[k] * (x[k] - 0.5) * (x[k] - 0.5) * std::cos(kPi * (k + 1) * zeta);
    }
    y[m] = acc;
  }
  return y;
}
}  // namespace

// Calibrated so that about 30% of the unit box satisfies ratio >= r0
// (70th percentile of the ratio over 1e5 uniform samples).
const double kRatioThreshold = 1.3976;

VectorXd output_high(const VectorXd& x) {
  if (x.size() != kInputDim) throw DimensionError("mfblade: expected 8 inputs");
  return output_terms(x, kInputDim);
}

VectorXd output_low(const VectorXd& x) {
  if (x.size() != kInputDim) throw DimensionError("mfblade: expected 8 inputs");
  VectorXd y = output_terms(x, kLowTerms);
  const double phase = x.sum();
  for (int m = 0; m < kOutputDim; ++m)
    y[m] += 0.1 * std::sin(2.0 * kPi * grid_coord(m) + phase);
  return y;
}

double efficiency(const VectorXd& y) {
  const int half = kOutputDim / 2;
  const double head = y.head(half).mean();
  const double tail = y.tail(kOutputDim - half).mean();
  const double mean = y.mean();
  const double var = (y.array() - mean).square().mean();
  return head - 0.25 * tail - 0.3 * var;
}

double pressure_ratio(const VectorXd& y) {
  const int half = kOutputDim / 2;
  return y.tail(kOutputDim - half).mean();
}

}  // namespace mfblade

// ---------------------------------------------------------------------------
// Registry.

namespace {

Problem make_env_problem() {
  Problem p;
  p.id = "env";
  VectorXd lo(4), hi(4);
  lo << 7.0, 0.02, 0.01, 30.01;
  hi << 12.0, 0.12, 3.0, 30.295;
  p.domain = BoxDomain(lo, hi);
  p.output_dim = 12;
  p.g = [](const VectorXd& x) { return env_output(x); };
  p.f.value = [](const VectorXd& y) { return env_objective(y); };
  p.f.grad = [](const VectorXd& y) { return VectorXd((2.0 / 12.0) * (y - env_true_grid())); };
  p.output_coords.resize(12, 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) p.output_coords.row(i * 4 + j) << kEnvS[i], kEnvT[j];
  return p;
}

Problem make_brusselator_problem(int grid_n) {
  Problem p;
  p.id = grid_n == 16 ? "brusselator" : ("brusselator" + std::to_string(grid_n));
  VectorXd lo(4), hi(4);
  lo << 0.1, 0.1, 0.01, 0.01;
  hi << 5.0, 5.0, 5.0, 5.0;
  p.domain = BoxDomain(lo, hi);
  p.output_dim = 2 * grid_n * grid_n;
  p.g = [grid_n](const VectorXd& x) {
    BrusselatorOptions opt;
    opt.grid_n = grid_n;
    return brusselator_solve(x[0], x[1], x[2], x[3], opt);
  };
  p.f.value = [](const VectorXd& y) { return brusselator_objective(y); };
  p.f.grad = [](const VectorXd& y) {
    const double mean = y.mean();
    return VectorXd(2.0 * (y.array() - mean) / static_cast<double>(y.size()));
  };
  p.output_coords.resize(p.output_dim, 3);
  for (int field = 0; field < 2; ++field)
    for (int i = 0; i < grid_n; ++i)
      for (int j = 0; j < grid_n; ++j)
        p.output_coords.row(field * grid_n * grid_n + i * grid_n + j)
            << static_cast<double>(i) / grid_n, static_cast<double>(j) / grid_n,
            static_cast<double>(field);
  return p;
}

Problem make_double_well_problem() {
  Problem p;
  p.id = "doublewell";
  VectorXd lo(1), hi(1);
  lo << -1.5;
  hi << 1.5;
  p.domain = BoxDomain(lo, hi);
  p.output_dim = 1;
  p.g = [](const VectorXd& x) {
    VectorXd y(1);
    y[0] = double_well(x[0]);
    return y;
  };
  p.f.value = [](const VectorXd& y) { return y[0]; };
  p.f.grad = [](const VectorXd&) { return VectorXd::Ones(1); };
  p.output_coords = MatrixXd::Zero(1, 1);
  return p;
}

Problem make_mfblade_problem() {
  Problem p;
  p.id = "mfblade-synthetic";
  p.domain = BoxDomain(VectorXd::Zero(mfblade::kInputDim), VectorXd::Ones(mfblade::kInputDim));
  p.output_dim = mfblade::kOutputDim;
  p.g = [](const VectorXd& x) { return mfblade::output_high(x); };
  // Objective: minimize the negative efficiency.
  p.f.value = [](const VectorXd& y) { return -mfblade::efficiency(y); };
  p.f.grad = [](const VectorXd& y) {
    const int s = mfblade::kOutputDim, half = s / 2;
    const double mean = y.mean();
    VectorXd g = VectorXd::Zero(s);
    g.head(half).array() = -1.0 / half;
    g.tail(s - half).array() += 0.25 / (s - half);
    g += 0.3 * 2.0 * (y.array() - mean).matrix() / static_cast<double>(s);
    return g;
  };
  Constraint con;
  con.c.value = [](const VectorXd& y) {
    return mfblade::pressure_ratio(y) - mfblade::kRatioThreshold;
  };
  con.c.grad = [](const VectorXd&) {
    const int s = mfblade::kOutputDim, half = s / 2;
    VectorXd g = VectorXd::Zero(s);
    g.tail(s - half).array() = 1.0 / (s - half);
    return g;
  };
  p.constraints.push_back(std::move(con));
  LowFidelity low;
  low.g = [](const VectorXd& x) { return mfblade::output_low(x); };
  low.output_dim = mfblade::kOutputDim;
  low.output_coords.resize(mfblade::kOutputDim, 1);
  for (int m = 0; m < mfblade::kOutputDim; ++m)
    low.output_coords(m, 0) = static_cast<double>(m) / (mfblade::kOutputDim - 1);
  p.low = std::move(low);
  p.output_coords = p.low->output_coords;
  return p;
}

}  // namespace

Problem make_problem(const std::string& id, const ProblemOptions& options) {
  if (id == "env") return make_env_problem();
  if (id == "brusselator") return make_brusselator_problem(options.grid_n);
  if (id == "doublewell") return make_double_well_problem();
  if (id == "mfblade-synthetic") return make_mfblade_problem();
  throw ConfigError("unknown problem id: " + id);
}

std::vector<std::string> list_problems() {
  return {"env", "brusselator", "doublewell", "mfblade-synthetic"};
}

}  // namespace problems
}  // namespace rpnbo
