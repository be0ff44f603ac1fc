#ifndef RPNBO_PROBLEMS_HPP
#define RPNBO_PROBLEMS_HPP

#include "rpnbo/bo.hpp"

#include <string>
#include <vector>

namespace rpnbo {
namespace problems {

/// Pollutant concentration in an infinite one-dimensional channel after two
/// spills of mass M: diffusion D, second spill at location L and time tau.
double env_concentration(double M, double D, double L, double tau, double s, double t);

/// The 3x4 observation grid S = {0, 1, 2.5} x T = {15, 30, 45, 60},
/// flattened S-major: index = i_s * 4 + i_t.
VectorXd env_output(const VectorXd& params);  // params = (M, D, L, tau)
/// Mean squared error against the grid observed at the true parameters
/// (10, 0.07, 1.505, 30.1525).
double env_objective(const VectorXd& y);
VectorXd env_true_params();

struct BrusselatorOptions {
  int grid_n = 16;      // grid side; output dimension is 2*n^2 (u then v)
  double t_end = 10.0;
  double dt = 0.0;      // 0: largest stable step
};

/// Two-species reaction-diffusion integrated by explicit Euler with a
/// 5-point periodic Laplacian on the unit square, from u = a + 0.1
/// sin(2*pi*x) sin(2*pi*y), v = b/a. Throws EvaluationError on blowup.
VectorXd brusselator_solve(double a, double b, double d0, double d1,
                           const BrusselatorOptions& options = {});
/// Population variance of the concatenated (u, v) fields.
double brusselator_objective(const VectorXd& y);

/// (x^2 - 1)^2 + 0.2 x on [-1.5, 1.5]: two unequal wells near +-1.
double double_well(double x);

/// Problem registry ids: "env", "brusselator", "doublewell",
/// "mfblade-synthetic". Unknown ids raise ConfigError.
struct ProblemOptions {
  int grid_n = 16;  // brusselator only; 64 reproduces the full-size grid
};

Problem make_problem(const std::string& id, const ProblemOptions& options = {});
std::vector<std::string> list_problems();

/// Constants of the synthetic constrained multi-fidelity problem
/// (d = 8 in [0,1]^8, 32-dimensional smooth trigonometric output field,
/// pressure-ratio style constraint r(y) >= r0 with roughly 30% of the
/// domain feasible).
namespace mfblade {
constexpr int kInputDim = 8;
constexpr int kOutputDim = 32;
extern const double kRatioThreshold;  // r0
VectorXd output_high(const VectorXd& x);
VectorXd output_low(const VectorXd& x);
double efficiency(const VectorXd& y);      // objective is -efficiency
double pressure_ratio(const VectorXd& y);  // constraint is ratio - r0 >= 0
}  // namespace mfblade

}  // namespace problems
}  // namespace rpnbo

#endif
