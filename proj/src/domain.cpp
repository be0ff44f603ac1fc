#include "rpnbo/domain.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace rpnbo {

BoxDomain::BoxDomain(VectorXd lo, VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size())
    throw DimensionError("BoxDomain: lower and upper must have equal length");
  if (lower.size() == 0) throw DimensionError("BoxDomain: empty bounds");
  for (int i = 0; i < lower.size(); ++i)
    if (!(lower[i] < upper[i]))
      throw ConfigError("BoxDomain: lower must be strictly below upper in every dimension");
}

double BoxDomain::volume() const {
  return (upper - lower).prod();
}

bool BoxDomain::contains(const VectorXd& x) const {
  if (x.size() != lower.size()) return false;
  return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

VectorXd BoxDomain::clamp(const VectorXd& x) const {
  return x.cwiseMax(lower).cwiseMin(upper);
}

MatrixXd sample_uniform(const BoxDomain& box, int n, std::mt19937_64& rng) {
  const int d = box.dim();
  MatrixXd out(n, d);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      out(i, j) = box.lower[j] + unit(rng) * (box.upper[j] - box.lower[j]);
  return out;
}

MatrixXd latin_hypercube(const BoxDomain& box, int n, std::mt19937_64& rng) {
  const int d = box.dim();
  MatrixXd out(n, d);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> strata(static_cast<std::size_t>(n));
  for (int j = 0; j < d; ++j) {
    std::iota(strata.begin(), strata.end(), 0);
    std::shuffle(strata.begin(), strata.end(), rng);
    for (int i = 0; i < n; ++i) {
      const double u = (strata[static_cast<std::size_t>(i)] + unit(rng)) / n;
      out(i, j) = box.lower[j] + u * (box.upper[j] - box.lower[j]);
    }
  }
  return out;
}

}  // namespace rpnbo
