#ifndef RPNBO_DOMAIN_HPP
#define RPNBO_DOMAIN_HPP

#include "rpnbo/common.hpp"

#include <random>

namespace rpnbo {

/// Axis-aligned box search domain in original input units.
struct BoxDomain {
  VectorXd lower;
  VectorXd upper;

  BoxDomain() = default;
  BoxDomain(VectorXd lo, VectorXd hi);

  int dim() const { return static_cast<int>(lower.size()); }
  double volume() const;
  bool contains(const VectorXd& x) const;
  /// Componentwise clamp into [lower, upper].
  VectorXd clamp(const VectorXd& x) const;
};

/// n uniform samples in the box, one per row.
MatrixXd sample_uniform(const BoxDomain& box, int n, std::mt19937_64& rng);

/// Latin hypercube design: n points (rows), one stratum per point and
/// dimension, uniform jitter within each stratum.
MatrixXd latin_hypercube(const BoxDomain& box, int n, std::mt19937_64& rng);

}  // namespace rpnbo

#endif
