#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>

namespace tvflow {

/// Seed of the power-iteration start vector unless the caller supplies one.
inline constexpr std::uint64_t kPowerIterationSeed = 0x7f4a7c15ULL;

/// Largest singular value of a linear operator A given as apply (x -> Ax) and
/// adjoint (y -> A^T y) callables on Eigen vectors of the given domain size.
///
/// Power iteration on A^T A from a seeded Gaussian start. Stops after
/// `iterations` steps or once successive estimates differ by less than
/// `rel_tol` relative. The estimate approaches the true norm from below.
template <typename Apply, typename Adjoint>
double operator_norm_estimate(Apply&& apply, Adjoint&& adjoint, Eigen::Index domain_size,
                              int iterations = 50, std::uint64_t seed = kPowerIterationSeed,
                              double rel_tol = 1e-6) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd x(domain_size);
  for (Eigen::Index k = 0; k < domain_size; ++k) x[k] = normal(rng);
  double nx = x.norm();
  if (nx == 0.0) return 0.0;
  x /= nx;

  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd ax = apply(x);
    const double next = ax.norm();
    if (next == 0.0) return 0.0;
    Eigen::VectorXd z = adjoint(ax);
    const double nz = z.norm();
    if (nz == 0.0) return next;
    x = z / nz;
    const bool converged = it > 0 && std::abs(next - estimate) < rel_tol * next;
    estimate = next;
    if (converged) break;
  }
  return estimate;
}

}  // namespace tvflow
