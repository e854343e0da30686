#pragma once

#include "tvflow/grid.hpp"
#include "tvflow/solver_u.hpp"

namespace tvflow {

/// Parameters of the flow subproblem
///   min_v |u_t + grad u . v|_1 + lambda |grad v|_1,  lambda = beta / gamma.
struct PDParamsV {
  double sigma = 0.0;
  double tau = 0.0;
  double step_factor = 0.99;
  double lambda = 0.1;
  int max_iters = 5000;
  double eps_v = 1e-6;
  int norm_iterations = 100;
  std::uint64_t norm_seed = kPowerIterationSeed;
  int history_stride = 0;
  bool warm_start_duals = false;
  /// Tracks the largest pointwise dual magnitude over all iterations.
  bool track_dual_bound = false;
};

struct VSolution {
  FlowField v;
  SolveReport report;
  double max_dual_norm = 0.0;
};

/// Isotropic TV of a flow: sum over points of the Euclidean norm of the four
/// forward-difference channels.
double flow_total_variation(const FlowField& v);

double energy_v(const FlowField& v, const ImageSequence& u, double lambda);

/// Norm of C_v = diag(grad, grad) on the grid, estimated once per grid shape.
double operator_norm_v(const Grid& grid, int iterations = 100,
                       std::uint64_t seed = kPowerIterationSeed);

/// Primal-dual iteration with ball projection on the dual and affine
/// shrinkage on the primal. The data coefficients u_t and (u_x, u_y) are
/// taken from u once.
VSolution solve_v(const ImageSequence& u, const FlowField& v0, const PDParamsV& params,
                  DualBlock* duals = nullptr);

}  // namespace tvflow
