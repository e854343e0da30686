#pragma once

#include <cstdint>
#include <vector>

#include "tvflow/forward_model.hpp"
#include "tvflow/grid.hpp"
#include "tvflow/power_iteration.hpp"

namespace tvflow {

/// One convergence sample of a primal-dual solve.
struct IterationRecord {
  int iteration = 0;
  double residual = 0.0;
  double energy = 0.0;
};

struct SolveReport {
  int iterations = 0;
  double residual = 0.0;
  double energy = 0.0;
  bool converged = false;
  double sigma = 0.0;
  double tau = 0.0;
  double operator_norm = 0.0;
  std::vector<IterationRecord> history;
};

/// Parameters of the image subproblem
///   min_u 1/2 |Ku - f|^2 + alpha_t |grad u|_1 + gamma |u_t + grad u . v|_1
///         + time_weight |u_t|_1
/// where alpha is given per frame. The last term is only used by the 2D+t
/// ROF baseline; gamma = 0 turns the solve into framewise ROF.
struct PDParamsU {
  /// Step sizes; both zero selects sigma = tau = step_factor / |C|.
  double sigma = 0.0;
  double tau = 0.0;
  double step_factor = 0.99;
  Buffer<double> alpha;  // one weight per frame; a single entry is broadcast
  double gamma = 1.0;
  double time_weight = 0.0;
  int max_iters = 5000;
  double eps_u = 1e-6;
  int norm_iterations = 100;
  std::uint64_t norm_seed = kPowerIterationSeed;
  /// Samples the energy every `history_stride` iterations when positive.
  int history_stride = 0;
  /// Order in which the independent dual blocks are updated (data, tv,
  /// transport, time). Empty means natural order.
  std::vector<int> dual_order;
  /// Non-standard: keep the dual variables from the previous call instead of
  /// resetting them to zero. Requires a DualState passed to solve_u.
  bool warm_start_duals = false;
};

struct USolution {
  ImageSequence u;
  SolveReport report;
};

/// Per-frame weights, broadcasting a single value; throws on negative entries.
Buffer<double> expand_frame_weights(const Buffer<double>& alpha, Index frames);

double energy_u(const ImageSequence& u, const ImageSequence& f, const ForwardOperator& K,
                const FlowField& v, const Buffer<double>& alpha, double gamma,
                double time_weight = 0.0);

/// Norm of the stacked operator C = (K, grad, transport(v), time) for the
/// blocks that are active with the given weights.
double operator_norm_u(const Grid& grid, const ForwardOperator& K, const FlowField& v, double gamma,
                       double time_weight, int iterations = 100,
                       std::uint64_t seed = kPowerIterationSeed);

/// Chambolle-Pock iteration for the image subproblem with v frozen. Starts
/// from u0 with zero duals and zero over-relaxed iterate; stops once the
/// primal-dual residual drops below eps_u or after max_iters.
USolution solve_u(const ImageSequence& f, const ForwardOperator& K, const FlowField& v,
                  const ImageSequence& u0, const PDParamsU& params, DualState* duals = nullptr);

}  // namespace tvflow
