#pragma once

#include <optional>
#include <vector>

#include "tvflow/forward_model.hpp"
#include "tvflow/solver_u.hpp"
#include "tvflow/solver_v.hpp"

namespace tvflow {

/// Weights and tolerances of the joint TV-TV optical flow model
///   1/2 |Ku - f|^2 + alpha |grad u|_1 + beta |grad v|_1 + gamma |u_t + grad u . v|_1.
struct JointConfig {
  Buffer<double> alpha = Buffer<double>::Constant(1, 0.03);  // per frame, or one broadcast value
  double beta = 0.07;
  double gamma = 1.0;
  double eps_main = 1e-6;
  double eps_u = 1e-6;
  double eps_v = 1e-6;
  int max_outer = 20;
  int max_iters_u = 5000;
  int max_iters_v = 5000;
  double step_factor = 0.99;
  std::uint64_t norm_seed = kPowerIterationSeed;
  /// Non-standard: carry duals across outer iterations instead of resetting.
  bool warm_start_duals = false;
  /// Rejects an inner result that raises its subproblem energy, which keeps
  /// the joint energy non-increasing despite inexact inner solves.
  bool monotone = true;
  ForwardOperator K = ForwardOperator::identity();

  void validate() const;
  PDParamsU u_params() const;
  PDParamsV v_params() const;
};

struct OuterRecord {
  int outer_iter = 0;
  double err_main = 0.0;
  double energy = 0.0;
  int inner_iters_u = 0;
  int inner_iters_v = 0;
  bool u_rejected = false;
  bool v_rejected = false;
};

struct JointResult {
  ImageSequence u;
  FlowField v;
  std::vector<OuterRecord> trace;
  bool converged = false;
};

double joint_energy(const ImageSequence& u, const FlowField& v, const ImageSequence& f,
                    const JointConfig& config);

/// Mean absolute change of u and v between outer iterations:
///   (|u - u_old|_1 + |v - v_old|_1) / (2 |Omega|), |Omega| = space-time point count.
double err_main(const ImageSequence& u, const ImageSequence& u_old, const FlowField& v,
                const FlowField& v_old);

/// Alternating minimization: u <- solve_u(v), v <- solve_v(u) until err_main
/// drops below eps_main or max_outer is reached. u and v start at zero unless
/// initial values are given. With `monotone`, a step whose subproblem energy
/// exceeds that of the previous iterate is discarded.
JointResult solve_joint(const ImageSequence& f, const JointConfig& config,
                        std::optional<ImageSequence> u_init = std::nullopt,
                        std::optional<FlowField> v_init = std::nullopt);

// Baselines.

struct BaselineParams {
  int max_iters = 5000;
  double eps = 1e-6;
  double step_factor = 0.99;
  std::uint64_t norm_seed = kPowerIterationSeed;
};

/// Framewise TV-L2 denoising of one frame (u-solver with gamma = 0).
Frame solve_rof_2d(const Frame& frame, double alpha, const BaselineParams& params = {});
/// solve_rof_2d applied to every frame of a sequence.
ImageSequence solve_rof_2d(const ImageSequence& f, double alpha, const BaselineParams& params = {});
/// TV-L2 with an additional, equally weighted alpha |u_t|_1 term.
ImageSequence solve_rof_2dt(const ImageSequence& f, double alpha, const BaselineParams& params = {});
/// Static TV-L1 optical flow on a given sequence, starting from zero flow.
FlowField solve_tvl1_flow(const ImageSequence& u, double lambda, const BaselineParams& params = {});

}  // namespace tvflow
