#include "tvflow/joint.hpp"

#include <string>

#include "tvflow/diff_ops.hpp"

namespace tvflow {

void JointConfig::validate() const {
  if (!(gamma > 0)) throw ConfigError("gamma must be positive");
  if (!(beta > 0)) throw ConfigError("beta must be positive");
  if (!(eps_main > 0) || !(eps_u > 0) || !(eps_v > 0)) throw ConfigError("tolerances must be positive");
  if (alpha.size() == 0) throw ConfigError("alpha is empty");
  if ((alpha < 0).any()) throw ConfigError("alpha entries must be >= 0");
  if (max_outer < 1) throw ConfigError("max_outer must be >= 1");
}

PDParamsU JointConfig::u_params() const {
  PDParamsU p;
  p.alpha = alpha;
  p.gamma = gamma;
  p.max_iters = max_iters_u;
  p.eps_u = eps_u;
  p.step_factor = step_factor;
  p.norm_seed = norm_seed;
  p.warm_start_duals = warm_start_duals;
  return p;
}

PDParamsV JointConfig::v_params() const {
  PDParamsV p;
  p.lambda = beta / gamma;
  p.max_iters = max_iters_v;
  p.eps_v = eps_v;
  p.step_factor = step_factor;
  p.norm_seed = norm_seed;
  p.warm_start_duals = warm_start_duals;
  return p;
}

double joint_energy(const ImageSequence& u, const FlowField& v, const ImageSequence& f,
                    const JointConfig& config) {
  return energy_u(u, f, config.K, v, config.alpha, config.gamma) +
         config.beta * flow_total_variation(v);
}

double err_main(const ImageSequence& u, const ImageSequence& u_old, const FlowField& v,
                const FlowField& v_old) {
  require_same_grid(u.grid, u_old.grid, "err_main");
  require_same_grid(v.grid, v_old.grid, "err_main");
  const double du = (u.values - u_old.values).abs().sum();
  const double dv = (v.v1 - v_old.v1).abs().sum() + (v.v2 - v_old.v2).abs().sum();
  return (du + dv) / (2.0 * static_cast<double>(u.grid.size()));
}

JointResult solve_joint(const ImageSequence& f, const JointConfig& config,
                        std::optional<ImageSequence> u_init, std::optional<FlowField> v_init) {
  config.validate();
  const Grid domain = u_init ? u_init->grid : (v_init ? v_init->grid : f.grid);
  require_same_grid(config.K.range_grid(domain), f.grid, "solve_joint (data)");

  JointResult result;
  result.u = u_init ? std::move(*u_init) : ImageSequence(domain);
  result.v = v_init ? std::move(*v_init) : FlowField(domain);
  require_same_grid(result.u.grid, result.v.grid, "solve_joint");

  const PDParamsU pu = config.u_params();
  const PDParamsV pv = config.v_params();
  DualState u_duals;
  DualBlock v_duals;

  for (int k = 0; k < config.max_outer; ++k) {
    const ImageSequence u_old = result.u;
    const FlowField v_old = result.v;
    OuterRecord rec;
    try {
      USolution us = solve_u(f, config.K, result.v, result.u, pu, &u_duals);
      if (config.monotone &&
          us.report.energy > energy_u(result.u, f, config.K, result.v, config.alpha, config.gamma)) {
        rec.u_rejected = true;
      } else {
        result.u = std::move(us.u);
      }
      rec.inner_iters_u = us.report.iterations;

      VSolution vs = solve_v(result.u, result.v, pv, &v_duals);
      if (config.monotone && vs.report.energy > energy_v(result.v, result.u, pv.lambda)) {
        rec.v_rejected = true;
      } else {
        result.v = std::move(vs.v);
      }
      rec.inner_iters_v = vs.report.iterations;
    } catch (const DivergenceError& e) {
      throw DivergenceError(e.message() + " in outer iteration " + std::to_string(k + 1),
                            e.iteration());
    }

    rec.outer_iter = k + 1;
    rec.err_main = err_main(result.u, u_old, result.v, v_old);
    rec.energy = joint_energy(result.u, result.v, f, config);
    result.trace.push_back(rec);
    if (rec.err_main < config.eps_main) {
      result.converged = true;
      break;
    }
  }
  return result;
}

Frame solve_rof_2d(const Frame& frame, double alpha, const BaselineParams& params) {
  if (frame.rows() < 2 || frame.cols() < 2) throw ContractViolation("solve_rof_2d: frame too small");
  // Two identical frames; with gamma = 0 they decouple.
  const Grid g = Grid::from_shape(frame.cols(), frame.rows(), 2);
  ImageSequence f(g);
  f.frame(0) = frame;
  f.frame(1) = frame;
  PDParamsU p;
  p.alpha = Buffer<double>::Constant(1, alpha);
  p.gamma = 0.0;
  p.max_iters = params.max_iters;
  p.eps_u = params.eps;
  p.step_factor = params.step_factor;
  p.norm_seed = params.norm_seed;
  const USolution s = solve_u(f, ForwardOperator::identity(), FlowField(g), f, p);
  return s.u.frame(0);
}

ImageSequence solve_rof_2d(const ImageSequence& f, double alpha, const BaselineParams& params) {
  ImageSequence out(f.grid);
  for (Index t = 0; t < f.grid.frames(); ++t) out.frame(t) = solve_rof_2d(Frame(f.frame(t)), alpha, params);
  return out;
}

ImageSequence solve_rof_2dt(const ImageSequence& f, double alpha, const BaselineParams& params) {
  PDParamsU p;
  p.alpha = Buffer<double>::Constant(1, alpha);
  p.gamma = 0.0;
  p.time_weight = alpha;
  p.max_iters = params.max_iters;
  p.eps_u = params.eps;
  p.step_factor = params.step_factor;
  p.norm_seed = params.norm_seed;
  return solve_u(f, ForwardOperator::identity(), FlowField(f.grid), f, p).u;
}

FlowField solve_tvl1_flow(const ImageSequence& u, double lambda, const BaselineParams& params) {
  PDParamsV p;
  p.lambda = lambda;
  p.max_iters = params.max_iters;
  p.eps_v = params.eps;
  p.step_factor = params.step_factor;
  p.norm_seed = params.norm_seed;
  return solve_v(u, FlowField(u.grid), p).v;
}

}  // namespace tvflow
