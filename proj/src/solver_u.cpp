#include "tvflow/solver_u.hpp"

#include <cmath>
#include <string>

#include "stacked_operator.hpp"
#include "tvflow/diff_ops.hpp"
#include "tvflow/prox.hpp"

namespace tvflow {

Buffer<double> expand_frame_weights(const Buffer<double>& alpha, Index frames) {
  Buffer<double> out;
  if (alpha.size() == 1) {
    out = Buffer<double>::Constant(frames, alpha[0]);
  } else if (alpha.size() == frames) {
    out = alpha;
  } else {
    throw ConfigError("alpha has " + std::to_string(alpha.size()) + " entries for " +
                      std::to_string(frames) + " frames");
  }
  if ((out < 0).any() || !out.isFinite().all()) throw ConfigError("alpha entries must be finite and >= 0");
  return out;
}

double energy_u(const ImageSequence& u, const ImageSequence& f, const ForwardOperator& K,
                const FlowField& v, const Buffer<double>& alpha, double gamma, double time_weight) {
  const Grid& g = u.grid;
  require_same_grid(g, v.grid, "energy_u");
  const Buffer<double> a = expand_frame_weights(alpha, g.frames());
  const ImageSequence ku = K.apply(u);
  require_same_grid(ku.grid, f.grid, "energy_u");
  double e = 0.5 * (ku.values - f.values).square().sum();

  const GradientField gu = grad_forward(u);
  const Buffer<double> mag = (gu.gx.square() + gu.gy.square()).sqrt();
  for (Index t = 0; t < g.frames(); ++t) {
    if (a[t] != 0.0) e += a[t] * mag.segment(t * g.frame_size(), g.frame_size()).sum();
  }
  if (gamma != 0.0) e += gamma * transport_apply(u, v).values.abs().sum();
  if (time_weight != 0.0) {
    Buffer<double> ut(g.size());
    time_forward<double>(g, u.values, ut);
    e += time_weight * ut.abs().sum();
  }
  return e;
}

double operator_norm_u(const Grid& grid, const ForwardOperator& K, const FlowField& v, double gamma,
                       double time_weight, int iterations, std::uint64_t seed) {
  const detail::StackedOperatorU C(grid, K, v, gamma != 0.0, time_weight != 0.0);
  return C.norm_estimate(iterations, seed);
}

USolution solve_u(const ImageSequence& f, const ForwardOperator& K, const FlowField& v,
                  const ImageSequence& u0, const PDParamsU& params, DualState* duals) {
  const Grid& g = u0.grid;
  require_same_grid(g, v.grid, "solve_u");
  require_same_grid(K.range_grid(g), f.grid, "solve_u (data)");
  if (!(params.eps_u > 0)) throw ConfigError("eps_u must be positive");
  if (params.max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (params.gamma < 0 || params.time_weight < 0) throw ConfigError("weights must be >= 0");
  const Buffer<double> alpha =
      expand_frame_weights(params.alpha.size() ? params.alpha : Buffer<double>::Zero(1), g.frames());

  const detail::StackedOperatorU C(g, K, v, params.gamma != 0.0, params.time_weight != 0.0);
  const double norm = C.norm_estimate(params.norm_iterations, params.norm_seed);

  double sigma = params.sigma;
  double tau = params.tau;
  if (sigma == 0.0 && tau == 0.0) {
    sigma = tau = params.step_factor / norm;
  }
  if (!(sigma > 0) || !(tau > 0)) throw ConfigError("step sizes must be positive");
  if (sigma * tau * norm * norm > 1.0 + 1e-12) {
    throw ConfigError("step sizes violate sigma*tau*|C|^2 <= 1 (sigma=" + std::to_string(sigma) +
                      ", tau=" + std::to_string(tau) + ", |C|=" + std::to_string(norm) + ")");
  }

  std::vector<int> order = params.dual_order;
  if (order.empty()) {
    for (int k = 0; k < static_cast<int>(C.block_count()); ++k) order.push_back(k);
  }

  DualState y = C.make_dual();
  if (params.warm_start_duals && duals != nullptr && duals->size() == y.size()) {
    bool fits = true;
    for (std::size_t k = 0; k < y.size(); ++k) fits = fits && (*duals)[k].values.size() == y[k].values.size();
    if (fits) y = *duals;
  }
  DualState y_old = y;
  DualState cu_prev = C.make_dual();
  DualState cu_cur = C.make_dual();
  DualState cu_new = C.make_dual();
  DualState bar = C.make_dual();

  Buffer<double> u = u0.values;
  Buffer<double> u_new(g.size());
  Buffer<double> cty(g.size());
  Buffer<double> cty_new(g.size());
  C.adjoint(y, cty);
  C.apply(u, cu_cur);

  const double n_points = static_cast<double>(g.size());
  USolution out;
  SolveReport& report = out.report;
  report.sigma = sigma;
  report.tau = tau;
  report.operator_norm = norm;

  for (int it = 0; it < params.max_iters; ++it) {
    // C applied to the over-relaxed iterate; it starts at zero.
    for (std::size_t k = 0; k < y.size(); ++k) {
      if (it == 0 && !params.warm_start_duals) {
        bar[k].values.setZero();
      } else if (it == 0) {
        bar[k].values = cu_cur[k].values;
      } else {
        bar[k].values = 2.0 * cu_cur[k].values - cu_prev[k].values;
      }
      y_old[k].values = y[k].values;
    }

    for (int k : order) {
      DualBlock& yk = y[static_cast<std::size_t>(k)];
      yk.values += sigma * bar[static_cast<std::size_t>(k)].values;
      switch (C.role(static_cast<std::size_t>(k))) {
        case detail::BlockRole::data:
          yk.values = (yk.values - sigma * f.values) / (sigma + 1.0);
          break;
        case detail::BlockRole::tv:
          project_ball_per_frame(yk, alpha, g.frame_size());
          break;
        case detail::BlockRole::transport:
          project_ball(yk, params.gamma);
          break;
        case detail::BlockRole::time:
          project_ball(yk, params.time_weight);
          break;
      }
    }

    C.adjoint(y, cty_new);
    u_new = u - tau * cty_new;
    C.apply(u_new, cu_new);

    double primal = ((u - u_new) / tau - (cty - cty_new)).abs().sum();
    double dual = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      dual += ((y_old[k].values - y[k].values) / sigma - (cu_cur[k].values - cu_new[k].values)).abs().sum();
    }
    const double residual = (primal + dual) / n_points;
    if (!std::isfinite(residual)) {
      throw DivergenceError("solve_u: non-finite iterate", it + 1);
    }

    std::swap(cu_prev, cu_cur);
    std::swap(cu_cur, cu_new);
    std::swap(cty, cty_new);
    std::swap(u, u_new);

    report.iterations = it + 1;
    report.residual = residual;
    if (params.history_stride > 0 && (it % params.history_stride == 0)) {
      const ImageSequence cur(g, u);
      report.history.push_back(
          {it + 1, residual, energy_u(cur, f, K, v, alpha, params.gamma, params.time_weight)});
    }
    if (residual < params.eps_u) {
      report.converged = true;
      break;
    }
  }

  if (duals != nullptr) *duals = y;
  out.u = ImageSequence(g, std::move(u));
  report.energy = energy_u(out.u, f, K, v, alpha, params.gamma, params.time_weight);
  return out;
}

}  // namespace tvflow
