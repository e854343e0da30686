#include "tvflow/solver_v.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "tvflow/diff_ops.hpp"
#include "tvflow/prox.hpp"

namespace tvflow {

namespace {

// C_v v = (grad v1, grad v2) into a 4-channel block.
void apply_cv(const Grid& g, const Buffer<double>& v1, const Buffer<double>& v2, DualBlock& out) {
  grad_forward<double>(g, v1, out.channel(0), out.channel(1));
  grad_forward<double>(g, v2, out.channel(2), out.channel(3));
}

// C_v^T y = (-div(y0, y1), -div(y2, y3)).
void adjoint_cv(const Grid& g, const DualBlock& y, Buffer<double>& a1, Buffer<double>& a2) {
  a1.resize(g.size());
  a2.resize(g.size());
  div_backward<double>(g, y.channel(0), y.channel(1), a1);
  div_backward<double>(g, y.channel(2), y.channel(3), a2);
  a1 = -a1;
  a2 = -a2;
}

}  // namespace

double flow_total_variation(const FlowField& v) {
  const Grid& g = v.grid;
  DualBlock cv(BlockShape::vector4, g.size());
  apply_cv(g, v.v1, v.v2, cv);
  return (cv.channel(0).square() + cv.channel(1).square() + cv.channel(2).square() +
          cv.channel(3).square())
      .sqrt()
      .sum();
}

double energy_v(const FlowField& v, const ImageSequence& u, double lambda) {
  require_same_grid(u.grid, v.grid, "energy_v");
  const auto c = transport_coefficients(u);
  const double data = (c.ut + c.ux * v.v1 + c.uy * v.v2).abs().sum();
  return data + lambda * flow_total_variation(v);
}

double operator_norm_v(const Grid& grid, int iterations, std::uint64_t seed) {
  using Key = std::tuple<Index, Index, Index, int, std::uint64_t>;
  static std::mutex mutex;
  static std::map<Key, double> cache;
  const Key key{grid.nx, grid.ny, grid.nt, iterations, seed};
  {
    std::lock_guard<std::mutex> lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const Index n = grid.size();
  auto apply = [&](const Eigen::VectorXd& x) {
    DualBlock out(BlockShape::vector4, n);
    apply_cv(grid, x.head(n).array(), x.tail(n).array(), out);
    return Eigen::VectorXd(out.values.matrix());
  };
  auto adjoint = [&](const Eigen::VectorXd& r) {
    DualBlock y(BlockShape::vector4, n);
    y.values = r.array();
    Buffer<double> a1, a2;
    adjoint_cv(grid, y, a1, a2);
    Eigen::VectorXd out(2 * n);
    out << a1.matrix(), a2.matrix();
    return out;
  };
  const double norm = operator_norm_estimate(apply, adjoint, 2 * n, iterations, seed);
  std::lock_guard<std::mutex> lock(mutex);
  cache[key] = norm;
  return norm;
}

VSolution solve_v(const ImageSequence& u, const FlowField& v0, const PDParamsV& params,
                  DualBlock* duals) {
  const Grid& g = u.grid;
  require_same_grid(g, v0.grid, "solve_v");
  if (!(params.lambda > 0)) throw ConfigError("lambda must be positive");
  if (!(params.eps_v > 0)) throw ConfigError("eps_v must be positive");
  if (params.max_iters < 1) throw ConfigError("max_iters must be >= 1");

  const double norm = operator_norm_v(g, params.norm_iterations, params.norm_seed);
  double sigma = params.sigma;
  double tau = params.tau;
  if (sigma == 0.0 && tau == 0.0) sigma = tau = params.step_factor / norm;
  if (!(sigma > 0) || !(tau > 0)) throw ConfigError("step sizes must be positive");
  if (sigma * tau * norm * norm > 1.0 + 1e-12) {
    throw ConfigError("step sizes violate sigma*tau*|C|^2 <= 1");
  }

  auto coeffs = transport_coefficients(u);
  const ShrinkageData data(std::move(coeffs.ut), std::move(coeffs.ux), std::move(coeffs.uy));

  const Index n = g.size();
  DualBlock y(BlockShape::vector4, n);
  if (params.warm_start_duals && duals != nullptr && duals->values.size() == y.values.size()) y = *duals;
  DualBlock y_old = y;
  DualBlock cv_prev(BlockShape::vector4, n);
  DualBlock cv_cur(BlockShape::vector4, n);
  DualBlock cv_new(BlockShape::vector4, n);

  Buffer<double> v1 = v0.v1;
  Buffer<double> v2 = v0.v2;
  Buffer<double> w1(n), w2(n);
  Buffer<double> a1, a2, a1_new, a2_new;
  adjoint_cv(g, y, a1, a2);
  apply_cv(g, v1, v2, cv_cur);

  VSolution out;
  SolveReport& report = out.report;
  report.sigma = sigma;
  report.tau = tau;
  report.operator_norm = norm;

  for (int it = 0; it < params.max_iters; ++it) {
    y_old.values = y.values;
    if (it == 0 && !params.warm_start_duals) {
      // over-relaxed iterate starts at zero
    } else if (it == 0) {
      y.values += sigma * cv_cur.values;
    } else {
      y.values += sigma * (2.0 * cv_cur.values - cv_prev.values);
    }
    project_ball(y, params.lambda);
    if (params.track_dual_bound) {
      const Buffer<double> mag = (y.channel(0).square() + y.channel(1).square() +
                                  y.channel(2).square() + y.channel(3).square())
                                     .sqrt();
      out.max_dual_norm = std::max(out.max_dual_norm, mag.maxCoeff());
    }

    adjoint_cv(g, y, a1_new, a2_new);
    w1 = v1 - tau * a1_new;
    w2 = v2 - tau * a2_new;
    shrink_affine(w1, w2, data, tau);
    apply_cv(g, w1, w2, cv_new);

    const double primal = ((v1 - w1) / tau - (a1 - a1_new)).abs().sum() +
                          ((v2 - w2) / tau - (a2 - a2_new)).abs().sum();
    const double dual =
        ((y_old.values - y.values) / sigma - (cv_cur.values - cv_new.values)).abs().sum();
    const double residual = (primal + dual) / static_cast<double>(n);
    if (!std::isfinite(residual)) throw DivergenceError("solve_v: non-finite iterate", it + 1);

    std::swap(cv_prev, cv_cur);
    std::swap(cv_cur, cv_new);
    std::swap(a1, a1_new);
    std::swap(a2, a2_new);
    std::swap(v1, w1);
    std::swap(v2, w2);

    report.iterations = it + 1;
    report.residual = residual;
    if (params.history_stride > 0 && it % params.history_stride == 0) {
      report.history.push_back({it + 1, residual, energy_v(FlowField(g, v1, v2), u, params.lambda)});
    }
    if (residual < params.eps_v) {
      report.converged = true;
      break;
    }
  }

  if (duals != nullptr) *duals = y;
  out.v = FlowField(g, std::move(v1), std::move(v2));
  report.energy = energy_v(out.v, u, params.lambda);
  return out;
}

}  // namespace tvflow
