#pragma once

// Closed-form proximal maps shared by the u- and v-solvers.

#include <algorithm>
#include <cmath>

#include "tvflow/grid.hpp"

namespace tvflow {

/// Prox of sigma * (1/2 |y|^2 + <y, f>): (y_tilde - sigma f) / (sigma + 1).
template <typename DerivedY, typename DerivedF>
Buffer<typename DerivedY::Scalar> prox_l2_data(const Eigen::ArrayBase<DerivedY>& y_tilde,
                                               const Eigen::ArrayBase<DerivedF>& f,
                                               typename DerivedY::Scalar sigma) {
  if (!(sigma > 0)) throw ContractViolation("prox_l2_data: sigma must be positive");
  if (y_tilde.size() != f.size()) throw ContractViolation("prox_l2_data: length mismatch");
  return (y_tilde - sigma * f) / (sigma + 1);
}

/// Projects every point of a dual block onto the Euclidean ball of the given
/// radius, taking the norm over the block's channels. A scalar block is clamped
/// to [-radius, radius].
template <typename Scalar>
void project_ball(DualBlockT<Scalar>& y, Scalar radius) {
  if (radius < 0) throw ContractViolation("project_ball: negative radius");
  const Index n = y.points;
  const Index c = y.channels();
  Scalar* d = y.values.data();
  if (c == 1) {
    for (Index p = 0; p < n; ++p) d[p] = std::clamp(d[p], -radius, radius);
    return;
  }
  for (Index p = 0; p < n; ++p) {
    Scalar sq(0);
    for (Index k = 0; k < c; ++k) sq += d[k * n + p] * d[k * n + p];
    if (sq > radius * radius) {
      const Scalar s = radius / std::sqrt(sq);
      for (Index k = 0; k < c; ++k) d[k * n + p] *= s;
    }
  }
}

/// As project_ball, with one radius per frame of `frame_size` consecutive points.
template <typename Scalar>
void project_ball_per_frame(DualBlockT<Scalar>& y, const Buffer<Scalar>& radii, Index frame_size) {
  if (radii.size() * frame_size != y.points) {
    throw ContractViolation("project_ball_per_frame: radii do not cover the block");
  }
  if ((radii < 0).any()) throw ContractViolation("project_ball_per_frame: negative radius");
  const Index n = y.points;
  const Index c = y.channels();
  Scalar* d = y.values.data();
  for (Index f = 0; f < radii.size(); ++f) {
    const Scalar r = radii[f];
    for (Index p = f * frame_size; p < (f + 1) * frame_size; ++p) {
      Scalar sq(0);
      for (Index k = 0; k < c; ++k) sq += d[k * n + p] * d[k * n + p];
      if (sq > r * r) {
        const Scalar s = r > 0 ? r / std::sqrt(sq) : Scalar(0);
        for (Index k = 0; k < c; ++k) d[k * n + p] *= s;
      }
    }
  }
}

/// Single-vector form of the ball projection.
template <typename Derived>
Eigen::Array<typename Derived::Scalar, Derived::RowsAtCompileTime, 1> project_linf_ball(
    const Eigen::ArrayBase<Derived>& y_tilde, typename Derived::Scalar radius) {
  if (radius < 0) throw ContractViolation("project_linf_ball: negative radius");
  const auto n = std::sqrt(y_tilde.square().sum());
  if (n > radius) return y_tilde * (radius / n);
  return y_tilde;
}

enum class ShrinkBranch { plus, minus, middle, degenerate };

template <typename Scalar>
struct ShrinkResult {
  Scalar v1;
  Scalar v2;
  ShrinkBranch branch;
};

/// Pointwise affine shrinkage: the minimizer of
///   1/2 |v - v_tilde|^2 + tau |ut + b . v|.
/// |b| = 0 leaves v_tilde unchanged; |rho| = tau |b|^2 takes the middle branch.
template <typename Scalar>
ShrinkResult<Scalar> shrink_affine_point(Scalar vt1, Scalar vt2, Scalar ut, Scalar b1, Scalar b2,
                                         Scalar tau) {
  const Scalar bb = b1 * b1 + b2 * b2;
  if (bb == Scalar(0)) return {vt1, vt2, ShrinkBranch::degenerate};
  const Scalar rho = ut + b1 * vt1 + b2 * vt2;
  const Scalar thr = tau * bb;
  if (rho < -thr) return {vt1 + tau * b1, vt2 + tau * b2, ShrinkBranch::plus};
  if (rho > thr) return {vt1 - tau * b1, vt2 - tau * b2, ShrinkBranch::minus};
  const Scalar c = rho / bb;
  return {vt1 - c * b1, vt2 - c * b2, ShrinkBranch::middle};
}

/// Coefficients of rho(v) = ut + beta . v at every point, with |beta|^2 cached.
template <typename Scalar>
struct ShrinkageDataT {
  Buffer<Scalar> rho0;  // ut
  Buffer<Scalar> beta1;
  Buffer<Scalar> beta2;
  Buffer<Scalar> beta_norm_sq;

  ShrinkageDataT() = default;
  ShrinkageDataT(Buffer<Scalar> ut, Buffer<Scalar> b1, Buffer<Scalar> b2)
      : rho0(std::move(ut)), beta1(std::move(b1)), beta2(std::move(b2)) {
    if (rho0.size() != beta1.size() || rho0.size() != beta2.size()) {
      throw ContractViolation("ShrinkageData: length mismatch");
    }
    beta_norm_sq = beta1.square() + beta2.square();
  }
};

using ShrinkageData = ShrinkageDataT<double>;

/// In-place affine shrinkage of a flow buffer pair.
template <typename Scalar>
void shrink_affine(Buffer<Scalar>& v1, Buffer<Scalar>& v2, const ShrinkageDataT<Scalar>& data,
                   Scalar tau) {
  if (!(tau > 0)) throw ContractViolation("shrink_affine: tau must be positive");
  const Index n = v1.size();
  if (v2.size() != n || data.rho0.size() != n) throw ContractViolation("shrink_affine: length mismatch");
  for (Index p = 0; p < n; ++p) {
    const Scalar bb = data.beta_norm_sq[p];
    if (bb == Scalar(0)) continue;
    const Scalar b1 = data.beta1[p];
    const Scalar b2 = data.beta2[p];
    const Scalar rho = data.rho0[p] + b1 * v1[p] + b2 * v2[p];
    const Scalar thr = tau * bb;
    if (rho < -thr) {
      v1[p] += tau * b1;
      v2[p] += tau * b2;
    } else if (rho > thr) {
      v1[p] -= tau * b1;
      v2[p] -= tau * b2;
    } else {
      const Scalar c = rho / bb;
      v1[p] -= c * b1;
      v2[p] -= c * b2;
    }
  }
}

template <typename Scalar>
FlowFieldT<Scalar> shrink_affine(const FlowFieldT<Scalar>& v_tilde, const ShrinkageDataT<Scalar>& data,
                                 Scalar tau) {
  FlowFieldT<Scalar> out = v_tilde;
  shrink_affine(out.v1, out.v2, data, tau);
  return out;
}

}  // namespace tvflow
