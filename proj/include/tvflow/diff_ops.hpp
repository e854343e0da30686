#pragma once

// Finite-difference operators on the space-time grid and their exact adjoints.
//
//   grad_forward      forward differences per frame, zero on the last column/row
//   div_backward      backward differences, equal to -grad_forward^T
//   time_forward      u(t+1) - u(t), zero at t = nt
//   central_x/_y      (u(i+1) - u(i-1)) / 2 on interior points with t < nt, else zero
//   transport_apply   D_t u + v1 * D_x u + v2 * D_y u, v frozen
//   transport_adjoint D_t^T y + D_x^T (v1 y) + D_y^T (v2 y)

#include "tvflow/grid.hpp"

namespace tvflow {

template <typename Scalar>
using BufferRef = Eigen::Ref<Buffer<Scalar>>;
template <typename Scalar>
using ConstBufferRef = Eigen::Ref<const Buffer<Scalar>>;

namespace detail {
inline void require_len(const Grid& g, Index n, const char* what) {
  if (n != g.size()) throw ContractViolation(std::string(what) + ": buffer length does not match grid");
}
}  // namespace detail

template <typename Scalar>
void grad_forward(const Grid& g, ConstBufferRef<Scalar> in, BufferRef<Scalar> gx,
                  BufferRef<Scalar> gy) {
  detail::require_len(g, in.size(), "grad_forward");
  detail::require_len(g, gx.size(), "grad_forward");
  detail::require_len(g, gy.size(), "grad_forward");
  const Index w = g.width();
  const Index h = g.height();
  for (Index t = 0; t < g.frames(); ++t) {
    const Scalar* u = in.data() + t * g.frame_size();
    Scalar* ox = gx.data() + t * g.frame_size();
    Scalar* oy = gy.data() + t * g.frame_size();
    for (Index j = 0; j < h; ++j) {
      const Scalar* row = u + j * w;
      for (Index i = 0; i + 1 < w; ++i) ox[j * w + i] = row[i + 1] - row[i];
      ox[j * w + w - 1] = Scalar(0);
      if (j + 1 < h) {
        const Scalar* next = row + w;
        for (Index i = 0; i < w; ++i) oy[j * w + i] = next[i] - row[i];
      } else {
        for (Index i = 0; i < w; ++i) oy[j * w + i] = Scalar(0);
      }
    }
  }
}

/// Backward-difference divergence with the boundary cases
///   i = 0: y1(0, j);  0 < i < nx: y1(i, j) - y1(i-1, j);  i = nx: -y1(nx-1, j)
/// and the same in j for y2. Satisfies <grad u, y> = <u, -div y>.
template <typename Scalar>
void div_backward(const Grid& g, ConstBufferRef<Scalar> y1, ConstBufferRef<Scalar> y2,
                  BufferRef<Scalar> out) {
  detail::require_len(g, y1.size(), "div_backward");
  detail::require_len(g, y2.size(), "div_backward");
  detail::require_len(g, out.size(), "div_backward");
  const Index w = g.width();
  const Index h = g.height();
  for (Index t = 0; t < g.frames(); ++t) {
    const Scalar* a = y1.data() + t * g.frame_size();
    const Scalar* b = y2.data() + t * g.frame_size();
    Scalar* o = out.data() + t * g.frame_size();
    for (Index j = 0; j < h; ++j) {
      const Scalar* ar = a + j * w;
      Scalar* orow = o + j * w;
      orow[0] = ar[0];
      for (Index i = 1; i + 1 < w; ++i) orow[i] = ar[i] - ar[i - 1];
      orow[w - 1] = -ar[w - 2];
      const Scalar* br = b + j * w;
      if (j == 0) {
        for (Index i = 0; i < w; ++i) orow[i] += br[i];
      } else if (j + 1 < h) {
        for (Index i = 0; i < w; ++i) orow[i] += br[i] - br[i - w];
      } else {
        for (Index i = 0; i < w; ++i) orow[i] -= br[i - w];
      }
    }
  }
}

template <typename Scalar>
void time_forward(const Grid& g, ConstBufferRef<Scalar> in, BufferRef<Scalar> out) {
  detail::require_len(g, in.size(), "time_forward");
  detail::require_len(g, out.size(), "time_forward");
  const Index fs = g.frame_size();
  const Index n = g.nt * fs;
  out.head(n) = in.segment(fs, n) - in.head(n);
  out.tail(fs).setZero();
}

/// Adjoint of time_forward: -y(t) for t < nt, plus y(t-1) for t > 0.
template <typename Scalar>
void time_forward_adjoint(const Grid& g, ConstBufferRef<Scalar> y, BufferRef<Scalar> out) {
  detail::require_len(g, y.size(), "time_forward_adjoint");
  detail::require_len(g, out.size(), "time_forward_adjoint");
  const Index fs = g.frame_size();
  const Index n = g.nt * fs;
  out.head(n) = -y.head(n);
  out.tail(fs).setZero();
  out.tail(n) += y.head(n);
}

/// Central x-difference: (u(i+1) - u(i-1)) / 2 for 0 < i < nx and t < nt, else zero.
template <typename Scalar>
void central_x(const Grid& g, ConstBufferRef<Scalar> in, BufferRef<Scalar> out) {
  detail::require_len(g, in.size(), "central_x");
  detail::require_len(g, out.size(), "central_x");
  out.setZero();
  for (Index t = 0; t < g.nt; ++t) {
    for (Index j = 0; j < g.height(); ++j) {
      const Index base = g.index(0, j, t);
      for (Index i = 1; i < g.nx; ++i) {
        out[base + i] = (in[base + i + 1] - in[base + i - 1]) / Scalar(2);
      }
    }
  }
}

/// Central y-difference: (u(j+1) - u(j-1)) / 2 for 0 < j < ny and t < nt, else zero.
template <typename Scalar>
void central_y(const Grid& g, ConstBufferRef<Scalar> in, BufferRef<Scalar> out) {
  detail::require_len(g, in.size(), "central_y");
  detail::require_len(g, out.size(), "central_y");
  const Index w = g.width();
  out.setZero();
  for (Index t = 0; t < g.nt; ++t) {
    for (Index j = 1; j < g.ny; ++j) {
      const Index base = g.index(0, j, t);
      for (Index i = 0; i < w; ++i) out[base + i] = (in[base + i + w] - in[base + i - w]) / Scalar(2);
    }
  }
}

/// Accumulates central_x^T(w) into out (scatter form).
template <typename Scalar>
void central_x_adjoint_add(const Grid& g, ConstBufferRef<Scalar> w, BufferRef<Scalar> out) {
  for (Index t = 0; t < g.nt; ++t) {
    for (Index j = 0; j < g.height(); ++j) {
      const Index base = g.index(0, j, t);
      for (Index i = 1; i < g.nx; ++i) {
        const Scalar half = w[base + i] / Scalar(2);
        out[base + i + 1] += half;
        out[base + i - 1] -= half;
      }
    }
  }
}

/// Accumulates central_y^T(w) into out (scatter form).
template <typename Scalar>
void central_y_adjoint_add(const Grid& g, ConstBufferRef<Scalar> w, BufferRef<Scalar> out) {
  const Index width = g.width();
  for (Index t = 0; t < g.nt; ++t) {
    for (Index j = 1; j < g.ny; ++j) {
      const Index base = g.index(0, j, t);
      for (Index i = 0; i < width; ++i) {
        const Scalar half = w[base + i] / Scalar(2);
        out[base + i + width] += half;
        out[base + i - width] -= half;
      }
    }
  }
}

/// Linearized optical-flow coefficients of a sequence: rho(v) = ut + ux v1 + uy v2.
template <typename Scalar>
struct TransportCoefficientsT {
  Buffer<Scalar> ut;
  Buffer<Scalar> ux;
  Buffer<Scalar> uy;
};

template <typename Scalar>
TransportCoefficientsT<Scalar> transport_coefficients(const ImageSequenceT<Scalar>& u) {
  const Grid& g = u.grid;
  TransportCoefficientsT<Scalar> c{Buffer<Scalar>(g.size()), Buffer<Scalar>(g.size()),
                                   Buffer<Scalar>(g.size())};
  time_forward<Scalar>(g, u.values, c.ut);
  central_x<Scalar>(g, u.values, c.ux);
  central_y<Scalar>(g, u.values, c.uy);
  return c;
}

template <typename Scalar>
void transport_apply(const Grid& g, ConstBufferRef<Scalar> u, ConstBufferRef<Scalar> v1,
                     ConstBufferRef<Scalar> v2, BufferRef<Scalar> out, Buffer<Scalar>& scratch) {
  detail::require_len(g, v1.size(), "transport_apply");
  detail::require_len(g, v2.size(), "transport_apply");
  scratch.resize(g.size());
  time_forward<Scalar>(g, u, out);
  central_x<Scalar>(g, u, scratch);
  out += v1 * scratch;
  central_y<Scalar>(g, u, scratch);
  out += v2 * scratch;
}

template <typename Scalar>
void transport_adjoint(const Grid& g, ConstBufferRef<Scalar> y, ConstBufferRef<Scalar> v1,
                       ConstBufferRef<Scalar> v2, BufferRef<Scalar> out, Buffer<Scalar>& scratch) {
  detail::require_len(g, y.size(), "transport_adjoint");
  detail::require_len(g, v1.size(), "transport_adjoint");
  detail::require_len(g, v2.size(), "transport_adjoint");
  time_forward_adjoint<Scalar>(g, y, out);
  scratch = v1 * y;
  central_x_adjoint_add<Scalar>(g, scratch, out);
  scratch = v2 * y;
  central_y_adjoint_add<Scalar>(g, scratch, out);
}

// Value-returning forms.

template <typename Scalar>
GradientFieldT<Scalar> grad_forward(const ImageSequenceT<Scalar>& u) {
  GradientFieldT<Scalar> out(u.grid);
  grad_forward<Scalar>(u.grid, u.values, out.gx, out.gy);
  return out;
}

template <typename Scalar>
ImageSequenceT<Scalar> div_backward(const GradientFieldT<Scalar>& y) {
  ImageSequenceT<Scalar> out(y.grid);
  div_backward<Scalar>(y.grid, y.gx, y.gy, out.values);
  return out;
}

template <typename Scalar>
ImageSequenceT<Scalar> transport_apply(const ImageSequenceT<Scalar>& u, const FlowFieldT<Scalar>& v) {
  require_same_grid(u.grid, v.grid, "transport_apply");
  ImageSequenceT<Scalar> out(u.grid);
  Buffer<Scalar> scratch;
  transport_apply<Scalar>(u.grid, u.values, v.v1, v.v2, out.values, scratch);
  return out;
}

template <typename Scalar>
ImageSequenceT<Scalar> transport_adjoint(const ImageSequenceT<Scalar>& y, const FlowFieldT<Scalar>& v) {
  require_same_grid(y.grid, v.grid, "transport_adjoint");
  ImageSequenceT<Scalar> out(y.grid);
  Buffer<Scalar> scratch;
  transport_adjoint<Scalar>(y.grid, y.values, v.v1, v.v2, out.values, scratch);
  return out;
}

}  // namespace tvflow
