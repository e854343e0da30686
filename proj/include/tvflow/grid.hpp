#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tvflow/errors.hpp"

namespace tvflow {

using Index = Eigen::Index;

template <typename Scalar>
using Buffer = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

/// Row-major 2D frame: rows are j (y), columns are i (x), so i is the
/// fastest-varying index, matching the sequence layout.
template <typename Scalar>
using FrameT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using FrameMap = Eigen::Map<FrameT<Scalar>>;
template <typename Scalar>
using ConstFrameMap = Eigen::Map<const FrameT<Scalar>>;

/// Space-time grid with points i = 0..nx, j = 0..ny, t = 0..nt and unit
/// spacing in every direction.
///
/// Storage order of every field on the grid is (t, j, i) with i fastest:
///   index(i, j, t) = (t * (ny + 1) + j) * (nx + 1) + i
/// This layout is frozen; golden files depend on it.
struct Grid {
  Index nx = 1;
  Index ny = 1;
  Index nt = 1;

  Grid() = default;
  Grid(Index nx_, Index ny_, Index nt_) : nx(nx_), ny(ny_), nt(nt_) {
    if (nx < 1 || ny < 1 || nt < 1) {
      throw ContractViolation("Grid requires nx, ny, nt >= 1 (got " + std::to_string(nx) + ", " +
                              std::to_string(ny) + ", " + std::to_string(nt) + ")");
    }
  }

  /// Grid with the given frame size in pixels.
  static Grid from_shape(Index width, Index height, Index frames) {
    return Grid(width - 1, height - 1, frames - 1);
  }

  Index width() const { return nx + 1; }
  Index height() const { return ny + 1; }
  Index frames() const { return nt + 1; }
  Index frame_size() const { return width() * height(); }
  Index size() const { return frame_size() * frames(); }

  Index index(Index i, Index j, Index t) const { return (t * height() + j) * width() + i; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

inline std::string to_string(const Grid& g) {
  return std::to_string(g.width()) + "x" + std::to_string(g.height()) + "x" +
         std::to_string(g.frames());
}

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) {
    throw ContractViolation(std::string(what) + ": grid mismatch (" + to_string(a) + " vs " +
                            to_string(b) + ")");
  }
}

/// Scalar field u on a space-time grid.
template <typename Scalar>
struct ImageSequenceT {
  Grid grid;
  Buffer<Scalar> values;

  ImageSequenceT() = default;
  explicit ImageSequenceT(const Grid& g) : grid(g), values(Buffer<Scalar>::Zero(g.size())) {}
  ImageSequenceT(const Grid& g, Buffer<Scalar> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size()) {
      throw ContractViolation("ImageSequence: buffer length does not match grid");
    }
  }

  static ImageSequenceT constant(const Grid& g, Scalar c) {
    return ImageSequenceT(g, Buffer<Scalar>::Constant(g.size(), c));
  }

  Scalar& operator()(Index i, Index j, Index t) { return values[grid.index(i, j, t)]; }
  Scalar operator()(Index i, Index j, Index t) const { return values[grid.index(i, j, t)]; }

  FrameMap<Scalar> frame(Index t) {
    return FrameMap<Scalar>(values.data() + t * grid.frame_size(), grid.height(), grid.width());
  }
  ConstFrameMap<Scalar> frame(Index t) const {
    return ConstFrameMap<Scalar>(values.data() + t * grid.frame_size(), grid.height(),
                                 grid.width());
  }

  bool all_finite() const { return values.isFinite().all(); }
};

/// Two-channel flow v = (v1, v2) in pixels/frame; frame t holds the motion
/// from frame t to t + 1.
template <typename Scalar>
struct FlowFieldT {
  Grid grid;
  Buffer<Scalar> v1;
  Buffer<Scalar> v2;

  FlowFieldT() = default;
  explicit FlowFieldT(const Grid& g)
      : grid(g), v1(Buffer<Scalar>::Zero(g.size())), v2(Buffer<Scalar>::Zero(g.size())) {}
  FlowFieldT(const Grid& g, Buffer<Scalar> a, Buffer<Scalar> b)
      : grid(g), v1(std::move(a)), v2(std::move(b)) {
    if (v1.size() != grid.size() || v2.size() != grid.size()) {
      throw ContractViolation("FlowField: channel length does not match grid");
    }
  }

  static FlowFieldT constant(const Grid& g, Scalar a, Scalar b) {
    return FlowFieldT(g, Buffer<Scalar>::Constant(g.size(), a), Buffer<Scalar>::Constant(g.size(), b));
  }

  bool all_finite() const { return v1.isFinite().all() && v2.isFinite().all(); }
};

/// Per-frame spatial gradient channels.
template <typename Scalar>
struct GradientFieldT {
  Grid grid;
  Buffer<Scalar> gx;
  Buffer<Scalar> gy;

  GradientFieldT() = default;
  explicit GradientFieldT(const Grid& g)
      : grid(g), gx(Buffer<Scalar>::Zero(g.size())), gy(Buffer<Scalar>::Zero(g.size())) {}
};

enum class BlockShape { scalar = 1, vector2 = 2, vector4 = 4 };

inline Index channel_count(BlockShape s) { return static_cast<Index>(s); }

/// One dual variable block: `channels` consecutive planes of `points` values.
template <typename Scalar>
struct DualBlockT {
  BlockShape shape = BlockShape::scalar;
  Index points = 0;
  Buffer<Scalar> values;

  DualBlockT() = default;
  DualBlockT(BlockShape s, Index n)
      : shape(s), points(n), values(Buffer<Scalar>::Zero(channel_count(s) * n)) {}

  Index channels() const { return channel_count(shape); }
  auto channel(Index c) { return values.segment(c * points, points); }
  auto channel(Index c) const { return values.segment(c * points, points); }
  void set_zero() { values.setZero(); }
};

/// Stacked dual variables of one primal-dual solve, one block per dualized term.
template <typename Scalar>
struct DualStateT {
  std::vector<DualBlockT<Scalar>> blocks;

  DualBlockT<Scalar>& operator[](std::size_t k) { return blocks[k]; }
  const DualBlockT<Scalar>& operator[](std::size_t k) const { return blocks[k]; }
  std::size_t size() const { return blocks.size(); }
  void set_zero() {
    for (auto& b : blocks) b.set_zero();
  }
};

using ImageSequence = ImageSequenceT<double>;
using FlowField = FlowFieldT<double>;
using GradientField = GradientFieldT<double>;
using DualBlock = DualBlockT<double>;
using DualState = DualStateT<double>;
using Frame = FrameT<double>;

// ---------------------------------------------------------------------------
// Linear-algebra contract.

/// Sum of a_k * b_k in a single sequential pass (fixed order, reproducible).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar inner_product(const Eigen::DenseBase<DerivedA>& a,
                                        const Eigen::DenseBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw ContractViolation("inner_product: length mismatch (" + std::to_string(a.size()) +
                            " vs " + std::to_string(b.size()) + ")");
  }
  using Scalar = typename DerivedA::Scalar;
  Scalar acc(0);
  const Index n = a.size();
  for (Index k = 0; k < n; ++k) acc += a.derived().coeff(k) * b.derived().coeff(k);
  return acc;
}

template <typename Scalar>
struct Norms {
  Scalar l1 = 0;
  Scalar l2 = 0;
  Scalar linf = 0;
};

template <typename Derived>
Norms<typename Derived::Scalar> norms(const Eigen::DenseBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  Norms<Scalar> out;
  Scalar sq(0);
  for (Index k = 0; k < x.size(); ++k) {
    const Scalar v = x.derived().coeff(k);
    if (!std::isfinite(v)) throw ContractViolation("norms: non-finite entry");
    const Scalar a = std::abs(v);
    out.l1 += a;
    sq += v * v;
    if (a > out.linf) out.linf = a;
  }
  out.l2 = std::sqrt(sq);
  return out;
}

}  // namespace tvflow
