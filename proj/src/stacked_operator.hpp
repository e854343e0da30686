#pragma once

// Stacked linear operator of the image subproblem, C = (K, grad, transport(v), D_t),
// with only the active rows present.

#include <vector>

#include "tvflow/diff_ops.hpp"
#include "tvflow/forward_model.hpp"
#include "tvflow/power_iteration.hpp"

namespace tvflow::detail {

enum class BlockRole { data, tv, transport, time };

class StackedOperatorU {
 public:
  StackedOperatorU(const Grid& g, const ForwardOperator& K, const FlowField& v, bool transport,
                   bool time)
      : grid_(g), range_(K.range_grid(g)), K_(K), v_(v) {
    roles_.push_back(BlockRole::data);
    roles_.push_back(BlockRole::tv);
    if (transport) roles_.push_back(BlockRole::transport);
    if (time) roles_.push_back(BlockRole::time);
    scratch_.resize(g.size());
    tmp_.resize(g.size());
  }

  std::size_t block_count() const { return roles_.size(); }
  BlockRole role(std::size_t k) const { return roles_[k]; }

  DualState make_dual() const {
    DualState y;
    for (BlockRole r : roles_) {
      switch (r) {
        case BlockRole::data: y.blocks.emplace_back(BlockShape::scalar, range_.size()); break;
        case BlockRole::tv: y.blocks.emplace_back(BlockShape::vector2, grid_.size()); break;
        default: y.blocks.emplace_back(BlockShape::scalar, grid_.size()); break;
      }
    }
    return y;
  }

  void apply(const Buffer<double>& u, DualState& out) const {
    for (std::size_t k = 0; k < roles_.size(); ++k) {
      DualBlock& b = out[k];
      switch (roles_[k]) {
        case BlockRole::data: K_.apply(grid_, u, b.values); break;
        case BlockRole::tv: grad_forward<double>(grid_, u, b.channel(0), b.channel(1)); break;
        case BlockRole::transport:
          transport_apply<double>(grid_, u, v_.v1, v_.v2, b.values, scratch_);
          break;
        case BlockRole::time: time_forward<double>(grid_, u, b.values); break;
      }
    }
  }

  void adjoint(const DualState& y, Buffer<double>& out) const {
    out.resize(grid_.size());
    K_.adjoint(grid_, y[0].values, out);
    for (std::size_t k = 1; k < roles_.size(); ++k) {
      const DualBlock& b = y[k];
      switch (roles_[k]) {
        case BlockRole::tv:
          div_backward<double>(grid_, b.channel(0), b.channel(1), tmp_);
          out -= tmp_;
          break;
        case BlockRole::transport:
          transport_adjoint<double>(grid_, b.values, v_.v1, v_.v2, tmp_, scratch_);
          out += tmp_;
          break;
        case BlockRole::time:
          time_forward_adjoint<double>(grid_, b.values, tmp_);
          out += tmp_;
          break;
        case BlockRole::data: break;
      }
    }
  }

  double norm_estimate(int iterations, std::uint64_t seed) const {
    DualState y = make_dual();
    Index range_size = 0;
    for (const auto& b : y.blocks) range_size += b.values.size();
    auto apply_flat = [&](const Eigen::VectorXd& x) {
      DualState cy = make_dual();
      apply(x.array(), cy);
      Eigen::VectorXd r(range_size);
      Index off = 0;
      for (const auto& b : cy.blocks) {
        r.segment(off, b.values.size()) = b.values.matrix();
        off += b.values.size();
      }
      return r;
    };
    auto adjoint_flat = [&](const Eigen::VectorXd& r) {
      DualState cy = make_dual();
      Index off = 0;
      for (auto& b : cy.blocks) {
        b.values = r.segment(off, b.values.size()).array();
        off += b.values.size();
      }
      Buffer<double> out;
      adjoint(cy, out);
      return Eigen::VectorXd(out.matrix());
    };
    return operator_norm_estimate(apply_flat, adjoint_flat, grid_.size(), iterations, seed);
  }

 private:
  Grid grid_;
  Grid range_;
  const ForwardOperator& K_;
  const FlowField& v_;
  std::vector<BlockRole> roles_;
  mutable Buffer<double> scratch_;
  mutable Buffer<double> tmp_;
};

}  // namespace tvflow::detail
