#pragma once

#include <string>
#include <vector>

#include "tvflow/grid.hpp"

namespace tvflow {

/// Linear measurement operator K, applied independently to every frame.
///
/// The spatial part is one of identity, blur (convolution with reflective
/// boundary) or subsample (block averaging). An optional frame mask zeroes the
/// rows of unknown frames, which makes K time dependent; `frame_mask` is the
/// identity with such a mask.
class ForwardOperator {
 public:
  enum class Kind { identity, frame_mask, blur, subsample };

  static ForwardOperator identity();
  /// known[t] tells whether frame t is observed. At least one frame must be.
  static ForwardOperator frame_mask(std::vector<bool> known);
  /// Odd-sized kernel; its entries must not sum to zero.
  static ForwardOperator blur(Frame kernel);
  static ForwardOperator box_blur(Index radius);
  static ForwardOperator gaussian_blur(double sigma, Index radius);
  static ForwardOperator subsample(Index factor);

  /// Restricts any operator to the given observed frames.
  ForwardOperator with_frame_mask(std::vector<bool> known) const;

  Kind kind() const { return kind_; }
  std::string name() const;
  const std::vector<bool>& known_frames() const { return known_; }
  bool frame_known(Index t) const { return known_.empty() || known_[static_cast<std::size_t>(t)]; }
  const Frame& kernel() const { return kernel_; }
  Index factor() const { return factor_; }

  /// Grid of the data field for a sequence on `domain`. Throws if the operator
  /// cannot act on that grid.
  Grid range_grid(const Grid& domain) const;

  ImageSequence apply(const ImageSequence& u) const;
  ImageSequence adjoint(const ImageSequence& d, const Grid& domain) const;

  void apply(const Grid& domain, Eigen::Ref<const Buffer<double>> in,
             Eigen::Ref<Buffer<double>> out) const;
  void adjoint(const Grid& domain, Eigen::Ref<const Buffer<double>> in,
               Eigen::Ref<Buffer<double>> out) const;

  /// Upper bound on the operator norm (exact for identity, mask and subsample).
  double norm_bound() const;

 private:
  ForwardOperator() = default;

  Kind kind_ = Kind::identity;
  std::vector<bool> known_;
  Frame kernel_;
  Index factor_ = 1;
  bool spatial_identity_ = true;
};

}  // namespace tvflow
