#pragma once

#include <cstdint>

#include "tvflow/grid.hpp"

namespace tvflow {

/// Middlebury marks unknown flow with values around 1e10.
inline constexpr double kInvalidFlowThreshold = 1e9;

inline bool is_invalid_flow(double a, double b) {
  return !std::isfinite(a) || !std::isfinite(b) || std::abs(a) > kInvalidFlowThreshold ||
         std::abs(b) > kInvalidFlowThreshold;
}

/// Zeroes invalid vectors and, if the largest remaining magnitude exceeds 1,
/// rescales the whole field so that it becomes exactly 1.
FlowField scale_flow_to_unit(const FlowField& v_gt);

/// Samples `frame` at x + k v(x) with Catmull-Rom bicubic interpolation;
/// samples outside the frame use the nearest boundary pixel.
Frame warp_cubic(const Frame& frame, const Frame& v1, const Frame& v2, double k);

/// Adds i.i.d. N(0, variance) noise to every value, seeded; no clamping.
ImageSequence add_gaussian_noise(const ImageSequence& u, double variance, std::uint64_t seed);

struct SyntheticScene {
  enum class Kind { warped_from_flow, translating_disc, translating_ramp };

  Kind kind = Kind::translating_disc;
  Index width = 32;
  Index height = 32;
  Index frames = 3;
  double noise_variance = 0.0;

  /// Uniform motion of disc and ramp scenes, pixels per frame.
  double velocity_x = 0.5;
  double velocity_y = 0.0;

  // translating_disc: smooth-edged disc on a flat background.
  double disc_radius = 0.0;  // 0 selects a quarter of the smaller side
  double disc_edge = 1.5;    // edge width of the tanh profile, pixels
  double disc_intensity = 0.8;
  double background = 0.2;

  // translating_ramp: u = offset + slope_x (i - vx t) + slope_y (j - vy t).
  double slope_x = 1.0;
  double slope_y = 0.0;
  double offset = 0.0;

  // warped_from_flow: base frame and a single-transition flow of the same size.
  Frame base;
  Frame flow_x;
  Frame flow_y;
};

struct SceneData {
  ImageSequence f;
  ImageSequence u_clean;
  FlowField v_gt;
};

/// Builds clean frames and ground truth and adds noise. For warped_from_flow
/// the flow is first scaled to unit maximum magnitude and frame t is the base
/// sampled at x - t v(x), so that u_t + grad u . v_gt ~ 0.
SceneData make_scene(const SyntheticScene& spec, std::uint64_t seed);

/// Intensity-weighted centroid of |frame - background|.
Eigen::Vector2d centroid(const Frame& frame, double background);

}  // namespace tvflow
