#include "tvflow/data_gen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace tvflow {

namespace {

// Catmull-Rom weights (a = -0.5) for the four taps around a fractional offset.
void cubic_weights(double s, double w[4]) {
  const double s2 = s * s;
  const double s3 = s2 * s;
  w[0] = -0.5 * s3 + s2 - 0.5 * s;
  w[1] = 1.5 * s3 - 2.5 * s2 + 1.0;
  w[2] = -1.5 * s3 + 2.0 * s2 + 0.5 * s;
  w[3] = 0.5 * s3 - 0.5 * s2;
}

double sample_bicubic(const Frame& f, double x, double y) {
  const Index w = f.cols();
  const Index h = f.rows();
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const Index ix = static_cast<Index>(fx);
  const Index iy = static_cast<Index>(fy);
  double wx[4], wy[4];
  cubic_weights(x - fx, wx);
  cubic_weights(y - fy, wy);
  double acc = 0.0;
  for (int b = 0; b < 4; ++b) {
    const Index jj = std::clamp<Index>(iy - 1 + b, 0, h - 1);
    double row = 0.0;
    for (int a = 0; a < 4; ++a) {
      const Index ii = std::clamp<Index>(ix - 1 + a, 0, w - 1);
      row += wx[a] * f(jj, ii);
    }
    acc += wy[b] * row;
  }
  return acc;
}

}  // namespace

FlowField scale_flow_to_unit(const FlowField& v_gt) {
  FlowField out = v_gt;
  double max_mag = 0.0;
  bool any_valid = false;
  for (Index p = 0; p < out.v1.size(); ++p) {
    if (is_invalid_flow(out.v1[p], out.v2[p])) {
      out.v1[p] = 0.0;
      out.v2[p] = 0.0;
      continue;
    }
    any_valid = true;
    max_mag = std::max(max_mag, std::hypot(out.v1[p], out.v2[p]));
  }
  if (!any_valid) throw ContractViolation("scale_flow_to_unit: flow has no valid vectors");
  if (max_mag > 1.0) {
    out.v1 /= max_mag;
    out.v2 /= max_mag;
  }
  return out;
}

Frame warp_cubic(const Frame& frame, const Frame& v1, const Frame& v2, double k) {
  if (v1.rows() != frame.rows() || v1.cols() != frame.cols() || v2.rows() != frame.rows() ||
      v2.cols() != frame.cols()) {
    throw ContractViolation("warp_cubic: flow and frame shapes differ");
  }
  Frame out(frame.rows(), frame.cols());
  for (Index j = 0; j < frame.rows(); ++j) {
    for (Index i = 0; i < frame.cols(); ++i) {
      out(j, i) = sample_bicubic(frame, static_cast<double>(i) + k * v1(j, i),
                                 static_cast<double>(j) + k * v2(j, i));
    }
  }
  return out;
}

ImageSequence add_gaussian_noise(const ImageSequence& u, double variance, std::uint64_t seed) {
  if (variance < 0) throw ContractViolation("add_gaussian_noise: negative variance");
  ImageSequence out = u;
  if (variance == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(variance));
  for (Index p = 0; p < out.values.size(); ++p) out.values[p] += normal(rng);
  return out;
}

SceneData make_scene(const SyntheticScene& spec, std::uint64_t seed) {
  using Kind = SyntheticScene::Kind;
  Index width = spec.width;
  Index height = spec.height;
  if (spec.kind == Kind::warped_from_flow) {
    width = spec.base.cols();
    height = spec.base.rows();
  }
  const Grid g = Grid::from_shape(width, height, spec.frames);
  SceneData out;
  out.u_clean = ImageSequence(g);

  switch (spec.kind) {
    case Kind::warped_from_flow: {
      if (spec.flow_x.rows() != height || spec.flow_x.cols() != width ||
          spec.flow_y.rows() != height || spec.flow_y.cols() != width) {
        throw ContractViolation("make_scene: flow and base frame shapes differ");
      }
      FlowField single(Grid::from_shape(width, height, 2));
      FrameMap<double>(single.v1.data(), height, width) = spec.flow_x;
      FrameMap<double>(single.v2.data(), height, width) = spec.flow_y;
      single = scale_flow_to_unit(single);
      const Frame fx = FrameMap<double>(single.v1.data(), height, width);
      const Frame fy = FrameMap<double>(single.v2.data(), height, width);
      out.v_gt = FlowField(g);
      for (Index t = 0; t < g.frames(); ++t) {
        out.u_clean.frame(t) = warp_cubic(spec.base, fx, fy, -static_cast<double>(t));
        FrameMap<double>(out.v_gt.v1.data() + t * g.frame_size(), height, width) = fx;
        FrameMap<double>(out.v_gt.v2.data() + t * g.frame_size(), height, width) = fy;
      }
      break;
    }
    case Kind::translating_disc: {
      const double radius =
          spec.disc_radius > 0 ? spec.disc_radius : 0.25 * static_cast<double>(std::min(width, height));
      const double cx0 = 0.5 * static_cast<double>(width - 1);
      const double cy0 = 0.5 * static_cast<double>(height - 1);
      const double shift_x = 0.5 * spec.velocity_x * static_cast<double>(spec.frames - 1);
      const double shift_y = 0.5 * spec.velocity_y * static_cast<double>(spec.frames - 1);
      for (Index t = 0; t < g.frames(); ++t) {
        const double cx = cx0 - shift_x + spec.velocity_x * static_cast<double>(t);
        const double cy = cy0 - shift_y + spec.velocity_y * static_cast<double>(t);
        for (Index j = 0; j < height; ++j) {
          for (Index i = 0; i < width; ++i) {
            const double r = std::hypot(static_cast<double>(i) - cx, static_cast<double>(j) - cy);
            const double inside = 0.5 * (1.0 + std::tanh((radius - r) / spec.disc_edge));
            out.u_clean(i, j, t) = spec.background + (spec.disc_intensity - spec.background) * inside;
          }
        }
      }
      out.v_gt = FlowField::constant(g, spec.velocity_x, spec.velocity_y);
      break;
    }
    case Kind::translating_ramp: {
      for (Index t = 0; t < g.frames(); ++t) {
        const double td = static_cast<double>(t);
        for (Index j = 0; j < height; ++j) {
          for (Index i = 0; i < width; ++i) {
            out.u_clean(i, j, t) = spec.offset +
                                   spec.slope_x * (static_cast<double>(i) - spec.velocity_x * td) +
                                   spec.slope_y * (static_cast<double>(j) - spec.velocity_y * td);
          }
        }
      }
      out.v_gt = FlowField::constant(g, spec.velocity_x, spec.velocity_y);
      break;
    }
  }
  out.f = add_gaussian_noise(out.u_clean, spec.noise_variance, seed);
  return out;
}

Eigen::Vector2d centroid(const Frame& frame, double background) {
  const Frame w = (frame - background).abs();
  const double total = w.sum();
  if (total == 0.0) throw ContractViolation("centroid: frame equals the background");
  double sx = 0.0, sy = 0.0;
  for (Index j = 0; j < frame.rows(); ++j) {
    for (Index i = 0; i < frame.cols(); ++i) {
      sx += static_cast<double>(i) * w(j, i);
      sy += static_cast<double>(j) * w(j, i);
    }
  }
  return {sx / total, sy / total};
}

}  // namespace tvflow
