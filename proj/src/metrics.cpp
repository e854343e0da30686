#include "tvflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tvflow {

namespace {

// Summed-area table with a zero first row and column.
Eigen::ArrayXXd integral(const Frame& a) {
  Eigen::ArrayXXd s = Eigen::ArrayXXd::Zero(a.rows() + 1, a.cols() + 1);
  for (Index r = 0; r < a.rows(); ++r) {
    for (Index c = 0; c < a.cols(); ++c) {
      s(r + 1, c + 1) = a(r, c) + s(r, c + 1) + s(r + 1, c) - s(r, c);
    }
  }
  return s;
}

double box(const Eigen::ArrayXXd& s, Index r, Index c, Index h, Index w) {
  return s(r + h, c + w) - s(r, c + w) - s(r + h, c) + s(r, c);
}

double mse(const ImageSequence& ref, const ImageSequence& rec) {
  require_same_grid(ref.grid, rec.grid, "psnr/snr");
  return (ref.values - rec.values).square().mean();
}

template <typename PerPoint>
double flow_mean(const FlowField& v, const FlowField& gt, Index border, PerPoint&& f) {
  require_same_grid(v.grid, gt.grid, "flow metric");
  const Grid& g = v.grid;
  if (2 * border >= g.width() || 2 * border >= g.height()) {
    throw ContractViolation("flow metric: border leaves no points");
  }
  double acc = 0.0;
  Index count = 0;
  for (Index t = 0; t < g.nt; ++t) {
    for (Index j = border; j < g.height() - border; ++j) {
      for (Index i = border; i < g.width() - border; ++i) {
        const Index p = g.index(i, j, t);
        acc += f(v.v1[p], v.v2[p], gt.v1[p], gt.v2[p]);
        ++count;
      }
    }
  }
  return acc / static_cast<double>(count);
}

}  // namespace

double ssim(const Frame& ref, const Frame& rec, const SsimParams& params) {
  if (ref.rows() != rec.rows() || ref.cols() != rec.cols()) {
    throw ContractViolation("ssim: frame shape mismatch");
  }
  const Index wh = std::min(params.window, ref.rows());
  const Index ww = std::min(params.window, ref.cols());
  const double n = static_cast<double>(wh * ww);
  const auto sx = integral(ref);
  const auto sy = integral(rec);
  const auto sxx = integral(ref.square());
  const auto syy = integral(rec.square());
  const auto sxy = integral(ref * rec);

  double acc = 0.0;
  Index count = 0;
  for (Index r = 0; r + wh <= ref.rows(); ++r) {
    for (Index c = 0; c + ww <= ref.cols(); ++c) {
      const double mx = box(sx, r, c, wh, ww) / n;
      const double my = box(sy, r, c, wh, ww) / n;
      const double vx = box(sxx, r, c, wh, ww) / n - mx * mx;
      const double vy = box(syy, r, c, wh, ww) / n - my * my;
      const double cxy = box(sxy, r, c, wh, ww) / n - mx * my;
      acc += ((2 * mx * my + params.c1) * (2 * cxy + params.c2)) /
             ((mx * mx + my * my + params.c1) * (vx + vy + params.c2));
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

double ssim(const ImageSequence& ref, const ImageSequence& rec, const SsimParams& params) {
  require_same_grid(ref.grid, rec.grid, "ssim");
  double acc = 0.0;
  for (Index t = 0; t < ref.grid.frames(); ++t) acc += ssim(Frame(ref.frame(t)), Frame(rec.frame(t)), params);
  return acc / static_cast<double>(ref.grid.frames());
}

double psnr(const ImageSequence& ref, const ImageSequence& rec) {
  const double e = mse(ref, rec);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(ref.values.square().maxCoeff() / e);
}

double snr(const ImageSequence& ref, const ImageSequence& rec) {
  const double e = mse(ref, rec);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(ref.values.square().mean() / e);
}

double aee(const FlowField& v, const FlowField& v_gt, Index border) {
  return flow_mean(v, v_gt, border, [](double a1, double a2, double b1, double b2) {
    return std::hypot(a1 - b1, a2 - b2);
  });
}

double ae(const FlowField& v, const FlowField& v_gt, Index border) {
  // Angle between (a1, a2, 1) and (b1, b2, 1). atan2 of the cross and dot
  // products equals arccos of the normalized dot product and stays exact for
  // nearly parallel vectors.
  return flow_mean(v, v_gt, border, [](double a1, double a2, double b1, double b2) {
    const double cx = a2 - b2;
    const double cy = b1 - a1;
    const double cz = a1 * b2 - a2 * b1;
    const double dot = a1 * b1 + a2 * b2 + 1.0;
    return std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), dot);
  });
}

}  // namespace tvflow
