#pragma once

#include "tvflow/grid.hpp"

namespace tvflow {

struct SsimParams {
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
  /// Side of the square, uniformly weighted sliding window. Clipped to the
  /// frame size for smaller frames.
  Index window = 8;
};

/// Mean local SSIM over all window positions fully inside the frame.
double ssim(const Frame& ref, const Frame& rec, const SsimParams& params = {});
/// Mean of the framewise SSIM.
double ssim(const ImageSequence& ref, const ImageSequence& rec, const SsimParams& params = {});

/// 10 log10(max(ref^2) / mse); +infinity when the inputs are identical.
double psnr(const ImageSequence& ref, const ImageSequence& rec);
/// 10 log10(mean(ref^2) / mse); +infinity when the inputs are identical.
double snr(const ImageSequence& ref, const ImageSequence& rec);

/// Average endpoint error over the frame transitions t < nt, skipping a
/// spatial border of the given width.
double aee(const FlowField& v, const FlowField& v_gt, Index border = 0);
/// Average angular error (radians) between the 3-D lifted, normalized flows.
double ae(const FlowField& v, const FlowField& v_gt, Index border = 0);

}  // namespace tvflow
