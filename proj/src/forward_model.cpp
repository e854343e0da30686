#include "tvflow/forward_model.hpp"

#include <cmath>

namespace tvflow {

namespace {

// Half-sample symmetric reflection: -1 -> 0, n -> n - 1.
Index reflect(Index k, Index n) {
  const Index period = 2 * n;
  k %= period;
  if (k < 0) k += period;
  return k < n ? k : period - 1 - k;
}

void convolve_frame(const double* in, double* out, Index w, Index h, const Frame& kernel) {
  const Index ry = kernel.rows() / 2;
  const Index rx = kernel.cols() / 2;
  for (Index j = 0; j < h; ++j) {
    for (Index i = 0; i < w; ++i) {
      double acc = 0.0;
      for (Index b = -ry; b <= ry; ++b) {
        const Index jj = reflect(j - b, h);
        for (Index a = -rx; a <= rx; ++a) {
          acc += kernel(b + ry, a + rx) * in[jj * w + reflect(i - a, w)];
        }
      }
      out[j * w + i] = acc;
    }
  }
}

// Scatter form of the transposed convolution.
void convolve_frame_adjoint(const double* in, double* out, Index w, Index h, const Frame& kernel) {
  const Index ry = kernel.rows() / 2;
  const Index rx = kernel.cols() / 2;
  for (Index k = 0; k < w * h; ++k) out[k] = 0.0;
  for (Index j = 0; j < h; ++j) {
    for (Index i = 0; i < w; ++i) {
      const double d = in[j * w + i];
      for (Index b = -ry; b <= ry; ++b) {
        const Index jj = reflect(j - b, h);
        for (Index a = -rx; a <= rx; ++a) {
          out[jj * w + reflect(i - a, w)] += kernel(b + ry, a + rx) * d;
        }
      }
    }
  }
}

}  // namespace

ForwardOperator ForwardOperator::identity() { return ForwardOperator(); }

ForwardOperator ForwardOperator::frame_mask(std::vector<bool> known) {
  ForwardOperator k = identity().with_frame_mask(std::move(known));
  k.kind_ = Kind::frame_mask;
  return k;
}

ForwardOperator ForwardOperator::blur(Frame kernel) {
  if (kernel.rows() % 2 == 0 || kernel.cols() % 2 == 0) {
    throw ContractViolation("blur kernel must have odd dimensions");
  }
  if (!kernel.isFinite().all()) throw ContractViolation("blur kernel must be finite");
  if (kernel.sum() == 0.0) throw ContractViolation("blur kernel sums to zero, so K1 = 0");
  ForwardOperator k;
  k.kind_ = Kind::blur;
  k.kernel_ = std::move(kernel);
  k.spatial_identity_ = false;
  return k;
}

ForwardOperator ForwardOperator::box_blur(Index radius) {
  const Index n = 2 * radius + 1;
  return blur(Frame::Constant(n, n, 1.0 / static_cast<double>(n * n)));
}

ForwardOperator ForwardOperator::gaussian_blur(double sigma, Index radius) {
  if (!(sigma > 0)) throw ContractViolation("gaussian_blur: sigma must be positive");
  const Index n = 2 * radius + 1;
  Frame kernel(n, n);
  for (Index b = 0; b < n; ++b) {
    for (Index a = 0; a < n; ++a) {
      const double x = static_cast<double>(a - radius);
      const double y = static_cast<double>(b - radius);
      kernel(b, a) = std::exp(-(x * x + y * y) / (2 * sigma * sigma));
    }
  }
  kernel /= kernel.sum();
  return blur(std::move(kernel));
}

ForwardOperator ForwardOperator::subsample(Index factor) {
  if (factor < 1) throw ContractViolation("subsample factor must be >= 1");
  ForwardOperator k;
  k.kind_ = Kind::subsample;
  k.factor_ = factor;
  k.spatial_identity_ = factor == 1;
  return k;
}

ForwardOperator ForwardOperator::with_frame_mask(std::vector<bool> known) const {
  bool any = false;
  for (bool b : known) any = any || b;
  if (!any) throw ContractViolation("frame mask observes no frame, so K1 = 0");
  ForwardOperator k = *this;
  k.known_ = std::move(known);
  return k;
}

std::string ForwardOperator::name() const {
  std::string base;
  switch (kind_) {
    case Kind::identity: base = "identity"; break;
    case Kind::frame_mask: base = "frame_mask"; break;
    case Kind::blur: base = "blur"; break;
    case Kind::subsample: base = "subsample"; break;
  }
  if (!known_.empty() && kind_ != Kind::frame_mask) base += "+frame_mask";
  return base;
}

Grid ForwardOperator::range_grid(const Grid& domain) const {
  if (!known_.empty() && static_cast<Index>(known_.size()) != domain.frames()) {
    throw ContractViolation("frame mask covers " + std::to_string(known_.size()) +
                            " frames, sequence has " + std::to_string(domain.frames()));
  }
  if (kind_ != Kind::subsample) return domain;
  if (domain.width() % factor_ != 0 || domain.height() % factor_ != 0) {
    throw ContractViolation("subsample factor " + std::to_string(factor_) +
                            " does not divide frame size " + to_string(domain));
  }
  return Grid::from_shape(domain.width() / factor_, domain.height() / factor_, domain.frames());
}

void ForwardOperator::apply(const Grid& domain, Eigen::Ref<const Buffer<double>> in,
                            Eigen::Ref<Buffer<double>> out) const {
  const Grid range = range_grid(domain);
  if (in.size() != domain.size() || out.size() != range.size()) {
    throw ContractViolation("ForwardOperator::apply: shape mismatch");
  }
  const Index w = domain.width();
  const Index h = domain.height();
  for (Index t = 0; t < domain.frames(); ++t) {
    double* o = out.data() + t * range.frame_size();
    if (!frame_known(t)) {
      for (Index k = 0; k < range.frame_size(); ++k) o[k] = 0.0;
      continue;
    }
    const double* u = in.data() + t * domain.frame_size();
    if (spatial_identity_) {
      for (Index k = 0; k < domain.frame_size(); ++k) o[k] = u[k];
    } else if (kind_ == Kind::blur) {
      convolve_frame(u, o, w, h, kernel_);
    } else {
      const Index s = factor_;
      const Index rw = range.width();
      const double scale = 1.0 / static_cast<double>(s * s);
      for (Index J = 0; J < range.height(); ++J) {
        for (Index I = 0; I < rw; ++I) {
          double acc = 0.0;
          for (Index b = 0; b < s; ++b) {
            for (Index a = 0; a < s; ++a) acc += u[(J * s + b) * w + I * s + a];
          }
          o[J * rw + I] = acc * scale;
        }
      }
    }
  }
}

void ForwardOperator::adjoint(const Grid& domain, Eigen::Ref<const Buffer<double>> in,
                              Eigen::Ref<Buffer<double>> out) const {
  const Grid range = range_grid(domain);
  if (in.size() != range.size() || out.size() != domain.size()) {
    throw ContractViolation("ForwardOperator::adjoint: shape mismatch");
  }
  const Index w = domain.width();
  const Index h = domain.height();
  for (Index t = 0; t < domain.frames(); ++t) {
    double* o = out.data() + t * domain.frame_size();
    if (!frame_known(t)) {
      for (Index k = 0; k < domain.frame_size(); ++k) o[k] = 0.0;
      continue;
    }
    const double* d = in.data() + t * range.frame_size();
    if (spatial_identity_) {
      for (Index k = 0; k < domain.frame_size(); ++k) o[k] = d[k];
    } else if (kind_ == Kind::blur) {
      convolve_frame_adjoint(d, o, w, h, kernel_);
    } else {
      const Index s = factor_;
      const Index rw = range.width();
      const double scale = 1.0 / static_cast<double>(s * s);
      for (Index j = 0; j < h; ++j) {
        for (Index i = 0; i < w; ++i) o[j * w + i] = d[(j / s) * rw + i / s] * scale;
      }
    }
  }
}

ImageSequence ForwardOperator::apply(const ImageSequence& u) const {
  ImageSequence out(range_grid(u.grid));
  apply(u.grid, u.values, out.values);
  return out;
}

ImageSequence ForwardOperator::adjoint(const ImageSequence& d, const Grid& domain) const {
  require_same_grid(d.grid, range_grid(domain), "ForwardOperator::adjoint");
  ImageSequence out(domain);
  adjoint(domain, d.values, out.values);
  return out;
}

double ForwardOperator::norm_bound() const {
  switch (kind_) {
    case Kind::blur: return kernel_.abs().sum();
    case Kind::subsample: return 1.0 / static_cast<double>(factor_);
    default: return 1.0;
  }
}

}  // namespace tvflow
