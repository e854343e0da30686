#include "doctest.h"

#include <numbers>

#include "oracles.hpp"
#include "tvflow/data_gen.hpp"
#include "tvflow/diff_ops.hpp"
#include "tvflow/metrics.hpp"

using namespace tvflow;

namespace {

Frame random_frame(std::mt19937_64& rng, Index h, Index w) {
  std::uniform_real_distribution<double> U(0, 1);
  Frame f(h, w);
  for (Index k = 0; k < f.size(); ++k) f.data()[k] = U(rng);
  return f;
}

FlowField random_flow(std::mt19937_64& rng, const Grid& g) {
  return FlowField(g, oracle::random_vec(rng, g.size()).array(), oracle::random_vec(rng, g.size()).array());
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("ssim") {
    const SsimParams p;
    CHECK(p.c1 == 0.01 * 0.01);
    CHECK(p.c2 == 0.03 * 0.03);
    CHECK(p.window == 8);

    std::mt19937_64 rng(41);
    const Frame a = random_frame(rng, 20, 17);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    const Frame inv = 1.0 - a;
    const double s = ssim(a, inv);
    CHECK(s < 1.0);
    CHECK(std::abs(s - oracle::ssim_direct(a, inv, 8, p.c1, p.c2)) <= 1e-10);
    const Frame b = random_frame(rng, 20, 17);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));
    CHECK_THROWS_AS(ssim(a, Frame(Frame::Zero(3, 3))), ContractViolation);
  }

  TEST_CASE("psnr and snr") {
    const Grid g = Grid::from_shape(5, 4, 2);
    const auto one = ImageSequence::constant(g, 1.0);
    CHECK(psnr(one, ImageSequence::constant(g, 0.9)) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(std::isinf(psnr(one, one)));
    CHECK(std::isinf(snr(one, one)));

    std::mt19937_64 rng(42);
    const ImageSequence x(g, oracle::random_vec(rng, g.size()).array());
    const ImageSequence y(g, oracle::random_vec(rng, g.size()).array());
    const double mse = (x.values - y.values).square().mean();
    CHECK(std::abs(psnr(x, y) - 10 * std::log10(x.values.square().maxCoeff() / mse)) <= 1e-10);
    CHECK(std::abs(snr(x, y) - 10 * std::log10(x.values.square().mean() / mse)) <= 1e-10);
    CHECK(psnr(x, y) >= snr(x, y));
  }

  TEST_CASE("aee and ae") {
    const Grid g = Grid::from_shape(4, 3, 3);
    const FlowField z(g);
    CHECK(aee(FlowField::constant(g, 3.0, 4.0), z) == 5.0);
    CHECK(aee(z, z) == 0.0);
    CHECK(ae(z, z) == 0.0);

    // the same single-point case at every point of a small grid
    const Grid small = Grid::from_shape(2, 2, 2);
    CHECK(std::abs(ae(FlowField(small), FlowField::constant(small, 1.0, 0.0)) - std::numbers::pi / 4) <= 1e-12);

    std::mt19937_64 rng(43);
    const FlowField a = random_flow(rng, g), b = random_flow(rng, g);
    double e = 0, ang = 0;
    int n = 0;
    for (Index t = 0; t < g.nt; ++t)
      for (Index j = 0; j < g.height(); ++j)
        for (Index i = 0; i < g.width(); ++i, ++n) {
          const Index p = g.index(i, j, t);
          e += std::hypot(a.v1[p] - b.v1[p], a.v2[p] - b.v2[p]);
          const Eigen::Vector3d x = Eigen::Vector3d(a.v1[p], a.v2[p], 1).normalized();
          const Eigen::Vector3d y = Eigen::Vector3d(b.v1[p], b.v2[p], 1).normalized();
          ang += std::acos(std::clamp(x.dot(y), -1.0, 1.0));
        }
    CHECK(std::abs(aee(a, b) - e / n) <= 1e-12);
    CHECK(std::abs(ae(a, b) - ang / n) <= 1e-10);
    CHECK(aee(a, b, 1) >= 0.0);
  }
}

TEST_SUITE("data_gen") {
  TEST_CASE("flow scaling") {
    const Grid g = Grid::from_shape(3, 3, 2);
    FlowField v(g);
    v.v1[0] = 4.0;
    v.v2[1] = 2.0;
    const auto s = scale_flow_to_unit(v);
    CHECK(s.v1[0] == 1.0);
    CHECK(s.v2[1] == 0.5);
    FlowField w(g);
    w.v1[0] = 0.5;
    CHECK((scale_flow_to_unit(w).v1 == w.v1).all());

    std::mt19937_64 rng(51);
    const FlowField r = random_flow(rng, g);
    const double m = (r.v1.square() + r.v2.square()).sqrt().maxCoeff();
    const auto rs = scale_flow_to_unit(r);
    CHECK(std::abs((rs.v1.square() + rs.v2.square()).sqrt().maxCoeff() - std::min(1.0, m)) <= 1e-12);
  }

  TEST_CASE("cubic warp") {
    std::mt19937_64 rng(52);
    const Frame f = random_frame(rng, 8, 9);
    const Frame zero = Frame::Zero(8, 9);
    CHECK((warp_cubic(f, zero, zero, 1.0) == f).all());
    const Frame shifted = warp_cubic(f, Frame::Constant(8, 9, 1.0), zero, 1.0);
    for (Index j = 0; j < 8; ++j)
      for (Index i = 0; i + 1 < 9; ++i) CHECK(std::abs(shifted(j, i) - f(j, i + 1)) <= 1e-12);

    Frame ramp(6, 10);
    for (Index j = 0; j < 6; ++j)
      for (Index i = 0; i < 10; ++i) ramp(j, i) = 0.1 * i + 0.05 * j;
    const Frame half = warp_cubic(ramp, Frame::Constant(6, 10, 0.5), Frame::Constant(6, 10, -0.5), 1.0);
    for (Index j = 2; j < 4; ++j)
      for (Index i = 2; i < 7; ++i) CHECK(std::abs(half(j, i) - (0.1 * (i + 0.5) + 0.05 * (j - 0.5))) <= 1e-12);
  }

  TEST_CASE("noise") {
    const Grid g = Grid::from_shape(256, 256, 2);
    const auto u = ImageSequence::constant(g, 0.5);
    CHECK((add_gaussian_noise(u, 0.0, 9).values == u.values).all());
    const auto a = add_gaussian_noise(u, 0.01, 9);
    const auto b = add_gaussian_noise(u, 0.01, 9);
    CHECK((a.values == b.values).all());
    const Buffer<double> n = a.values - 0.5;
    const double var = (n - n.mean()).square().mean();
    CHECK(std::abs(var - 0.01) <= 0.001);

    const Grid h = Grid::from_shape(64, 64, 2);
    const auto c = add_gaussian_noise(ImageSequence(h), 1.0, 3);
    const auto f0 = c.values.head(h.frame_size()).matrix();
    const auto f1 = c.values.tail(h.frame_size()).matrix();
    CHECK(std::abs(f0.dot(f1)) / (f0.norm() * f1.norm()) < 0.05);
  }

  TEST_CASE("synthetic scenes") {
    SyntheticScene r;
    r.kind = SyntheticScene::Kind::translating_ramp;
    r.width = r.height = 12;
    r.velocity_x = 1.0;
    r.velocity_y = 0.5;
    r.slope_y = 0.3;
    const auto d = make_scene(r, 1);
    const auto res = transport_apply(d.u_clean, d.v_gt);
    const Grid& g = d.u_clean.grid;
    for (Index t = 0; t < g.nt; ++t)
      for (Index j = 1; j < g.ny; ++j)
        for (Index i = 1; i < g.nx; ++i) CHECK(std::abs(res(i, j, t)) <= 1e-10);

    SyntheticScene s;
    s.width = s.height = 32;
    s.frames = 4;
    const auto disc = make_scene(s, 1);
    for (Index t = 0; t + 1 < 4; ++t) {
      const auto c0 = centroid(disc.u_clean.frame(t), s.background);
      const auto c1 = centroid(disc.u_clean.frame(t + 1), s.background);
      CHECK(std::abs(c1[0] - c0[0] - 0.5) <= 0.05);
      CHECK(std::abs(c1[1] - c0[1]) <= 0.05);
    }
    CHECK((disc.f.values == disc.u_clean.values).all());

    SyntheticScene w;
    w.kind = SyntheticScene::Kind::warped_from_flow;
    std::mt19937_64 rng(53);
    w.base = random_frame(rng, 7, 6);
    w.flow_x = Frame::Zero(7, 6);
    w.flow_y = Frame::Zero(7, 6);
    w.frames = 3;
    const auto wd = make_scene(w, 1);
    for (Index t = 0; t < 3; ++t) CHECK((wd.u_clean.frame(t) == w.base).all());

    SyntheticScene noisy = s;
    noisy.noise_variance = 0.01;
    CHECK((make_scene(noisy, 4).f.values == make_scene(noisy, 4).f.values).all());
    CHECK((make_scene(noisy, 4).f.values != make_scene(noisy, 5).f.values).any());
  }
}
