#include "doctest.h"

#include "oracles.hpp"
#include "tvflow/forward_model.hpp"
#include "tvflow/prox.hpp"

using namespace tvflow;
using oracle::Vec;

namespace {

// Dense matrix of an operator, column by column.
oracle::Mat dense(const ForwardOperator& K, const Grid& g) {
  const Grid r = K.range_grid(g);
  oracle::Mat m(r.size(), g.size());
  Buffer<double> e = Buffer<double>::Zero(g.size());
  Buffer<double> out(r.size());
  for (Index k = 0; k < g.size(); ++k) {
    e[k] = 1.0;
    K.apply(g, e, out);
    m.col(k) = out.matrix();
    e[k] = 0.0;
  }
  return m;
}

}  // namespace

TEST_SUITE("forward_model") {
  TEST_CASE("identity and mask") {
    std::mt19937_64 rng(1);
    const Grid g = Grid::from_shape(4, 3, 3);
    const ImageSequence u(g, oracle::random_vec(rng, g.size()).array());
    CHECK((ForwardOperator::identity().apply(u).values == u.values).all());
    CHECK((ForwardOperator::identity().adjoint(u, g).values == u.values).all());

    const auto M = ForwardOperator::frame_mask({true, false, true});
    const auto mu = M.apply(u);
    CHECK((mu.frame(1) == 0).all());
    CHECK((mu.frame(0) == u.frame(0)).all());
    CHECK((mu.frame(2) == u.frame(2)).all());
    CHECK((M.apply(mu).values == mu.values).all());
    CHECK((M.adjoint(u, g).values == mu.values).all());
    CHECK((dense(M, g) - oracle::frame_mask(g, {true, false, true})).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(ForwardOperator::frame_mask({false, false}), ContractViolation);
  }

  TEST_CASE("box blur impulse") {
    const Grid g = Grid::from_shape(7, 7, 2);
    ImageSequence u(g);
    u(3, 3, 0) = 1.0;
    const auto b = ForwardOperator::box_blur(1).apply(u);
    for (Index j = 0; j < 7; ++j)
      for (Index i = 0; i < 7; ++i) {
        const bool near = std::abs(i - 3) <= 1 && std::abs(j - 3) <= 1;
        CHECK(b(i, j, 0) == doctest::Approx(near ? 1.0 / 9.0 : 0.0).epsilon(1e-15));
      }
    CHECK((b.frame(1) == 0).all());
  }

  TEST_CASE("blur and subsample match dense oracles") {
    const Grid g = Grid::from_shape(6, 4, 2);
    const auto gb = ForwardOperator::gaussian_blur(1.0, 2);
    CHECK((dense(gb, g) - oracle::blur(g, gb.kernel())).cwiseAbs().maxCoeff() <= 1e-15);
    const auto bm = ForwardOperator::box_blur(1).with_frame_mask({false, true});
    CHECK((dense(bm, g) - oracle::blur(g, bm.kernel(), {false, true})).cwiseAbs().maxCoeff() <= 1e-15);
    const auto S = ForwardOperator::subsample(2);
    CHECK((dense(S, g) - oracle::block_average(g, 2)).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK_THROWS_AS(ForwardOperator::subsample(4).range_grid(g), ContractViolation);
  }

  TEST_CASE("blur keeps constants and norm bounds hold") {
    const Grid g = Grid::from_shape(8, 8, 2);
    const auto c = ForwardOperator::gaussian_blur(1.5, 3).apply(ImageSequence::constant(g, 0.4));
    CHECK((c.values - 0.4).abs().maxCoeff() <= 1e-14);
    for (const auto& K : {ForwardOperator::identity(), ForwardOperator::box_blur(1), ForwardOperator::subsample(2),
                          ForwardOperator::gaussian_blur(1.0, 2)}) {
      const oracle::Mat m = dense(K, g);
      Eigen::JacobiSVD<oracle::Mat> svd(m);
      CHECK(svd.singularValues()[0] <= K.norm_bound() + 1e-12);
    }
  }

  TEST_CASE("adjointness") {
    std::mt19937_64 rng(2);
    const Grid g = Grid::from_shape(6, 4, 3);
    for (const auto& K : {ForwardOperator::identity(), ForwardOperator::frame_mask({true, false, true}),
                          ForwardOperator::box_blur(1), ForwardOperator::gaussian_blur(0.8, 2),
                          ForwardOperator::subsample(2), ForwardOperator::subsample(2).with_frame_mask({false, true, true})}) {
      const Grid r = K.range_grid(g);
      const Vec x = oracle::random_vec(rng, g.size());
      const Vec y = oracle::random_vec(rng, r.size());
      Buffer<double> kx(r.size()), kty(g.size());
      K.apply(g, x.array(), kx);
      K.adjoint(g, y.array(), kty);
      CHECK(oracle::adjoint_gap(x, kx.matrix(), y, kty.matrix()) <= 1e-10);
    }
  }
}

TEST_SUITE("prox") {
  TEST_CASE("data prox") {
    Buffer<double> y(3), f(3);
    y << 1.0, -2.0, 0.5;
    f << 0.3, 0.1, -0.4;
    const auto p = prox_l2_data(y, Buffer<double>::Zero(3), 1.0);
    CHECK(((p - y / 2).abs() == 0).all());
    const double s = 0.37;
    const auto q = prox_l2_data(f, f, s);
    CHECK(((q - f * (1 - s) / (s + 1)).abs() <= 1e-15).all());

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(-3, 3), S(0.01, 5);
    for (int n = 0; n < 50; ++n) {
      Buffer<double> yt(1), ff(1);
      yt[0] = U(rng);
      ff[0] = U(rng);
      const double sg = S(rng);
      const long double y0 = yt[0], f0 = ff[0], sl = sg;
      const double ref = static_cast<double>(oracle::golden_section(
          [&](long double z) { return 0.5L * (z - y0) * (z - y0) + sl * (0.5L * z * z + z * f0); }, -20, 20));
      CHECK(std::abs(prox_l2_data(yt, ff, sg)[0] - ref) <= 1e-8);
    }
    CHECK_THROWS_AS(prox_l2_data(y, f, 0.0), ContractViolation);
  }

  TEST_CASE("ball projection") {
    Buffer<double> a(2);
    a << 3, 4;
    CHECK((project_linf_ball(a, 10.0) == a).all());
    CHECK((project_linf_ball(a, 5.0) == a).all());
    const auto p = project_linf_ball(a, 1.0);
    CHECK(p[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.8).epsilon(1e-15));

    DualBlock s(BlockShape::scalar, 3);
    s.values << -2.0, 0.5, 3.0;
    project_ball(s, 1.0);
    CHECK(s.values[0] == -1.0);
    CHECK(s.values[1] == 0.5);
    CHECK(s.values[2] == 1.0);

    std::mt19937_64 rng(6);
    for (auto shape : {BlockShape::scalar, BlockShape::vector2, BlockShape::vector4}) {
      DualBlock x(shape, 40), y(shape, 40);
      x.values = 2.0 * oracle::random_vec(rng, x.values.size()).array();
      y.values = 2.0 * oracle::random_vec(rng, y.values.size()).array();
      const double dist = (x.values - y.values).matrix().norm();
      project_ball(x, 0.7);
      project_ball(y, 0.7);
      CHECK((x.values - y.values).matrix().norm() <= dist + 1e-14);
      DualBlock again = x;
      project_ball(again, 0.7);
      CHECK((again.values - x.values).abs().maxCoeff() <= 1e-15);
    }

    DualBlock pf(BlockShape::vector2, 4);
    pf.values.setConstant(1.0);
    Buffer<double> radii(2);
    radii << 0.0, 1.0;
    project_ball_per_frame(pf, radii, 2);
    CHECK(pf.channel(0)[0] == 0.0);
    CHECK(pf.channel(0)[3] == doctest::Approx(1.0 / std::sqrt(2.0)));
  }

  TEST_CASE("affine shrinkage") {
    const auto d = shrink_affine_point(0.3, -0.2, 5.0, 0.0, 0.0, 1.0);
    CHECK(d.v1 == 0.3);
    CHECK(d.v2 == -0.2);
    CHECK(d.branch == ShrinkBranch::degenerate);
    const auto m = shrink_affine_point(1.0, 1.0, -3.0, 1.0, 2.0, 0.5);
    CHECK(m.branch == ShrinkBranch::middle);
    CHECK(m.v1 == 1.0);
    CHECK(m.v2 == 1.0);
    // on the threshold the middle branch is taken
    const auto e = shrink_affine_point(0.0, 0.0, 1.0, 1.0, 0.0, 1.0);
    CHECK(e.branch == ShrinkBranch::middle);
    CHECK(e.v1 == doctest::Approx(-1.0));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-2, 2), T(0.05, 1.5);
    int branches[3] = {0, 0, 0};
    for (int n = 0; n < 60; ++n) {
      const Eigen::Vector2d vt(U(rng), U(rng)), b(U(rng), U(rng));
      const double ut = U(rng), tau = T(rng);
      const auto r = shrink_affine_point(vt[0], vt[1], ut, b[0], b[1], tau);
      const Eigen::Vector2d ref = oracle::shrink_grid_search(vt, ut, b, tau);
      CHECK(std::abs(r.v1 - ref[0]) <= 1e-6);
      CHECK(std::abs(r.v2 - ref[1]) <= 1e-6);
      ++branches[static_cast<int>(r.branch)];
    }
    CHECK(branches[0] > 0);
    CHECK(branches[1] > 0);
    CHECK(branches[2] > 0);

    Buffer<double> v1(2), v2(2);
    v1 << 0.3, 1.0;
    v2 << -0.2, 1.0;
    Buffer<double> ut(2), b1(2), b2(2);
    ut << 5.0, -3.0;
    b1 << 0.0, 1.0;
    b2 << 0.0, 2.0;
    shrink_affine(v1, v2, ShrinkageData(ut, b1, b2), 0.5);
    CHECK(v1[0] == 0.3);
    CHECK(v1[1] == m.v1);
    CHECK(v2[1] == m.v2);
  }
}
