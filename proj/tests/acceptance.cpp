// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "tvflow/data_gen.hpp"
#include "tvflow/diff_ops.hpp"
#include "tvflow/experiment.hpp"
#include "tvflow/io.hpp"
#include "tvflow/joint.hpp"
#include "tvflow/metrics.hpp"
#include "tvflow/prox.hpp"

using namespace tvflow;
using oracle::Vec;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

// TVFLOW_ACCEPTANCE_ONLY=<substring> runs a subset while tuning; ctest runs all.
bool selected(const std::string& name) {
  const char* only = std::getenv("TVFLOW_ACCEPTANCE_ONLY");
  return !only || name.find(only) != std::string::npos;
}

void criterion(const std::string& name, double budget_s, const std::function<void(Outcome&)>& body) {
  if (!selected(name)) return;
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (s > budget_s) {
    o.pass = false;
    o.detail << " [runtime over " << budget_s << " s]";
  }
  if (!o.pass) ++failures;
  std::printf("%s %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.str().c_str(), s);
  std::fflush(stdout);
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "tvflow_acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

FlowField random_flow(std::mt19937_64& rng, const Grid& g) {
  return FlowField(g, oracle::random_vec(rng, g.size()).array(), oracle::random_vec(rng, g.size()).array());
}

// ---------------------------------------------------------------------------

void adjointness(Outcome& o) {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  int pairs = 0;
  auto record = [&](double gap) {
    worst = std::max(worst, gap);
    ++pairs;
  };
  for (const Grid& g : {Grid::from_shape(4, 4, 2), Grid::from_shape(8, 8, 4), Grid::from_shape(7, 5, 3)}) {
    std::vector<std::pair<std::string, ForwardOperator>> ops{
        {"identity", ForwardOperator::identity()},
        {"mask", ForwardOperator::frame_mask([&] {
           std::vector<bool> k(static_cast<std::size_t>(g.frames()), true);
           k[1] = false;
           return k;
         }())},
        {"box", ForwardOperator::box_blur(1)},
        {"gauss", ForwardOperator::gaussian_blur(1.0, 2)}};
    if (g.width() % 2 == 0 && g.height() % 2 == 0) {
      ops.emplace_back("subsample", ForwardOperator::subsample(2));
      std::vector<bool> k(static_cast<std::size_t>(g.frames()), false);
      k[0] = true;
      ops.emplace_back("subsample+mask", ForwardOperator::subsample(2).with_frame_mask(k));
    }
    for (int draw = 0; draw < 100; ++draw) {
      const Vec x = oracle::random_vec(rng, g.size());
      // gradient / divergence
      {
        const Vec y1 = oracle::random_vec(rng, g.size()), y2 = oracle::random_vec(rng, g.size());
        Buffer<double> gx(g.size()), gy(g.size()), d(g.size());
        grad_forward<double>(g, x.array(), gx, gy);
        div_backward<double>(g, y1.array(), y2.array(), d);
        Vec ax(2 * g.size()), y(2 * g.size());
        ax << gx.matrix(), gy.matrix();
        y << y1, y2;
        record(oracle::adjoint_gap(x, ax, y, -d.matrix()));
      }
      // transport with a random frozen flow
      {
        const FlowField v = random_flow(rng, g);
        const ImageSequence u(g, x.array());
        const ImageSequence y(g, oracle::random_vec(rng, g.size()).array());
        record(oracle::adjoint_gap(x, transport_apply(u, v).values.matrix(), y.values.matrix(),
                                   transport_adjoint(y, v).values.matrix()));
      }
      // time difference alone
      {
        const Vec y = oracle::random_vec(rng, g.size());
        Buffer<double> tx(g.size()), ty(g.size());
        time_forward<double>(g, x.array(), tx);
        time_forward_adjoint<double>(g, y.array(), ty);
        record(oracle::adjoint_gap(x, tx.matrix(), y, ty.matrix()));
      }
      for (const auto& [name, K] : ops) {
        const Grid r = K.range_grid(g);
        const Vec y = oracle::random_vec(rng, r.size());
        Buffer<double> kx(r.size()), kty(g.size());
        K.apply(g, x.array(), kx);
        K.adjoint(g, y.array(), kty);
        record(oracle::adjoint_gap(x, kx.matrix(), y, kty.matrix()));
      }
    }
  }
  o.detail << pairs << " checks, worst relative gap " << worst;
  o.require(worst <= 1e-10, "gap <= 1e-10");
}

void prox_oracles(Outcome& o) {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> U(-2, 2), S(0.01, 5), T(0.05, 1.5);
  double worst_data = 0.0, worst_shrink = 0.0;
  int branches[4] = {0, 0, 0, 0};
  const int n = 120;
  for (int k = 0; k < n; ++k) {
    Buffer<double> yt(1), f(1);
    yt[0] = U(rng);
    f[0] = U(rng);
    const double sg = S(rng);
    const long double y0 = yt[0], f0 = f[0], sl = sg;
    const double ref = static_cast<double>(oracle::golden_section(
        [&](long double z) { return 0.5L * (z - y0) * (z - y0) + sl * (0.5L * z * z + z * f0); }, -50, 50));
    worst_data = std::max(worst_data, std::abs(prox_l2_data(yt, f, sg)[0] - ref));

    const Eigen::Vector2d vt(U(rng), U(rng)), b(U(rng), U(rng));
    const double ut = U(rng), tau = T(rng);
    const auto r = shrink_affine_point(vt[0], vt[1], ut, b[0], b[1], tau);
    const Eigen::Vector2d g = oracle::shrink_grid_search(vt, ut, b, tau);
    worst_shrink = std::max(worst_shrink, (Eigen::Vector2d(r.v1, r.v2) - g).cwiseAbs().maxCoeff());
    ++branches[static_cast<int>(r.branch)];
  }

  // ball projections: idempotent and non-expansive
  double idem = 0.0, expansion = 0.0;
  for (int k = 0; k < n; ++k) {
    for (auto shape : {BlockShape::scalar, BlockShape::vector2, BlockShape::vector4}) {
      DualBlock a(shape, 16), b(shape, 16);
      a.values = 2.0 * oracle::random_vec(rng, a.values.size()).array();
      b.values = 2.0 * oracle::random_vec(rng, b.values.size()).array();
      const double radius = T(rng);
      const double before = (a.values - b.values).matrix().norm();
      project_ball(a, radius);
      project_ball(b, radius);
      expansion = std::max(expansion, (a.values - b.values).matrix().norm() - before);
      DualBlock again = a;
      project_ball(again, radius);
      idem = std::max(idem, (again.values - a.values).abs().maxCoeff());
    }
  }
  o.detail << n << " data-prox and " << n << " shrinkage instances (branches +" << branches[0] << " -"
           << branches[1] << " mid " << branches[2] << "); worst data " << worst_data << ", worst shrink "
           << worst_shrink << ", projection idempotence " << idem << ", expansion " << expansion;
  o.require(worst_data <= 1e-6 && worst_shrink <= 1e-6, "oracle agreement <= 1e-6");
  o.require(branches[0] > 0 && branches[1] > 0 && branches[2] > 0, "all shrinkage branches exercised");
  o.require(idem <= 1e-15 && expansion <= 1e-12, "projections idempotent and non-expansive");
}

void solver_descent(Outcome& o) {
  std::mt19937_64 rng(303);
  const Grid g = Grid::from_shape(16, 16, 3);
  double worst_u = -1e300, worst_v = -1e300;
  for (int k = 0; k < 20; ++k) {
    const ImageSequence f(g, 0.3 * oracle::random_vec(rng, g.size()).array() + 0.5);
    const ImageSequence u0(g, 0.3 * oracle::random_vec(rng, g.size()).array() + 0.5);
    const FlowField v0(g, 0.5 * oracle::random_vec(rng, g.size()).array(),
                       0.5 * oracle::random_vec(rng, g.size()).array());
    PDParamsU pu;
    pu.alpha = Buffer<double>::Constant(1, 0.03);
    pu.gamma = 1.0;
    pu.max_iters = 1000;
    const auto su = solve_u(f, ForwardOperator::identity(), v0, u0, pu);
    worst_u = std::max(worst_u, su.report.energy - energy_u(u0, f, ForwardOperator::identity(), v0, pu.alpha, 1.0));
    PDParamsV pv;
    pv.lambda = 0.07;
    pv.max_iters = 1000;
    const auto sv = solve_v(su.u, v0, pv);
    worst_v = std::max(worst_v, sv.report.energy - energy_v(v0, su.u, pv.lambda));
  }

  SyntheticScene s;
  s.width = s.height = 32;
  s.frames = 4;
  s.noise_variance = 0.002;
  const SceneData d = make_scene(s, 7);
  JointConfig c;
  c.max_outer = 8;
  c.max_iters_u = 2000;
  c.max_iters_v = 2000;
  BaselineParams bp;
  bp.max_iters = 2000;
  o.detail << "max energy increase u " << worst_u << ", v " << worst_v << " over 20 instances";
  o.require(worst_u <= 1e-8 && worst_v <= 1e-8, "subproblem descent within 1e-8");
  // Zero start (the plain algorithm) and the static-flow start used by the
  // experiments; the guard-free run is reported for comparison only.
  for (const auto& [init, monotone] : {std::pair{JointInit::zero, true}, std::pair{JointInit::static_flow, true},
                                       std::pair{JointInit::static_flow, false}}) {
    c.monotone = monotone;
    const JointResult r = run_joint(d.f, d.f.grid, c, init, bp);
    double worst = -1e300;
    int rejected = 0;
    for (std::size_t k = 0; k < r.trace.size(); ++k) {
      if (k > 0) worst = std::max(worst, r.trace[k].energy - r.trace[k - 1].energy);
      rejected += r.trace[k].u_rejected + r.trace[k].v_rejected;
    }
    o.detail << "; joint (" << to_string(init) << (monotone ? "" : ", no guard") << ") max increase " << worst
             << " over " << r.trace.size() << " outer iterations";
    if (monotone) {
      o.detail << ", " << rejected << " inner steps rejected";
      o.require(worst <= 1e-6, "joint descent within 1e-6 (" + to_string(init) + ")");
    }
  }
}

void rof_self_consistency(Outcome& o) {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> U(0, 1);
  Frame f(8, 8);
  for (Index k = 0; k < f.size(); ++k) f.data()[k] = U(rng);
  const BaselineParams standard;
  BaselineParams reference = standard;
  reference.max_iters = standard.max_iters * 100;
  reference.eps = standard.eps / 10;
  const Frame a = solve_rof_2d(f, 0.05, standard);
  const Frame b = solve_rof_2d(f, 0.05, reference);
  const double dist = std::sqrt((a - b).square().sum());
  o.detail << "L2 distance to the reference solve " << dist;
  o.require(dist <= 1e-4, "distance <= 1e-4");
}

void flow_recovery(Outcome& o) {
  SyntheticScene r;
  r.kind = SyntheticScene::Kind::translating_ramp;
  r.width = r.height = 16;
  r.frames = 3;
  r.velocity_x = 1.0;
  const SceneData ramp = make_scene(r, 1);
  const FlowField vr = solve_tvl1_flow(ramp.u_clean, 1e-3);
  double worst = 0.0;
  const Grid& g = vr.grid;
  for (Index t = 0; t < g.nt; ++t)
    for (Index j = 1; j < g.ny; ++j)
      for (Index i = 1; i < g.nx; ++i) worst = std::max(worst, std::abs(vr.v1[g.index(i, j, t)] - 1.0));

  SyntheticScene s;
  s.width = s.height = 32;
  s.frames = 3;
  const SceneData disc = make_scene(s, 1);
  const FlowField vd = solve_tvl1_flow(disc.u_clean, 0.1);
  const double e = aee(vd, disc.v_gt, 1);
  o.detail << "ramp max |v1 - 1| " << worst << "; disc AEE " << e;
  o.require(worst <= 0.05, "ramp within 0.05");
  o.require(e <= 0.1, "disc AEE <= 0.1");
}

ExperimentConfig synthetic_config(ExperimentKind kind, Index size, Index frames, const fs::path& out) {
  ExperimentConfig c;
  c.kind = kind;
  c.seed = 2024;
  c.output = out;
  c.data.scene.width = c.data.scene.height = size;
  c.data.scene.frames = frames;
  c.init = JointInit::multistart;
  c.joint.max_outer = 8;
  c.joint.max_iters_u = 2000;
  c.joint.max_iters_v = 2000;
  c.baseline.max_iters = 2000;
  return c;
}

const MetricRow& row(const ArtifactBundle& b, const std::string& method, double variance = -1) {
  for (const auto& r : b.table) {
    if (r.method == method && (variance < 0 || r.variance == variance)) return r;
  }
  throw std::runtime_error("missing table row " + method);
}

void paper_ordering(Outcome& o) {
  ExperimentConfig c = synthetic_config(ExperimentKind::comparison_table, 64, 4, scratch("ordering"));
  c.data.scene.noise_variance = 0.002;
  c.sweep_alpha = {0.01, 0.03, 0.05};
  c.sweep_beta = {0.05, 0.1};
  const ArtifactBundle b = run_experiment(c);
  const MetricRow& joint = row(b, "Joint");
  const MetricRow& den = row(b, "OF Denoised");
  const MetricRow& noisy = row(b, "OF Noisy");
  const MetricRow& rof = row(b, "ROF 2D");
  o.detail << "AEE joint " << joint.aee << " (alpha " << joint.alpha << ", beta " << joint.beta << "), OF-Denoised "
           << den.aee << ", OF-Noisy " << noisy.aee << "; PSNR joint " << joint.psnr << " dB, ROF-2D " << rof.psnr
           << " dB, ROF-2D+t " << row(b, "ROF 2D+t").psnr << " dB";
  o.require(joint.aee < den.aee, "joint AEE < OF-Denoised AEE");
  o.require(den.aee <= 1.05 * noisy.aee, "OF-Denoised AEE <~ OF-Noisy AEE");
  o.require(joint.psnr > rof.psnr, "joint PSNR > ROF-2D PSNR");
}

void noise_sweep(Outcome& o) {
  ExperimentConfig c = synthetic_config(ExperimentKind::noise_sweep, 32, 4, scratch("sweep"));
  c.sweep_alpha = {0.01, 0.03, 0.05};
  c.sweep_beta = {0.05, 0.1};
  c.sweep_lambda = {0.02, 0.05, 0.1, 0.15, 0.2};
  c.variances = {0.0, 0.01, 0.02, 0.03};
  const ArtifactBundle b = run_experiment(c);
  for (std::size_t k = 0; k < c.variances.size(); ++k) {
    const double var = c.variances[k];
    const double j = row(b, "Joint", var).aee;
    const double s = row(b, "Static", var).aee;
    o.detail << (k ? "; " : "") << "var " << var << ": joint " << j << " static " << s;
    o.require(j <= s, "joint <= static at variance " + std::to_string(var));
    if (k + 1 == c.variances.size()) o.require(j < s, "joint < static at the top level");
  }
}

void metric_oracles(Outcome& o) {
  const SsimParams p;
  o.require(p.c1 == 0.01 * 0.01 && p.c2 == 0.03 * 0.03, "default SSIM constants");
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> U(0, 1);
  Frame a(16, 16);
  for (Index k = 0; k < a.size(); ++k) a.data()[k] = U(rng);
  const double same = ssim(a, a);
  const Grid g = Grid::from_shape(6, 5, 3);
  const double ps = psnr(ImageSequence::constant(g, 1.0), ImageSequence::constant(g, 0.9));
  const double e = aee(FlowField::constant(g, 3.0, 4.0), FlowField(g));
  const Grid s = Grid::from_shape(2, 2, 2);
  const double angle = ae(FlowField(s), FlowField::constant(s, 1.0, 0.0));
  o.detail << "SSIM(u,u) " << same << ", PSNR " << ps << " dB, AEE " << e << ", AE - pi/4 "
           << angle - std::numbers::pi / 4;
  o.require(same == 1.0, "SSIM(u,u) = 1");
  o.require(std::abs(ps - 20.0) <= 1e-12, "PSNR = 20 dB");
  o.require(e == 5.0, "AEE = 5");
  o.require(std::abs(angle - std::numbers::pi / 4) <= 1e-12, "AE = pi/4");
}

void format_round_trips(Outcome& o) {
  const fs::path d = scratch("formats");
  std::mt19937_64 rng(606);
  std::normal_distribution<float> N(0.0f, 3.0f);
  FlowFrame f{Frame(9, 11), Frame(9, 11)};
  for (Index k = 0; k < f.v1.size(); ++k) {
    f.v1.data()[k] = N(rng);
    f.v2.data()[k] = N(rng);
  }
  save_flo(d / "a.flo", f);
  const FlowFrame g = load_flo(d / "a.flo");
  const bool flo_ok = (g.v1 == f.v1).all() && (g.v2 == f.v2).all();

  std::uniform_int_distribution<int> U(0, 65535);
  const Grid grid = Grid::from_shape(13, 7, 3);
  ImageSequence u(grid);
  for (Index k = 0; k < grid.size(); ++k) u.values[k] = U(rng) / 65535.0;
  save_sequence(d / "seq", u, 16);
  const bool png_ok = (load_sequence(d / "seq").values == u.values).all();

  save_flo(d / "one.flo", FlowFrame{Frame::Constant(1, 1, 0.25), Frame::Constant(1, 1, -2.0)});
  const auto bytes = fs::file_size(d / "one.flo");
  o.detail << ".flo round trip " << (flo_ok ? "exact" : "differs") << ", 16-bit PNG round trip "
           << (png_ok ? "exact" : "differs") << ", 1x1 .flo " << bytes << " bytes";
  o.require(flo_ok && png_ok, "bit-identical round trips");
  o.require(bytes == 20, "1x1 .flo is 20 bytes");
}

void inpainting(Outcome& o) {
  ExperimentConfig c = synthetic_config(ExperimentKind::temporal_inpaint, 32, 3, scratch("inpaint"));
  c.inserted_frames = 2;
  c.data.scene.velocity_x = 0.75;
  const ArtifactBundle b = run_experiment(c);
  const ImageSequence& u = b.joint->u;
  const double bg = c.data.scene.background;
  std::vector<double> cx;
  for (Index t = 0; t < u.grid.frames(); ++t) cx.push_back(centroid(Frame(u.frame(t)), bg)[0]);
  bool ok = true;
  o.detail << "centroid x per frame:";
  for (double x : cx) o.detail << " " << x;
  // interpolants t = 1, 2 between known 0 and 3, and t = 4, 5 between 3 and 6
  for (int seg = 0; seg < 2; ++seg) {
    const int k0 = 3 * seg, k1 = 3 * seg + 3;
    double prev = cx[static_cast<std::size_t>(k0)];
    for (int t = k0 + 1; t < k1; ++t) {
      const double x = cx[static_cast<std::size_t>(t)];
      const double lo = std::min(cx[static_cast<std::size_t>(k0)], cx[static_cast<std::size_t>(k1)]) - 0.25;
      const double hi = std::max(cx[static_cast<std::size_t>(k0)], cx[static_cast<std::size_t>(k1)]) + 0.25;
      ok = ok && x >= lo && x <= hi && x >= prev - 0.25;
      prev = x;
    }
    ok = ok && cx[static_cast<std::size_t>(k1)] >= prev - 0.25;
  }
  o.require(ok, "interpolant centroids advance monotonically between their neighbours within 0.25 px");
}

}  // namespace

int main() {
  criterion("adjointness", 5, adjointness);
  criterion("prox oracles", 10, prox_oracles);
  criterion("solver descent", 120, solver_descent);
  criterion("ROF self-consistency", 600, rof_self_consistency);
  criterion("flow recovery", 600, flow_recovery);
  criterion("paper ordering", 600, paper_ordering);
  criterion("noise sweep", 900, noise_sweep);
  criterion("metric oracles", 60, metric_oracles);
  criterion("format round trips", 60, format_round_trips);
  criterion("temporal inpainting", 600, inpainting);
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
