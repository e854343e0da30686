#include "tvflow/experiment.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "tvflow/io.hpp"
#include "tvflow/metrics.hpp"

namespace tvflow {

namespace {

namespace pt = boost::property_tree;
using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent streams derived from the root seed.
std::uint64_t noise_seed(std::uint64_t root) { return splitmix64(root ^ 0x6e6f697365ULL); }
std::uint64_t norm_seed(std::uint64_t root) { return splitmix64(root ^ 0x6e6f726dULL); }

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    try {
      std::size_t used = 0;
      const std::string trimmed = item.substr(b, item.find_last_not_of(" \t") - b + 1);
      out.push_back(std::stod(trimmed, &used));
      if (used != trimmed.size()) throw std::invalid_argument(trimmed);
    } catch (const std::exception&) {
      throw ConfigError("'" + key + "': not a number list: " + text);
    }
  }
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + fmt(v[k]);
  return s;
}

template <typename T>
T get(const pt::ptree& tree, const std::string& key, T fallback) {
  const auto node = tree.get_child_optional(pt::ptree::path_type(key, '.'));
  if (!node) return fallback;
  const std::string text = node->get_value<std::string>();
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (text == "true" || text == "1" || text == "yes") return true;
      if (text == "false" || text == "0" || text == "no") return false;
      throw std::invalid_argument(text);
    } else if constexpr (std::is_same_v<T, std::string>) {
      return text;
    } else if constexpr (std::is_floating_point_v<T>) {
      std::size_t used = 0;
      const T v = static_cast<T>(std::stod(text, &used));
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    } else {
      std::size_t used = 0;
      const long long v = std::stoll(text, &used, 0);
      if (used != text.size()) throw std::invalid_argument(text);
      return static_cast<T>(v);
    }
  } catch (const std::invalid_argument&) {
    throw ConfigError("'" + key + "': cannot parse value '" + text + "'");
  } catch (const std::out_of_range&) {
    throw ConfigError("'" + key + "': value out of range '" + text + "'");
  }
}

ExperimentKind parse_kind(const std::string& s) {
  for (auto k : {ExperimentKind::denoise_joint, ExperimentKind::single_solve, ExperimentKind::noise_sweep,
                 ExperimentKind::comparison_table, ExperimentKind::temporal_inpaint}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("'experiment.kind': unknown experiment '" + s + "'");
}

JointInit parse_init(const std::string& s) {
  for (auto k : {JointInit::zero, JointInit::static_flow, JointInit::denoised_flow, JointInit::multistart}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("'model.init': unknown initialization '" + s + "'");
}

SyntheticScene::Kind parse_scene(const std::string& s) {
  if (s == "translating_disc") return SyntheticScene::Kind::translating_disc;
  if (s == "translating_ramp") return SyntheticScene::Kind::translating_ramp;
  if (s == "warped_from_flow") return SyntheticScene::Kind::warped_from_flow;
  throw ConfigError("'data.scene': unknown scene '" + s + "'");
}

std::string scene_name(SyntheticScene::Kind k) {
  switch (k) {
    case SyntheticScene::Kind::translating_disc: return "translating_disc";
    case SyntheticScene::Kind::translating_ramp: return "translating_ramp";
    case SyntheticScene::Kind::warped_from_flow: return "warped_from_flow";
  }
  return "?";
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

// Runs fn(k) for k in [0, n) on the worker pool; the first failure is
// rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
  if (workers <= 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < n; k = next++) {
        try {
          fn(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// Input data of one experiment.
struct Problem {
  ImageSequence f;
  std::optional<ImageSequence> clean;
  std::optional<FlowField> v_gt;
  Grid domain;
};

SyntheticScene scene_for(const ExperimentConfig& c) {
  SyntheticScene s = c.data.scene;
  if (s.kind == SyntheticScene::Kind::warped_from_flow) {
    s.base = dequantize(read_gray(c.data.base_image));
    const FlowFrame flow = load_flo(c.data.base_flow);
    s.flow_x = flow.v1;
    s.flow_y = flow.v2;
  }
  return s;
}

// Clean data, ground truth and degraded data with the given noise variance.
Problem make_problem(const ExperimentConfig& c, const ForwardOperator& K, double variance) {
  Problem p;
  if (c.data.synthetic) {
    SyntheticScene s = scene_for(c);
    s.noise_variance = 0.0;
    SceneData d = make_scene(s, 0);
    p.domain = d.u_clean.grid;
    p.f = add_gaussian_noise(K.apply(d.u_clean), variance, noise_seed(c.seed));
    p.clean = std::move(d.u_clean);
    p.v_gt = std::move(d.v_gt);
    return p;
  }
  if (!c.data.clean.empty()) p.clean = load_sequence(c.data.clean);
  if (!c.data.flow.empty()) p.v_gt = load_flow_sequence(c.data.flow);
  if (!c.data.frames.empty()) {
    p.f = load_sequence(c.data.frames);
    if (variance > 0) p.f = add_gaussian_noise(p.f, variance, noise_seed(c.seed));
  } else if (p.clean) {
    p.f = add_gaussian_noise(K.apply(*p.clean), variance, noise_seed(c.seed));
  } else {
    throw ConfigError("'data': neither frames nor clean frames given");
  }
  p.domain = p.clean ? p.clean->grid : p.f.grid;
  if (p.v_gt) require_same_grid(p.v_gt->grid, p.domain, "ground-truth flow");
  require_same_grid(K.range_grid(p.domain), p.f.grid, "data");
  return p;
}

MetricRow evaluate(const std::string& method, double alpha, double beta, double variance, const Problem& p,
                   const ImageSequence* u, const FlowField* v) {
  MetricRow r{method, alpha, beta, variance, kNaN, kNaN, kNaN, kNaN};
  if (u && p.clean) {
    r.ssim = ssim(*p.clean, *u);
    r.psnr = psnr(*p.clean, *u);
  }
  if (v && p.v_gt) {
    r.aee = aee(*v, *p.v_gt);
    r.ae = ae(*v, *p.v_gt);
  }
  return r;
}

JointConfig joint_with(const ExperimentConfig& c, double alpha, double beta) {
  JointConfig j = c.joint;
  j.alpha = Buffer<double>::Constant(1, alpha);
  j.beta = beta;
  return j;
}

std::vector<double> grid_or(const std::vector<double>& grid, double fallback) {
  return grid.empty() ? std::vector<double>{fallback} : grid;
}

// Lower is better for AEE, higher for PSNR; NaN never wins.
const MetricRow* best_row(const std::vector<MetricRow>& rows, const std::string& method, bool by_aee,
                          double variance = kNaN) {
  const MetricRow* best = nullptr;
  for (const auto& r : rows) {
    if (r.method != method) continue;
    if (!std::isnan(variance) && r.variance != variance) continue;
    const double m = by_aee ? r.aee : -r.psnr;
    if (std::isnan(m)) continue;
    if (!best || m < (by_aee ? best->aee : -best->psnr)) best = &r;
  }
  return best;
}

struct Output {
  ArtifactBundle& bundle;
  std::mutex mutex;

  fs::path path(const std::string& name) {
    std::lock_guard<std::mutex> lock(mutex);
    const fs::path p = bundle.directory / name;
    bundle.files.push_back(p);
    return p;
  }
};

void write_flow_outputs(Output& out, const std::string& dir, const FlowField& v) {
  const fs::path d = out.path(dir);
  save_flow_sequence(d, v);
  for (Index t = 0; t < v.grid.nt; ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "flow_%03ld.png", static_cast<long>(t));
    write_rgb_png(d / name, flow_to_color(flow_frame(v, t)));
  }
}

json row_json(const MetricRow& r) {
  auto num = [](double x) { return std::isnan(x) ? json(nullptr) : json(x); };
  return {{"method", r.method}, {"alpha", r.alpha}, {"beta", r.beta}, {"variance", r.variance},
          {"ssim", num(r.ssim)}, {"psnr", std::isinf(r.psnr) ? json("inf") : num(r.psnr)},
          {"aee", num(r.aee)},   {"ae", num(r.ae)}};
}

json trace_json(const std::vector<OuterRecord>& trace) {
  json a = json::array();
  for (const auto& r : trace) {
    a.push_back({{"outer_iter", r.outer_iter}, {"err_main", r.err_main}, {"energy", r.energy},
                 {"inner_iters_u", r.inner_iters_u}, {"inner_iters_v", r.inner_iters_v},
                 {"u_rejected", r.u_rejected}, {"v_rejected", r.v_rejected}});
  }
  return a;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path.string());
  os << j.dump(2) << "\n";
}

// Start flow for one of the flow-based initializations, computed on the given
// sequence (possibly framewise denoised first).
FlowField start_flow(JointInit which, const ImageSequence& f, const JointConfig& joint,
                     const BaselineParams& baseline) {
  const double lambda = joint.beta / joint.gamma;
  if (which == JointInit::static_flow) return solve_tvl1_flow(f, lambda, baseline);
  const Buffer<double> a = expand_frame_weights(joint.alpha, f.grid.frames());
  ImageSequence den = f;
  for (Index t = 0; t < f.grid.frames(); ++t) {
    if (a[t] > 0) den.frame(t) = solve_rof_2d(Frame(f.frame(t)), a[t], baseline);
  }
  return solve_tvl1_flow(den, lambda, baseline);
}

JointResult run_joint_with(const ImageSequence& f, const Grid& domain, const JointConfig& joint, JointInit init,
                           const std::function<FlowField(JointInit)>& flow0, JointInit* chosen) {
  if (chosen) *chosen = init;
  if (init == JointInit::zero) return solve_joint(f, joint, ImageSequence(domain), FlowField(domain));
  if (init != JointInit::multistart) return solve_joint(f, joint, std::nullopt, flow0(init));
  JointResult a = solve_joint(f, joint, std::nullopt, flow0(JointInit::static_flow));
  JointResult b = solve_joint(f, joint, std::nullopt, flow0(JointInit::denoised_flow));
  const bool pick_b = b.trace.back().energy < a.trace.back().energy;
  if (chosen) *chosen = pick_b ? JointInit::denoised_flow : JointInit::static_flow;
  return pick_b ? std::move(b) : std::move(a);
}

void run_single(const ExperimentConfig& c, ArtifactBundle& bundle, Output& out, json& summary) {
  const ForwardOperator K = c.op.build();
  const Problem p = make_problem(c, K, c.data.synthetic ? c.data.scene.noise_variance : 0.0);
  JointConfig j = c.joint;
  j.K = K;
  if (c.kind == ExperimentKind::single_solve) j.max_outer = 1;
  JointInit chosen = c.init;
  JointResult r = run_joint(p.f, p.domain, j, c.init, c.baseline, &chosen);

  save_sequence(out.path("frames"), r.u);
  if (p.f.grid == p.domain) save_sequence(out.path("data"), p.f);
  write_flow_outputs(out, "flow", r.v);
  write_trace_csv(out.path("trace.csv"), r.trace);
  const MetricRow row = evaluate("Joint", j.alpha[0], j.beta, 0.0, p, &r.u, &r.v);
  bundle.cells = {row};
  bundle.table = {row};
  write_metrics_csv(out.path("metrics.csv"), bundle.table);
  summary["init"] = to_string(chosen);
  summary["converged"] = r.converged;
  summary["trace"] = trace_json(r.trace);
  summary["metrics"] = row_json(row);
  bundle.joint = std::move(r);
}

void run_comparison(const ExperimentConfig& c, ArtifactBundle& bundle, Output& out, json& summary) {
  if (c.op.kind != "identity") throw ConfigError("comparison_table requires the identity operator");
  const Problem p = make_problem(c, ForwardOperator::identity(),
                                 c.data.synthetic ? c.data.scene.noise_variance : 0.0);
  const auto alphas = grid_or(c.sweep_alpha, c.joint.alpha[0]);
  const auto betas = grid_or(c.sweep_beta, c.joint.beta);
  const double var = c.data.synthetic ? c.data.scene.noise_variance : 0.0;

  // Cell list: (method, alpha, beta).
  struct Cell {
    std::string method;
    double alpha;
    double beta;
  };
  std::vector<Cell> cells;
  for (double a : alphas) cells.push_back({"ROF 2D", a, kNaN});
  for (double a : alphas) cells.push_back({"ROF 2D+t", a, kNaN});
  for (double b : betas) cells.push_back({"OF Noisy", kNaN, b});
  for (double a : alphas)
    for (double b : betas) cells.push_back({"OF Denoised", a, b});
  for (double a : alphas)
    for (double b : betas) cells.push_back({"Joint", a, b});

  std::vector<MetricRow> rows(cells.size());
  std::vector<std::optional<JointResult>> joints(cells.size());
  parallel_for(cells.size(), [&](std::size_t k) {
    const Cell& cell = cells[k];
    const double lambda = cell.beta / c.joint.gamma;
    try {
      if (cell.method == "ROF 2D") {
        const ImageSequence u = solve_rof_2d(p.f, cell.alpha, c.baseline);
        rows[k] = evaluate(cell.method, cell.alpha, cell.beta, var, p, &u, nullptr);
      } else if (cell.method == "ROF 2D+t") {
        const ImageSequence u = solve_rof_2dt(p.f, cell.alpha, c.baseline);
        rows[k] = evaluate(cell.method, cell.alpha, cell.beta, var, p, &u, nullptr);
      } else if (cell.method == "OF Noisy") {
        const FlowField v = solve_tvl1_flow(p.f, lambda, c.baseline);
        rows[k] = evaluate(cell.method, cell.alpha, cell.beta, var, p, nullptr, &v);
      } else if (cell.method == "OF Denoised") {
        const FlowField v = solve_tvl1_flow(solve_rof_2d(p.f, cell.alpha, c.baseline), lambda, c.baseline);
        rows[k] = evaluate(cell.method, cell.alpha, cell.beta, var, p, nullptr, &v);
      } else {
        JointResult r = run_joint(p.f, p.domain, joint_with(c, cell.alpha, cell.beta), c.init, c.baseline);
        rows[k] = evaluate(cell.method, cell.alpha, cell.beta, var, p, &r.u, &r.v);
        joints[k] = std::move(r);
      }
    } catch (const DivergenceError& e) {
      throw DivergenceError(cell.method + " (alpha=" + fmt(cell.alpha) + ", beta=" + fmt(cell.beta) +
                                "): " + e.message(),
                            e.iteration());
    }
  });

  bundle.cells = rows;
  for (const char* m : {"Joint", "ROF 2D", "ROF 2D+t", "OF Noisy", "OF Denoised"}) {
    const std::string method = m;
    const bool by_aee = method == "Joint" || method == "OF Noisy" || method == "OF Denoised";
    const MetricRow* best = best_row(rows, method, by_aee);
    if (!best) best = best_row(rows, method, !by_aee);
    if (best) bundle.table.push_back(*best);
    else bundle.table.push_back({method, kNaN, kNaN, var, kNaN, kNaN, kNaN, kNaN});
  }
  write_metrics_csv(out.path("cells.csv"), bundle.cells);
  write_metrics_csv(out.path("table.csv"), bundle.table);

  // Outputs of the selected joint run.
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (!joints[k] || rows[k].alpha != bundle.table[0].alpha || rows[k].beta != bundle.table[0].beta) continue;
    save_sequence(out.path("joint_frames"), joints[k]->u);
    write_flow_outputs(out, "joint_flow", joints[k]->v);
    write_trace_csv(out.path("joint_trace.csv"), joints[k]->trace);
    bundle.joint = std::move(joints[k]);
    break;
  }
  json t = json::array();
  for (const auto& r : bundle.table) t.push_back(row_json(r));
  summary["table"] = t;
}

void run_noise_sweep(const ExperimentConfig& c, ArtifactBundle& bundle, Output& out, json& summary) {
  if (c.op.kind != "identity") throw ConfigError("noise_sweep requires the identity operator");
  const auto alphas = grid_or(c.sweep_alpha, c.joint.alpha[0]);
  const auto betas = grid_or(c.sweep_beta, c.joint.beta);
  const auto lambdas = grid_or(c.sweep_lambda, c.joint.beta / c.joint.gamma);

  std::vector<Problem> problems;
  for (double var : c.variances) problems.push_back(make_problem(c, ForwardOperator::identity(), var));
  if (!problems.front().v_gt) throw ConfigError("noise_sweep needs ground-truth flow");

  struct Cell {
    std::size_t level;
    bool joint;
    double alpha;
    double beta;
  };
  std::vector<Cell> cells;
  for (std::size_t l = 0; l < c.variances.size(); ++l) {
    for (double lam : lambdas) cells.push_back({l, false, kNaN, lam});
    for (double a : alphas)
      for (double b : betas) cells.push_back({l, true, a, b});
  }
  std::vector<MetricRow> rows(cells.size());
  parallel_for(cells.size(), [&](std::size_t k) {
    const Cell& cell = cells[k];
    const Problem& p = problems[cell.level];
    const double var = c.variances[cell.level];
    try {
      if (cell.joint) {
        const JointResult r =
            run_joint(p.f, p.domain, joint_with(c, cell.alpha, cell.beta), c.init, c.baseline);
        rows[k] = evaluate("Joint", cell.alpha, cell.beta, var, p, &r.u, &r.v);
      } else {
        const FlowField v = solve_tvl1_flow(p.f, cell.beta, c.baseline);
        rows[k] = evaluate("Static", cell.alpha, cell.beta, var, p, nullptr, &v);
      }
    } catch (const DivergenceError& e) {
      throw DivergenceError("noise level " + fmt(var) + ": " + e.message(), e.iteration());
    }
  });
  bundle.cells = rows;
  for (double var : c.variances) {
    for (const char* m : {"Joint", "Static"}) {
      if (const MetricRow* b = best_row(rows, m, true, var)) bundle.table.push_back(*b);
    }
  }
  write_metrics_csv(out.path("cells.csv"), bundle.cells);
  write_metrics_csv(out.path("noise_sweep.csv"), bundle.table);
  json t = json::array();
  for (const auto& r : bundle.table) t.push_back(row_json(r));
  summary["noise_sweep"] = t;
}

void run_inpaint(const ExperimentConfig& c, ArtifactBundle& bundle, Output& out, json& summary) {
  const int m = c.inserted_frames;
  ImageSequence known_clean;
  std::optional<ImageSequence> full_clean;
  std::optional<FlowField> full_gt;
  ImageSequence known;
  if (c.data.synthetic) {
    // Fine scene with m + 1 steps per known step; every (m + 1)-th frame is observed.
    SyntheticScene s = scene_for(c);
    if (s.kind == SyntheticScene::Kind::warped_from_flow) {
      throw ConfigError("temporal_inpaint supports translating scenes only");
    }
    const Index n_known = s.frames;
    s.frames = (n_known - 1) * (m + 1) + 1;
    s.velocity_x /= (m + 1);
    s.velocity_y /= (m + 1);
    s.noise_variance = 0.0;
    SceneData d = make_scene(s, 0);
    const ImageSequence noisy = add_gaussian_noise(d.u_clean, c.data.scene.noise_variance, noise_seed(c.seed));
    const Grid kg = Grid::from_shape(d.u_clean.grid.width(), d.u_clean.grid.height(), n_known);
    known = ImageSequence(kg);
    for (Index t = 0; t < n_known; ++t) known.frame(t) = noisy.frame(t * (m + 1));
    full_clean = std::move(d.u_clean);
    full_gt = std::move(d.v_gt);
  } else {
    known = load_sequence(c.data.frames);
  }

  const InpaintingProblem ip = make_inpainting_problem(known, m, c.joint.alpha[0]);
  JointConfig j = c.joint;
  j.alpha = ip.alpha;
  j.K = c.op.build().with_frame_mask(ip.known);
  // Flow starts come from the known frames alone: the flow between known
  // frames k and k + 1, divided by the number of steps, on every fine frame
  // in between.
  auto flow0 = [&](JointInit which) {
    JointConfig jk = c.joint;
    jk.alpha = Buffer<double>::Constant(1, c.joint.alpha[0]);
    const FlowField vk = start_flow(which, known, jk, c.baseline);
    FlowField v(ip.f.grid);
    const Index fs = v.grid.frame_size();
    for (Index t = 0; t < v.grid.nt; ++t) {
      const Index k = t / (m + 1);
      v.v1.segment(t * fs, fs) = vk.v1.segment(k * fs, fs) / (m + 1);
      v.v2.segment(t * fs, fs) = vk.v2.segment(k * fs, fs) / (m + 1);
    }
    return v;
  };
  JointInit chosen = c.init;
  JointResult r = run_joint_with(ip.f, ip.f.grid, j, c.init, flow0, &chosen);

  save_sequence(out.path("frames"), r.u);
  save_sequence(out.path("data"), ip.f);
  {
    const fs::path d = out.path("interpolants");
    fs::create_directories(d);
    for (Index t = 0; t < r.u.grid.frames(); ++t) {
      if (ip.known[static_cast<std::size_t>(t)]) continue;
      char name[32];
      std::snprintf(name, sizeof name, "frame_%03ld.png", static_cast<long>(t));
      write_gray(d / name, quantize(Frame(r.u.frame(t)), 16));
    }
  }
  write_flow_outputs(out, "flow", r.v);
  write_trace_csv(out.path("trace.csv"), r.trace);
  if (full_clean) {
    Problem p{ip.f, full_clean, full_gt, ip.f.grid};
    bundle.table = {evaluate("Joint", c.joint.alpha[0], c.joint.beta, c.data.scene.noise_variance, p, &r.u, &r.v)};
    bundle.cells = bundle.table;
    write_metrics_csv(out.path("metrics.csv"), bundle.table);
    summary["metrics"] = row_json(bundle.table.front());
  }
  json mask = json::array();
  for (bool b : ip.known) mask.push_back(b);
  summary["known_frames"] = mask;
  summary["init"] = to_string(chosen);
  summary["trace"] = trace_json(r.trace);
  bundle.joint = std::move(r);
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::denoise_joint: return "denoise_joint";
    case ExperimentKind::single_solve: return "single_solve";
    case ExperimentKind::noise_sweep: return "noise_sweep";
    case ExperimentKind::comparison_table: return "comparison_table";
    case ExperimentKind::temporal_inpaint: return "temporal_inpaint";
  }
  return "?";
}

std::string to_string(JointInit init) {
  switch (init) {
    case JointInit::zero: return "zero";
    case JointInit::static_flow: return "static_flow";
    case JointInit::denoised_flow: return "denoised_flow";
    case JointInit::multistart: return "multistart";
  }
  return "?";
}

ForwardOperator ForwardOperatorSpec::build() const {
  if (kind == "identity") return ForwardOperator::identity();
  if (kind == "box_blur") return ForwardOperator::box_blur(radius);
  if (kind == "gaussian_blur") return ForwardOperator::gaussian_blur(sigma, radius);
  if (kind == "subsample") return ForwardOperator::subsample(factor);
  throw ConfigError("'operator.kind': unknown operator '" + kind + "'");
}

void ExperimentConfig::validate() const {
  joint.validate();
  if (joint.alpha.size() != 1) throw ConfigError("'model.alpha': expected a single value");
  auto in_range = [&](const char* key, double x, double lo, double hi) {
    auto g = [](double v) { std::ostringstream os; os << v; return os.str(); };
    if (!allow_out_of_range && (x < lo || x > hi)) {
      throw ConfigError(std::string("'") + key + "': " + g(x) + " outside [" + g(lo) + ", " + g(hi) +
                        "]; set model.allow_out_of_range = true to override");
    }
  };
  in_range("model.alpha", joint.alpha[0], 0.01, 0.05);
  in_range("model.beta", joint.beta, 0.05, 0.1);
  for (double a : sweep_alpha) in_range("sweep.alpha", a, 0.01, 0.05);
  for (double b : sweep_beta) in_range("sweep.beta", b, 0.05, 0.1);
  for (double l : sweep_lambda) {
    if (!(l > 0)) throw ConfigError("'sweep.lambda': entries must be positive");
  }
  for (double v : variances) {
    if (!(v >= 0)) throw ConfigError("'sweep.variances': entries must be >= 0");
  }
  if (variances.empty()) throw ConfigError("'sweep.variances': empty");
  if (inserted_frames < 0) throw ConfigError("'inpaint.inserted_frames': must be >= 0");
  if (baseline.max_iters < 1 || !(baseline.eps > 0)) throw ConfigError("'baseline': invalid iteration limits");
  op.build();
  if (data.synthetic) {
    if (data.scene.noise_variance < 0) throw ConfigError("'data.noise_variance': must be >= 0");
    if (data.scene.kind == SyntheticScene::Kind::warped_from_flow) {
      if (!fs::exists(data.base_image)) throw ConfigError("'data.base_image': not found: " + data.base_image.string());
      if (!fs::exists(data.base_flow)) throw ConfigError("'data.base_flow': not found: " + data.base_flow.string());
    } else if (data.scene.width < 2 || data.scene.height < 2 || data.scene.frames < 2) {
      throw ConfigError("'data': scene needs at least 2x2 pixels and 2 frames");
    }
  } else {
    for (const auto& [key, p] : {std::pair{"data.frames", data.frames}, std::pair{"data.clean", data.clean},
                                 std::pair{"data.flow", data.flow}}) {
      if (!p.empty() && !fs::is_directory(p)) throw ConfigError(std::string("'") + key + "': not a directory: " + p.string());
    }
    if (data.frames.empty() && data.clean.empty()) throw ConfigError("'data': frames or clean required");
  }
}

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir) {
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  static const std::map<std::string, std::vector<std::string>> known = {
      {"experiment", {"version", "kind", "seed", "output"}},
      {"data",
       {"source", "scene", "width", "height", "frames", "noise_variance", "velocity_x", "velocity_y",
        "disc_radius", "disc_edge", "disc_intensity", "background", "slope_x", "slope_y", "offset",
        "base_image", "base_flow", "frames_dir", "clean_dir", "flow_dir"}},
      {"model",
       {"alpha", "beta", "gamma", "eps_main", "eps_u", "eps_v", "max_outer", "max_iters_u", "max_iters_v",
        "step_factor", "warm_start_duals", "monotone", "init", "allow_out_of_range"}},
      {"operator", {"kind", "radius", "sigma", "factor"}},
      {"baseline", {"max_iters", "eps"}},
      {"sweep", {"alpha", "beta", "lambda", "variances"}},
      {"inpaint", {"inserted_frames"}},
  };
  for (const auto& [section, body] : tree) {
    const auto it = known.find(section);
    if (it == known.end()) throw ConfigError("unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end()) {
        throw ConfigError("unknown key '" + section + "." + key + "'");
      }
    }
  }
  const int version = get<int>(tree, "experiment.version", -1);
  if (version != kConfigVersion) {
    throw ConfigError("'experiment.version': expected " + std::to_string(kConfigVersion) + ", got " +
                      std::to_string(version));
  }

  ExperimentConfig c;
  c.kind = parse_kind(get<std::string>(tree, "experiment.kind", to_string(c.kind)));
  c.seed = get<std::uint64_t>(tree, "experiment.seed", c.seed);
  c.output = resolve(base_dir, get<std::string>(tree, "experiment.output", c.output.string()));

  const std::string source = get<std::string>(tree, "data.source", "synthetic");
  if (source != "synthetic" && source != "directory") throw ConfigError("'data.source': synthetic or directory");
  c.data.synthetic = source == "synthetic";
  SyntheticScene& s = c.data.scene;
  s.kind = parse_scene(get<std::string>(tree, "data.scene", scene_name(s.kind)));
  s.width = get<Index>(tree, "data.width", s.width);
  s.height = get<Index>(tree, "data.height", s.height);
  s.frames = get<Index>(tree, "data.frames", s.frames);
  s.noise_variance = get<double>(tree, "data.noise_variance", s.noise_variance);
  s.velocity_x = get<double>(tree, "data.velocity_x", s.velocity_x);
  s.velocity_y = get<double>(tree, "data.velocity_y", s.velocity_y);
  s.disc_radius = get<double>(tree, "data.disc_radius", s.disc_radius);
  s.disc_edge = get<double>(tree, "data.disc_edge", s.disc_edge);
  s.disc_intensity = get<double>(tree, "data.disc_intensity", s.disc_intensity);
  s.background = get<double>(tree, "data.background", s.background);
  s.slope_x = get<double>(tree, "data.slope_x", s.slope_x);
  s.slope_y = get<double>(tree, "data.slope_y", s.slope_y);
  s.offset = get<double>(tree, "data.offset", s.offset);
  c.data.base_image = resolve(base_dir, get<std::string>(tree, "data.base_image", ""));
  c.data.base_flow = resolve(base_dir, get<std::string>(tree, "data.base_flow", ""));
  c.data.frames = resolve(base_dir, get<std::string>(tree, "data.frames_dir", ""));
  c.data.clean = resolve(base_dir, get<std::string>(tree, "data.clean_dir", ""));
  c.data.flow = resolve(base_dir, get<std::string>(tree, "data.flow_dir", ""));

  JointConfig& j = c.joint;
  const auto alpha = parse_list("model.alpha", get<std::string>(tree, "model.alpha", fmt(j.alpha[0])));
  if (alpha.size() != 1) throw ConfigError("'model.alpha': expected a single value");
  j.alpha = Buffer<double>::Constant(1, alpha[0]);
  j.beta = get<double>(tree, "model.beta", j.beta);
  j.gamma = get<double>(tree, "model.gamma", j.gamma);
  j.eps_main = get<double>(tree, "model.eps_main", j.eps_main);
  j.eps_u = get<double>(tree, "model.eps_u", j.eps_u);
  j.eps_v = get<double>(tree, "model.eps_v", j.eps_v);
  j.max_outer = get<int>(tree, "model.max_outer", j.max_outer);
  j.max_iters_u = get<int>(tree, "model.max_iters_u", j.max_iters_u);
  j.max_iters_v = get<int>(tree, "model.max_iters_v", j.max_iters_v);
  j.step_factor = get<double>(tree, "model.step_factor", j.step_factor);
  j.warm_start_duals = get<bool>(tree, "model.warm_start_duals", j.warm_start_duals);
  j.monotone = get<bool>(tree, "model.monotone", j.monotone);
  c.init = parse_init(get<std::string>(tree, "model.init", to_string(c.init)));
  c.allow_out_of_range = get<bool>(tree, "model.allow_out_of_range", c.allow_out_of_range);

  c.op.kind = get<std::string>(tree, "operator.kind", c.op.kind);
  c.op.radius = get<Index>(tree, "operator.radius", c.op.radius);
  c.op.sigma = get<double>(tree, "operator.sigma", c.op.sigma);
  c.op.factor = get<Index>(tree, "operator.factor", c.op.factor);

  c.baseline.max_iters = get<int>(tree, "baseline.max_iters", c.baseline.max_iters);
  c.baseline.eps = get<double>(tree, "baseline.eps", c.baseline.eps);
  c.baseline.step_factor = j.step_factor;

  c.sweep_alpha = parse_list("sweep.alpha", get<std::string>(tree, "sweep.alpha", ""));
  c.sweep_beta = parse_list("sweep.beta", get<std::string>(tree, "sweep.beta", ""));
  c.sweep_lambda = parse_list("sweep.lambda", get<std::string>(tree, "sweep.lambda", ""));
  const std::string vars = get<std::string>(tree, "sweep.variances", "");
  if (!vars.empty()) c.variances = parse_list("sweep.variances", vars);
  c.inserted_frames = get<int>(tree, "inpaint.inserted_frames", c.inserted_frames);

  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string to_ini(const ExperimentConfig& c) {
  std::ostringstream os;
  const SyntheticScene& s = c.data.scene;
  const JointConfig& j = c.joint;
  os << "[experiment]\n"
     << "version = " << kConfigVersion << "\n"
     << "kind = " << to_string(c.kind) << "\n"
     << "seed = " << c.seed << "\n"
     << "output = " << c.output.string() << "\n\n";
  os << "[data]\n"
     << "source = " << (c.data.synthetic ? "synthetic" : "directory") << "\n"
     << "scene = " << scene_name(s.kind) << "\n"
     << "width = " << s.width << "\nheight = " << s.height << "\nframes = " << s.frames << "\n"
     << "noise_variance = " << fmt(s.noise_variance) << "\n"
     << "velocity_x = " << fmt(s.velocity_x) << "\nvelocity_y = " << fmt(s.velocity_y) << "\n"
     << "disc_radius = " << fmt(s.disc_radius) << "\ndisc_edge = " << fmt(s.disc_edge) << "\n"
     << "disc_intensity = " << fmt(s.disc_intensity) << "\nbackground = " << fmt(s.background) << "\n"
     << "slope_x = " << fmt(s.slope_x) << "\nslope_y = " << fmt(s.slope_y) << "\noffset = " << fmt(s.offset)
     << "\n";
  for (const auto& [key, p] : {std::pair{"base_image", c.data.base_image}, std::pair{"base_flow", c.data.base_flow},
                               std::pair{"frames_dir", c.data.frames}, std::pair{"clean_dir", c.data.clean},
                               std::pair{"flow_dir", c.data.flow}}) {
    if (!p.empty()) os << key << " = " << p.string() << "\n";
  }
  os << "\n[model]\n"
     << "alpha = " << fmt(j.alpha[0]) << "\nbeta = " << fmt(j.beta) << "\ngamma = " << fmt(j.gamma) << "\n"
     << "eps_main = " << fmt(j.eps_main) << "\neps_u = " << fmt(j.eps_u) << "\neps_v = " << fmt(j.eps_v) << "\n"
     << "max_outer = " << j.max_outer << "\nmax_iters_u = " << j.max_iters_u
     << "\nmax_iters_v = " << j.max_iters_v << "\n"
     << "step_factor = " << fmt(j.step_factor) << "\n"
     << "warm_start_duals = " << (j.warm_start_duals ? "true" : "false") << "\n"
     << "monotone = " << (j.monotone ? "true" : "false") << "\n"
     << "init = " << to_string(c.init) << "\n"
     << "allow_out_of_range = " << (c.allow_out_of_range ? "true" : "false") << "\n\n";
  os << "[operator]\nkind = " << c.op.kind << "\nradius = " << c.op.radius << "\nsigma = " << fmt(c.op.sigma)
     << "\nfactor = " << c.op.factor << "\n\n";
  os << "[baseline]\nmax_iters = " << c.baseline.max_iters << "\neps = " << fmt(c.baseline.eps) << "\n\n";
  os << "[sweep]\n";
  if (!c.sweep_alpha.empty()) os << "alpha = " << join(c.sweep_alpha) << "\n";
  if (!c.sweep_beta.empty()) os << "beta = " << join(c.sweep_beta) << "\n";
  if (!c.sweep_lambda.empty()) os << "lambda = " << join(c.sweep_lambda) << "\n";
  os << "variances = " << join(c.variances) << "\n\n";
  os << "[inpaint]\ninserted_frames = " << c.inserted_frames << "\n";
  return os.str();
}

int worker_count() {
  const char* env = std::getenv("TVFLOW_WORKERS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError(std::string("TVFLOW_WORKERS must be a positive integer, got '") + env + "'");
  return static_cast<int>(std::min<long>(n, 256));
}

JointResult run_joint(const ImageSequence& f, const Grid& domain, const JointConfig& joint, JointInit init,
                      const BaselineParams& baseline, JointInit* chosen) {
  if (init != JointInit::zero && !(f.grid == domain)) {
    throw ConfigError("flow initialization needs data on the image grid");
  }
  return run_joint_with(
      f, domain, joint, init, [&](JointInit which) { return start_flow(which, f, joint, baseline); }, chosen);
}

InpaintingProblem make_inpainting_problem(const ImageSequence& known_frames, int inserted, double alpha) {
  if (inserted < 0) throw ContractViolation("make_inpainting_problem: negative frame count");
  const Grid& kg = known_frames.grid;
  const Index frames = (kg.frames() - 1) * (inserted + 1) + 1;
  const Grid g = Grid::from_shape(kg.width(), kg.height(), frames);
  InpaintingProblem p{ImageSequence(g), std::vector<bool>(static_cast<std::size_t>(frames), false),
                      Buffer<double>::Zero(frames)};
  for (Index t = 0; t < kg.frames(); ++t) {
    const Index ft = t * (inserted + 1);
    p.f.frame(ft) = known_frames.frame(t);
    p.known[static_cast<std::size_t>(ft)] = true;
    p.alpha[ft] = alpha;
  }
  return p;
}

void write_trace_csv(const fs::path& path, const std::vector<OuterRecord>& trace) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path.string());
  os << "outer_iter,err_main,energy,inner_iters_u,inner_iters_v\n";
  for (const auto& r : trace) {
    os << r.outer_iter << "," << fmt(r.err_main) << "," << fmt(r.energy) << "," << r.inner_iters_u << ","
       << r.inner_iters_v << "\n";
  }
}

void write_metrics_csv(const fs::path& path, const std::vector<MetricRow>& rows) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path.string());
  auto cell = [](double x) { return std::isnan(x) ? std::string("-") : fmt(x); };
  os << "method,alpha,beta,variance,ssim,psnr,aee,ae\n";
  for (const auto& r : rows) {
    os << r.method << "," << cell(r.alpha) << "," << cell(r.beta) << "," << cell(r.variance) << ","
       << cell(r.ssim) << "," << cell(r.psnr) << "," << cell(r.aee) << "," << cell(r.ae) << "\n";
  }
}

ArtifactBundle run_experiment(const ExperimentConfig& input) {
  input.validate();
  // Every random stream derives from the root seed.
  ExperimentConfig config = input;
  config.joint.norm_seed = norm_seed(config.seed);
  config.baseline.norm_seed = config.joint.norm_seed;
  ArtifactBundle bundle;
  bundle.directory = config.output;
  fs::create_directories(bundle.directory);
  Output out{bundle, {}};
  json summary = {{"kind", to_string(config.kind)}, {"seed", config.seed}, {"config_version", kConfigVersion}};
  {
    std::ofstream os(out.path("config.ini"));
    os << to_ini(config);
  }
  const std::string context = "experiment " + to_string(config.kind) + ": ";
  try {
    switch (config.kind) {
      case ExperimentKind::denoise_joint:
      case ExperimentKind::single_solve:
        run_single(config, bundle, out, summary);
        break;
      case ExperimentKind::comparison_table:
        run_comparison(config, bundle, out, summary);
        break;
      case ExperimentKind::noise_sweep:
        run_noise_sweep(config, bundle, out, summary);
        break;
      case ExperimentKind::temporal_inpaint:
        run_inpaint(config, bundle, out, summary);
        break;
    }
  } catch (const DivergenceError& e) {
    throw DivergenceError(context + e.message(), e.iteration());
  } catch (const ConfigError& e) {
    throw ConfigError(context + e.what());
  } catch (const FormatError& e) {
    throw FormatError(context + e.what());
  } catch (const ContractViolation& e) {
    throw ContractViolation(context + e.what());
  }
  write_json(out.path("summary.json"), summary);
  return bundle;
}

}  // namespace tvflow
