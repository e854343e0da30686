#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tvflow/data_gen.hpp"
#include "tvflow/joint.hpp"

namespace tvflow {

namespace fs = std::filesystem;

/// Format version written to and required from config files.
inline constexpr int kConfigVersion = 1;

enum class ExperimentKind { denoise_joint, single_solve, noise_sweep, comparison_table, temporal_inpaint };

/// How the joint solver is started.
enum class JointInit {
  zero,           // u = v = 0
  static_flow,    // v from TV-L1 flow on the data
  denoised_flow,  // v from TV-L1 flow on the framewise ROF reconstruction
  multistart,     // both of the above; keeps the run with lower joint energy
};

std::string to_string(ExperimentKind kind);
std::string to_string(JointInit init);

/// Synthetic scene or a directory of frames, with optional ground truth.
struct DatasetSpec {
  bool synthetic = true;
  SyntheticScene scene;
  fs::path frames;      // noisy/degraded input frames
  fs::path clean;       // optional clean frames for image metrics
  fs::path flow;        // optional .flo ground truth for flow metrics
  fs::path base_image;  // warped_from_flow: base frame
  fs::path base_flow;   // warped_from_flow: single .flo file
};

struct ForwardOperatorSpec {
  std::string kind = "identity";  // identity | box_blur | gaussian_blur | subsample
  Index radius = 1;
  double sigma = 1.0;
  Index factor = 2;

  ForwardOperator build() const;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::denoise_joint;
  std::uint64_t seed = 1;
  fs::path output = "out";
  DatasetSpec data;
  JointConfig joint;
  ForwardOperatorSpec op;
  JointInit init = JointInit::multistart;
  BaselineParams baseline;
  /// Allow alpha/beta outside the evaluated ranges [0.01, 0.05] / [0.05, 0.1].
  bool allow_out_of_range = false;

  // Weight grids. Empty grids fall back to the single model weights.
  std::vector<double> sweep_alpha;
  std::vector<double> sweep_beta;
  /// Weights of the static flow baseline in the noise sweep; empty means
  /// beta / gamma.
  std::vector<double> sweep_lambda;
  /// Noise variances of the noise sweep.
  std::vector<double> variances{0.0, 0.01, 0.02, 0.03};
  /// Unknown frames inserted between consecutive known frames.
  int inserted_frames = 2;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Parses the INI-style config. Relative paths are resolved against the
/// directory of the file.
ExperimentConfig load_config(const fs::path& path);
ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir = {});
/// Canonical text form; parse_config(to_ini(c)) reproduces c.
std::string to_ini(const ExperimentConfig& config);

/// Per-cell metrics. Missing ground truth leaves the entries NaN.
struct MetricRow {
  std::string method;
  double alpha = 0.0;
  double beta = 0.0;
  double variance = 0.0;
  double ssim = 0.0;
  double psnr = 0.0;
  double aee = 0.0;
  double ae = 0.0;
};

struct ArtifactBundle {
  fs::path directory;
  std::vector<fs::path> files;
  /// Every evaluated cell.
  std::vector<MetricRow> cells;
  /// Selected rows (best weights per method, or the single run).
  std::vector<MetricRow> table;
  std::optional<JointResult> joint;
};

/// Worker count from TVFLOW_WORKERS, default 1.
int worker_count();

/// Loads or synthesizes the data, runs the experiment and writes its outputs
/// together with a config snapshot.
ArtifactBundle run_experiment(const ExperimentConfig& config);

/// Joint solve with the configured initialization. `domain` is the grid of u
/// (it differs from the data grid for subsampling). `chosen` receives the
/// start that produced the result.
JointResult run_joint(const ImageSequence& f, const Grid& domain, const JointConfig& joint,
                      JointInit init, const BaselineParams& baseline, JointInit* chosen = nullptr);

/// Data of a temporal inpainting run: known frames with `inserted` black
/// frames between each pair, the matching frame mask and per-frame alpha.
struct InpaintingProblem {
  ImageSequence f;
  std::vector<bool> known;
  Buffer<double> alpha;
};
InpaintingProblem make_inpainting_problem(const ImageSequence& known_frames, int inserted, double alpha);

void write_trace_csv(const fs::path& path, const std::vector<OuterRecord>& trace);
void write_metrics_csv(const fs::path& path, const std::vector<MetricRow>& rows);

}  // namespace tvflow
