#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mesb/samplers.hpp"

namespace mesb {

enum class TaskKind { DeblurGauss, SrBlock, Inpaint, CtToy };

std::string task_kind_name(TaskKind kind);
TaskKind task_kind_from_name(const std::string& name);

/// Inverse-problem task recipe. Operator parameters beyond the active
/// task's are ignored. noise_percent is peak-referenced:
/// sigma_noise = (noise_percent/100) * max|A x_true|.
struct TaskSpec {
  TaskKind kind = TaskKind::DeblurGauss;
  std::size_t size = 32;
  double noise_percent = 0.0;
  std::uint64_t phantom_seed = 1;
  double blur_sigma = 1.5;        // DeblurGauss
  std::size_t sr_factor = 4;      // SrBlock
  double keep_fraction = 0.5;     // Inpaint
  std::size_t ct_views = 12;      // CtToy
  std::size_t ct_detectors = 0;   // CtToy; 0 picks size
};

struct Task {
  Tensor x_true;
  Tensor y;
  Tensor x_corrupt;
  OperatorPtr A;
};

/// Seeded synthetic phantom: piecewise-constant rectangles and disks plus
/// smooth blobs, clamped to [0,1].
Tensor make_phantom(const Shape& shape, SeededRng& rng);

/// Builds (x_true, y, x_corrupt, A) for the spec. Draw order from rng is
/// fixed (phantom, then mask indices where applicable, then measurement
/// noise), so a given rng seed pins the whole task. x_corrupt per task:
/// deblur -> y as an image; sr -> nearest-neighbor upsampling of y;
/// inpaint -> adjoint embedding (zeros at missing pixels); ct -> 10-step CG
/// least-squares reconstruction from zero.
Task make_task(const TaskSpec& spec, SeededRng& rng);

/// Peak signal-to-noise ratio in dB; +infinity when x == ref.
double psnr(const Tensor& x, const Tensor& ref, double data_range);

/// Structural similarity, Gaussian 11x11 window (sigma 1.5), K1=0.01,
/// K2=0.03, averaged over window positions fully inside the image. The
/// window shrinks to the largest odd size that fits small images.
double ssim(const Tensor& x, const Tensor& ref, double data_range);

/// Sampler under test plus the task-shape-dependent pieces the harness
/// instantiates per run (the T operator).
struct SamplerSetup {
  SamplerConfig config;
  std::string t_kind = "none";  // "none" | "laplacian"
};

struct Experiment {
  TaskSpec task;
  std::vector<SamplerSetup> samplers;
  std::size_t n_phantoms = 1;
  std::uint64_t seed = 0;
  NoiseSchedule schedule = NoiseSchedule::symmetric_beta(1e-4, 0.15);
};

struct MetricRow {
  std::string task;
  std::string sampler;
  std::size_t steps = 0;
  std::size_t cg_iters = 0;
  double k_y = 0.0;
  double k_E = 0.0;
  std::string t_kind = "none";
  long long phantom_index = 0;  // -1 marks a row aggregated over phantoms
  std::uint64_t seed = 0;
  double psnr_db = 0.0;
  double ssim_value = 0.0;
  double data_residual = 0.0;
  long long wall_ms = 0;
};

struct CellResult {
  SamplerSetup setup;
  std::vector<MetricRow> rows;      // one per phantom
  std::string error;                // non-empty when the cell failed
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double mean_residual = 0.0;
};

struct ExperimentResult {
  std::vector<CellResult> cells;
  std::vector<MetricRow> all_rows() const;
};

using DenoiserFactory = std::function<DenoiserPtr(const Task&)>;

/// Observer invoked once per completed run, for callers that persist images
/// or trajectories.
using RunObserver = std::function<void(std::size_t cell_index, std::size_t phantom_index,
                                       const Task& task, const Tensor& x0,
                                       const TrajectoryRecord& trajectory)>;

/// Runs every (sampler, phantom) cell. Phantom i uses task seed
/// mix_seed(task.phantom_seed, i) and sampler seed mix_seed(experiment.seed,
/// i), independent of the sampler, so configurations that are algebraically
/// identical produce bit-identical rows. Per-cell failures are recorded,
/// not fatal.
ExperimentResult run_experiment(const Experiment& experiment, const DenoiserFactory& factory,
                                bool wall_clock = false, const RunObserver& observer = {});

/// One aggregated row per value of `param` ("k_y" or "k_E"), all else
/// fixed; the experiment must hold exactly one sampler setup. Aggregated
/// rows carry phantom_index = -1.
struct SweepResult {
  std::vector<MetricRow> rows;            // aggregated, one per value
  std::vector<ExperimentResult> details;  // per value
};
SweepResult run_sweep(const Experiment& experiment, const std::string& param,
                      std::span<const double> values, const DenoiserFactory& factory,
                      bool wall_clock = false);

}  // namespace mesb
