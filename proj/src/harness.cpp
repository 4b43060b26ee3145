#include "mesb/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace mesb {

std::string task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::DeblurGauss: return "deblur_gauss";
    case TaskKind::SrBlock: return "sr_block";
    case TaskKind::Inpaint: return "inpaint";
    case TaskKind::CtToy: return "ct_toy";
  }
  fail(ErrorKind::Internal, "unknown task kind");
}

TaskKind task_kind_from_name(const std::string& name) {
  if (name == "deblur_gauss") return TaskKind::DeblurGauss;
  if (name == "sr_block") return TaskKind::SrBlock;
  if (name == "inpaint") return TaskKind::Inpaint;
  if (name == "ct_toy") return TaskKind::CtToy;
  fail_invalid("unknown task kind '" + name +
               "' (expected deblur_gauss|sr_block|inpaint|ct_toy)");
}

Tensor make_phantom(const Shape& shape, SeededRng& rng) {
  if (shape.size() != 2) fail_invalid("phantoms are 2-D images");
  const std::size_t rows = shape[0];
  const std::size_t cols = shape[1];
  Tensor img = Tensor::full(shape, 0.1 + 0.15 * rng.uniform());

  const auto rect_count = 2 + static_cast<int>(rng.uniform() * 3.0);
  for (int s = 0; s < rect_count; ++s) {
    const auto r0 = static_cast<std::size_t>(rng.uniform() * 0.7 * rows);
    const auto c0 = static_cast<std::size_t>(rng.uniform() * 0.7 * cols);
    const auto h = 1 + static_cast<std::size_t>(rng.uniform() * 0.4 * rows);
    const auto w = 1 + static_cast<std::size_t>(rng.uniform() * 0.4 * cols);
    const double value = 0.15 + 0.8 * rng.uniform();
    for (std::size_t r = r0; r < std::min(rows, r0 + h); ++r) {
      for (std::size_t c = c0; c < std::min(cols, c0 + w); ++c) img.at(r, c) = value;
    }
  }

  const auto disk_count = 1 + static_cast<int>(rng.uniform() * 2.0);
  for (int s = 0; s < disk_count; ++s) {
    const double cr = rng.uniform() * rows;
    const double cc = rng.uniform() * cols;
    const double radius = (0.08 + 0.18 * rng.uniform()) * static_cast<double>(rows);
    const double value = 0.15 + 0.8 * rng.uniform();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double dr = static_cast<double>(r) - cr;
        const double dc = static_cast<double>(c) - cc;
        if (dr * dr + dc * dc <= radius * radius) img.at(r, c) = value;
      }
    }
  }

  const auto blob_count = 2 + static_cast<int>(rng.uniform() * 2.0);
  for (int s = 0; s < blob_count; ++s) {
    const double cr = rng.uniform() * rows;
    const double cc = rng.uniform() * cols;
    const double width = (0.06 + 0.15 * rng.uniform()) * static_cast<double>(rows);
    const double amp = -0.25 + 0.5 * rng.uniform();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double dr = static_cast<double>(r) - cr;
        const double dc = static_cast<double>(c) - cc;
        img.at(r, c) += amp * std::exp(-(dr * dr + dc * dc) / (2.0 * width * width));
      }
    }
  }

  for (std::size_t i = 0; i < img.size(); ++i) img[i] = std::clamp(img[i], 0.0, 1.0);
  return img;
}

namespace {

OperatorPtr operator_for(const TaskSpec& spec, SeededRng& rng) {
  const Shape image{spec.size, spec.size};
  switch (spec.kind) {
    case TaskKind::DeblurGauss:
      return gaussian_blur(image, spec.blur_sigma);
    case TaskKind::SrBlock:
      return block_downsample(image, spec.sr_factor);
    case TaskKind::Inpaint: {
      if (!(spec.keep_fraction > 0.0 && spec.keep_fraction <= 1.0)) {
        fail_invalid("inpaint keep_fraction must lie in (0,1]");
      }
      const std::size_t total = spec.size * spec.size;
      const auto kept_count =
          std::max<std::size_t>(1, static_cast<std::size_t>(spec.keep_fraction * total));
      // seeded partial Fisher-Yates, then sorted for a canonical index set
      std::vector<std::size_t> pool(total);
      for (std::size_t i = 0; i < total; ++i) pool[i] = i;
      for (std::size_t i = 0; i < kept_count; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(rng.uniform() * static_cast<double>(total - i));
        std::swap(pool[i], pool[std::min(j, total - 1)]);
      }
      std::vector<std::size_t> kept(pool.begin(), pool.begin() + kept_count);
      std::sort(kept.begin(), kept.end());
      return mask(image, std::move(kept));
    }
    case TaskKind::CtToy:
      return toy_radon(spec.size, spec.ct_views, spec.ct_detectors);
  }
  fail(ErrorKind::Internal, "unknown task kind");
}

}  // namespace

Task make_task(const TaskSpec& spec, SeededRng& rng) {
  if (spec.size < 8) fail_invalid("task size must be >= 8");
  Task task;
  task.x_true = make_phantom({spec.size, spec.size}, rng);
  task.A = operator_for(spec, rng);

  const Tensor y_clean = task.A->apply(task.x_true);
  if (spec.noise_percent > 0.0) {
    double peak = 0.0;
    for (std::size_t i = 0; i < y_clean.size(); ++i) peak = std::max(peak, std::fabs(y_clean[i]));
    const double sigma_noise = spec.noise_percent / 100.0 * peak;
    task.y = axpby(1.0, y_clean, sigma_noise, gaussian(y_clean.shape(), rng));
  } else {
    task.y = y_clean;
  }

  switch (spec.kind) {
    case TaskKind::DeblurGauss:
      task.x_corrupt = task.y;  // same shape already
      break;
    case TaskKind::SrBlock: {
      const auto up = nearest_upsample(task.y.shape(), spec.sr_factor);
      task.x_corrupt = up->apply(task.y);
      break;
    }
    case TaskKind::Inpaint:
      task.x_corrupt = task.A->adjoint(task.y);
      break;
    case TaskKind::CtToy: {
      // FBP stand-in: 10 CG iterations on the least-squares normal equations.
      SpdSystem system;
      system.rhs = task.A->adjoint(task.y);
      const LinearOperator* a = task.A.get();
      system.op = [a](const Tensor& x) { return a->adjoint(a->apply(x)); };
      task.x_corrupt = cg_solve(system, Tensor::zeros(task.x_true.shape()), 10, 1e-12).x;
      break;
    }
  }
  return task;
}

double psnr(const Tensor& x, const Tensor& ref, double data_range) {
  if (!x.same_shape(ref)) fail_invalid("psnr requires matching shapes");
  if (!(data_range > 0.0)) fail_invalid("psnr requires data_range > 0");
  double mse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - ref[i];
    mse += d * d;
  }
  mse /= static_cast<double>(x.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / mse);
}

double ssim(const Tensor& x, const Tensor& ref, double data_range) {
  if (!x.same_shape(ref)) fail_invalid("ssim requires matching shapes");
  if (!(data_range > 0.0)) fail_invalid("ssim requires data_range > 0");
  if (x.shape().size() != 2) fail_invalid("ssim requires 2-D images");

  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  std::size_t win = 11;
  const std::size_t limit = std::min(rows, cols);
  if (win > limit) win = limit % 2 == 1 ? limit : limit - 1;
  if (win < 3) fail_invalid("ssim requires images of at least 3x3");

  // Gaussian window, sigma 1.5, normalized.
  std::vector<double> w1(win);
  const double half = 0.5 * static_cast<double>(win - 1);
  double wsum = 0.0;
  for (std::size_t i = 0; i < win; ++i) {
    const double d = static_cast<double>(i) - half;
    w1[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    wsum += w1[i];
  }
  for (double& v : w1) v /= wsum;

  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r0 = 0; r0 + win <= rows; ++r0) {
    for (std::size_t c0 = 0; c0 + win <= cols; ++c0) {
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (std::size_t i = 0; i < win; ++i) {
        for (std::size_t j = 0; j < win; ++j) {
          const double w = w1[i] * w1[j];
          const double a = x.at(r0 + i, c0 + j);
          const double b = ref.at(r0 + i, c0 + j);
          mx += w * a;
          my += w * b;
          xx += w * a * a;
          yy += w * b * b;
          xy += w * a * b;
        }
      }
      const double vx = xx - mx * mx;
      const double vy = yy - my * my;
      const double cxy = xy - mx * my;
      total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

std::vector<MetricRow> ExperimentResult::all_rows() const {
  std::vector<MetricRow> rows;
  for (const auto& cell : cells) rows.insert(rows.end(), cell.rows.begin(), cell.rows.end());
  return rows;
}

namespace {

SamplerConfig realized_config(const SamplerSetup& setup, const Shape& image_shape) {
  SamplerConfig config = setup.config;
  if (setup.t_kind == "laplacian") {
    config.t_gram = laplacian_gram(image_shape);
  } else if (setup.t_kind != "none") {
    fail_invalid("unknown T kind '" + setup.t_kind + "' (expected none|laplacian)");
  }
  return config;
}

}  // namespace

ExperimentResult run_experiment(const Experiment& experiment, const DenoiserFactory& factory,
                                bool wall_clock, const RunObserver& observer) {
  if (experiment.samplers.empty()) fail_invalid("experiment needs at least one sampler");
  if (experiment.n_phantoms < 1) fail_invalid("experiment needs at least one phantom");

  ExperimentResult result;
  result.cells.reserve(experiment.samplers.size());

  for (std::size_t ci = 0; ci < experiment.samplers.size(); ++ci) {
    CellResult cell;
    cell.setup = experiment.samplers[ci];
    double sum_psnr = 0, sum_ssim = 0, sum_residual = 0;
    try {
      for (std::size_t pi = 0; pi < experiment.n_phantoms; ++pi) {
        SeededRng task_rng(mix_seed(experiment.task.phantom_seed, pi));
        const Task task = make_task(experiment.task, task_rng);
        const DenoiserPtr denoiser = factory(task);

        SamplerConfig config = realized_config(cell.setup, task.x_true.shape());
        config.seed = mix_seed(experiment.seed, pi);
        const TimeGrid grid = TimeGrid::quadratic(config.steps, config.dense_near_one);

        const auto start = std::chrono::steady_clock::now();
        auto [x0, trajectory] = reverse_run(
            *denoiser, TaskInputs{task.x_corrupt, task.y, task.A}, config, experiment.schedule,
            grid);
        const auto stop = std::chrono::steady_clock::now();

        MetricRow row;
        row.task = task_kind_name(experiment.task.kind);
        row.sampler = sampler_kind_name(config.kind);
        row.steps = config.steps;
        row.cg_iters = config.cg_iters;
        row.k_y = config.k_y;
        row.k_E = config.k_E;
        row.t_kind = cell.setup.t_kind;
        row.phantom_index = static_cast<long long>(pi);
        row.seed = config.seed;
        row.psnr_db = psnr(x0, task.x_true, 1.0);
        row.ssim_value = ssim(x0, task.x_true, 1.0);
        const double y_norm = norm2(task.y);
        row.data_residual =
            norm2(axpby(1.0, task.A->apply(x0), -1.0, task.y)) / (y_norm > 0.0 ? y_norm : 1.0);
        row.wall_ms =
            wall_clock
                ? std::chrono::duration_cast<std::chrono::milliseconds>(stop - start).count()
                : 0;
        sum_psnr += row.psnr_db;
        sum_ssim += row.ssim_value;
        sum_residual += row.data_residual;
        cell.rows.push_back(std::move(row));
        if (observer) observer(ci, pi, task, x0, trajectory);
      }
      const double n = static_cast<double>(experiment.n_phantoms);
      cell.mean_psnr = sum_psnr / n;
      cell.mean_ssim = sum_ssim / n;
      cell.mean_residual = sum_residual / n;
    } catch (const Error& e) {
      cell.error = e.what();
      cell.rows.clear();
    }
    result.cells.push_back(std::move(cell));
  }
  return result;
}

SweepResult run_sweep(const Experiment& experiment, const std::string& param,
                      std::span<const double> values, const DenoiserFactory& factory,
                      bool wall_clock) {
  if (experiment.samplers.size() != 1) {
    fail_invalid("sweep requires an experiment with exactly one sampler");
  }
  if (values.empty()) fail_invalid("sweep requires at least one value");
  const bool is_ky = param == "k_y";
  if (!is_ky && param != "k_E") fail_invalid("sweep parameter must be k_y or k_E");
  for (double v : values) {
    if (!(v >= 0.0)) fail_invalid("sweep values must be nonnegative");
  }

  SweepResult result;
  for (double value : values) {
    Experiment exp_value = experiment;
    if (is_ky) {
      exp_value.samplers[0].config.k_y = value;
    } else {
      exp_value.samplers[0].config.k_E = value;
    }
    ExperimentResult run = run_experiment(exp_value, factory, wall_clock);
    const CellResult& cell = run.cells.front();
    if (!cell.error.empty()) {
      fail(ErrorKind::Internal, "sweep cell failed at " + param + "=" + std::to_string(value) +
                                    ": " + cell.error);
    }
    MetricRow row = cell.rows.front();
    row.phantom_index = -1;  // aggregate over phantoms
    row.seed = experiment.seed;
    row.psnr_db = cell.mean_psnr;
    row.ssim_value = cell.mean_ssim;
    row.data_residual = cell.mean_residual;
    row.wall_ms = 0;
    if (wall_clock) {
      long long total = 0;
      for (const auto& r : cell.rows) total += r.wall_ms;
      row.wall_ms = total;
    }
    result.rows.push_back(std::move(row));
    result.details.push_back(std::move(run));
  }
  return result;
}

}  // namespace mesb
