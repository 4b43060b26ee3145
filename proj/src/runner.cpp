#include "mesb/runner.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mesb/config.hpp"
#include "mesb/external_denoiser.hpp"
#include "mesb/imageio.hpp"
#include "mesb/theory.hpp"

namespace mesb {

namespace {

namespace fs = std::filesystem;

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument:
      return 1;
    case ErrorKind::Io:
      return 3;
    default:
      return 2;
  }
}

DenoiserFactory make_denoiser_factory(const DenoiserConfig& cfg, const NoiseSchedule& schedule) {
  if (cfg.kind == "oracle") {
    return [schedule](const Task& task) {
      return make_oracle_denoiser(task.x_true, schedule);
    };
  }
  if (cfg.kind == "external") {
    // one subprocess shared across phantoms; the protocol is stateless per request
    const DenoiserPtr shared = make_external_denoiser(cfg.command, cfg.timeout_ms);
    return [shared](const Task&) { return shared; };
  }
  return [cfg, schedule](const Task& task) {
    return make_gaussian_analytic_denoiser(Tensor::full(task.x_true.shape(), cfg.mu0), cfg.s0sq,
                                           schedule);
  };
}

std::string phantom_prefix(std::size_t index) {
  std::ostringstream name;
  name << "phantom_" << std::setw(3) << std::setfill('0') << index;
  return name.str();
}

void write_run_outputs(const RunConfig& config, const fs::path& dir, std::size_t phantom_index,
                       const Task& task, const Tensor& x0, const TrajectoryRecord& trajectory) {
  const std::string prefix = phantom_prefix(phantom_index);
  if (config.output.images) {
    write_pgm16((dir / (prefix + "_true.pgm")).string(), task.x_true);
    write_f32((dir / (prefix + "_true.f32")).string(), task.x_true);
    write_pgm16((dir / (prefix + "_corrupt.pgm")).string(), task.x_corrupt);
    write_f32((dir / (prefix + "_corrupt.f32")).string(), task.x_corrupt);
    write_pgm16((dir / (prefix + "_recon.pgm")).string(), x0);
    write_f32((dir / (prefix + "_recon.f32")).string(), x0);
  }
  if (config.output.emit_trajectory) {
    std::ofstream out(dir / (prefix + "_trajectory.csv"), std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write trajectory CSV for " + prefix);
    out << "n,t_n,cg_residual,data_residual\n";
    for (const auto& step : trajectory.steps) {
      out << step.n << ',' << format_double(step.t_n) << ',' << format_double(step.cg_residual)
          << ',' << format_double(step.data_residual) << '\n';
    }
  }
}

void write_meta(const RunConfig& config, const fs::path& dir) {
  std::ofstream out(dir / "meta.txt", std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write meta.txt");
  out << "task=" << task_kind_name(config.task.kind) << "\n"
      << "size=" << config.task.size << "\n"
      << "noise_percent=" << format_double(config.task.noise_percent) << "\n"
      << "noise_convention=sigma_noise = (noise_percent/100) * max|A x_true|\n"
      << "phantom_seed=" << config.task.phantom_seed << "\n"
      << "n_phantoms=" << config.n_phantoms << "\n"
      << "sampler=" << sampler_kind_name(config.sampler.config.kind) << "\n"
      << "N=" << config.sampler.config.steps << "\n"
      << "p=" << config.sampler.config.cg_iters << "\n"
      << "k_y=" << format_double(config.sampler.config.k_y) << "\n"
      << "k_E=" << format_double(config.sampler.config.k_E) << "\n"
      << "T=" << config.sampler.t_kind << "\n"
      << "alpha=" << format_double(config.sampler.config.alpha) << "\n"
      << "stochastic=" << (config.sampler.config.stochastic ? "true" : "false") << "\n"
      << "seed=" << config.sampler.config.seed << "\n"
      << "denoiser=" << config.denoiser.kind << "\n"
      << "schedule=symmetric triangular beta, beta_min=0.0001 beta_max=0.15, 1000 base steps\n"
      << "grid=" << (config.sampler.config.dense_near_one ? "quadratic_dense_end" : "quadratic")
      << "\n";
}

Experiment experiment_from(const RunConfig& config) {
  Experiment experiment;
  experiment.task = config.task;
  experiment.samplers = {config.sampler};
  experiment.n_phantoms = config.n_phantoms;
  experiment.seed = config.sampler.config.seed;
  return experiment;
}

}  // namespace

int cmd_run(const std::string& config_path, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig config = parse_run_config_file(config_path);
    const fs::path dir(config.output.directory);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create output directory '" + dir.string() + "'");

    const Experiment experiment = experiment_from(config);
    const DenoiserFactory factory =
        make_denoiser_factory(config.denoiser, experiment.schedule);

    const RunObserver observer = [&](std::size_t, std::size_t phantom_index, const Task& task,
                                     const Tensor& x0, const TrajectoryRecord& trajectory) {
      write_run_outputs(config, dir, phantom_index, task, x0, trajectory);
    };

    const ExperimentResult result =
        run_experiment(experiment, factory, config.output.wall_clock, observer);
    const CellResult& cell = result.cells.front();
    if (!cell.error.empty()) fail(ErrorKind::Internal, cell.error);

    write_metrics_csv((dir / "metrics.csv").string(), cell.rows);
    write_meta(config, dir);
    out << "wrote " << cell.rows.size() << " rows to " << (dir / "metrics.csv").string() << "\n";
    out << "mean psnr_db=" << format_double(cell.mean_psnr)
        << " ssim=" << format_double(cell.mean_ssim)
        << " data_residual=" << format_double(cell.mean_residual) << "\n";
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

int cmd_sweep(const std::string& config_path, const std::string& param,
              std::span<const double> values, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig config = parse_run_config_file(config_path);
    if (param != "k_y" && param != "k_E") {
      fail(ErrorKind::Config, "sweep parameter must be k_y or k_E, got '" + param + "'");
    }
    if (values.empty()) fail(ErrorKind::Config, "sweep needs at least one value");

    const fs::path dir(config.output.directory);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create output directory '" + dir.string() + "'");

    const Experiment experiment = experiment_from(config);
    const DenoiserFactory factory =
        make_denoiser_factory(config.denoiser, experiment.schedule);
    const SweepResult sweep =
        run_sweep(experiment, param, values, factory, config.output.wall_clock);

    write_metrics_csv((dir / "sweep.csv").string(), sweep.rows);
    out << "wrote " << sweep.rows.size() << " rows to " << (dir / "sweep.csv").string() << "\n";
    for (const auto& row : sweep.rows) {
      out << param << "=" << format_double(param == "k_y" ? row.k_y : row.k_E)
          << " psnr_db=" << format_double(row.psnr_db)
          << " ssim=" << format_double(row.ssim_value)
          << " data_residual=" << format_double(row.data_residual) << "\n";
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

std::vector<std::string> available_checks() {
  return {"psi_pde", "psi_hat_pde", "grad_log_psi", "theorem2", "equivalence"};
}

namespace {

int check_pde(std::ostream& out, bool hat) {
  const NoiseSchedule schedule = NoiseSchedule::symmetric_beta(1e-4, 0.15);
  const PdeResidualReport report = hat
                                       ? psi_hat_component_pde_residual(0.3, schedule)
                                       : psi_pde_residual(0.7, schedule);
  out << (hat ? "psi_hat component" : "psi") << " PDE residual (log domain):\n";
  for (std::size_t i = 0; i < report.max_residual.size(); ++i) {
    out << "  level " << i << ": h_x=" << format_double(report.h_x[i])
        << " h_t=" << format_double(report.h_t[i])
        << " max_residual=" << format_double(report.max_residual[i]) << "\n";
  }
  out << "  observed order=" << format_double(report.order) << " (expected 2.0 +/- 0.3)\n";
  return std::fabs(report.order - 2.0) <= 0.3 ? 0 : 2;
}

int check_grad_log_psi(std::ostream& out) {
  const NoiseSchedule schedule = NoiseSchedule::symmetric_beta(1e-4, 0.15);
  const Tensor x_corrupt = Tensor::full({4}, 0.25);
  const double worst = grad_log_psi_check(x_corrupt, 0.5, schedule);
  out << "grad log psi vs finite differences: max relative error=" << format_double(worst)
      << " (tolerance 1e-6)\n";
  return worst <= 1e-6 ? 0 : 2;
}

int check_theorem2(std::ostream& out) {
  SeededRng rng(404);
  int status = 0;
  const double ks[] = {0.1, 1.0, 10.0};

  const auto report = [&](const char* label, const LinearOperator& a, const Tensor& x0,
                          const Tensor& y) {
    for (double k : ks) {
      const Theorem2Result r = theorem2_check(a, k, x0, y);
      out << "  " << label << " k=" << format_double(k) << ": alpha0=" << format_double(r.alpha0)
          << " discrepancy=" << format_double(r.discrepancy) << "\n";
      if (!(r.discrepancy <= 1e-10)) status = 2;
    }
  };

  out << "theorem 2 (single gradient step vs dense minimizer):\n";
  {
    std::vector<std::size_t> kept = {0, 2, 3, 5, 7, 8, 11, 12, 15};
    const auto a = mask({16}, kept);
    report("mask 16->9", *a, gaussian({16}, rng), gaussian({9}, rng));
  }
  {
    const auto a = block_downsample({8, 8}, 2);
    report("block_downsample 8x8/2", *a, gaussian({8, 8}, rng), gaussian({4, 4}, rng));
    const auto scaled_a = scaled_operator(a, 2.0);  // sqrt(alpha0) * A, alpha0 = 4
    report("scaled block_downsample", *scaled_a, gaussian({8, 8}, rng), gaussian({4, 4}, rng));
  }
  {
    const auto a = gaussian_blur({8, 8}, 1.0);
    try {
      theorem2_check(*a, 1.0, gaussian({8, 8}, rng), gaussian({8, 8}, rng));
      out << "  gaussian_blur: unexpectedly accepted\n";
      status = 2;
    } catch (const Error& e) {
      out << "  gaussian_blur: rejected (" << e.what() << ")\n";
    }
  }
  return status;
}

int check_equivalence(std::ostream& out) {
  const EquivalenceReport report = mesb_equivalence_check();
  out << "per-step system equivalence over " << report.instances
      << " random dense instances: max relative discrepancy="
      << format_double(report.max_discrepancy) << " (tolerance 1e-8)\n";
  return report.max_discrepancy <= 1e-8 ? 0 : 2;
}

}  // namespace

int cmd_verify(const std::string& check_name, std::ostream& out, std::ostream& err) {
  try {
    if (check_name == "psi_pde") return check_pde(out, false);
    if (check_name == "psi_hat_pde") return check_pde(out, true);
    if (check_name == "grad_log_psi") return check_grad_log_psi(out);
    if (check_name == "theorem2") return check_theorem2(out);
    if (check_name == "equivalence") return check_equivalence(out);
    std::ostringstream names;
    for (const auto& name : available_checks()) names << " " << name;
    err << "error: unknown check '" << check_name << "'; available:" << names.str() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

int cmd_denoiser_check(const std::string& command, int timeout_ms, std::ostream& out,
                       std::ostream& err) {
  try {
    const DenoiserPtr denoiser = make_external_denoiser(command, timeout_ms);
    SeededRng rng(1);
    const Tensor x_t = gaussian({4, 4}, rng);
    const Tensor x_corrupt = Tensor::zeros({4, 4});
    const Tensor eps = denoiser->predict_eps(x_t, 0.5, Conditioning{x_corrupt});
    out << "ok: denoiser replied with shape " << shape_to_string(eps.shape()) << "\n";
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace mesb
