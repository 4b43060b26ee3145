#include "doctest.h"

#include <cmath>

#include "mesb/harness.hpp"
#include "support.hpp"

using namespace mesb;
using testsupport::max_abs_diff;

TEST_SUITE_BEGIN("harness");

namespace {

// Scalar-loop reference metrics, independent of the shipped implementation.
double psnr_reference(const Tensor& x, const Tensor& ref, double range) {
  double mse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mse += (x[i] - ref[i]) * (x[i] - ref[i]);
  mse /= static_cast<double>(x.size());
  return 10.0 * std::log10(range * range / mse);
}

double ssim_reference(const Tensor& x, const Tensor& ref, double range) {
  const std::size_t rows = x.rows(), cols = x.cols();
  std::size_t win = 11;
  if (win > std::min(rows, cols)) {
    win = std::min(rows, cols);
    if (win % 2 == 0) --win;
  }
  std::vector<double> w(win);
  double s = 0;
  for (std::size_t i = 0; i < win; ++i) {
    const double d = double(i) - 0.5 * double(win - 1);
    w[i] = std::exp(-d * d / 4.5);
    s += w[i];
  }
  for (auto& v : w) v /= s;
  const double c1 = 0.0001 * range * range, c2 = 0.0009 * range * range;
  double total = 0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + win <= rows; ++r) {
    for (std::size_t c = 0; c + win <= cols; ++c) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (std::size_t i = 0; i < win; ++i) {
        for (std::size_t j = 0; j < win; ++j) {
          const double wij = w[i] * w[j];
          mx += wij * x.at(r + i, c + j);
          my += wij * ref.at(r + i, c + j);
        }
      }
      for (std::size_t i = 0; i < win; ++i) {
        for (std::size_t j = 0; j < win; ++j) {
          const double wij = w[i] * w[j];
          const double dx = x.at(r + i, c + j) - mx;
          const double dy = ref.at(r + i, c + j) - my;
          sxx += wij * dx * dx;
          syy += wij * dy * dy;
          sxy += wij * dx * dy;
        }
      }
      total += ((2 * mx * my + c1) * (2 * sxy + c2)) /
               ((mx * mx + my * my + c1) * (sxx + syy + c2));
      ++count;
    }
  }
  return total / double(count);
}

DenoiserFactory analytic_factory(const NoiseSchedule& schedule) {
  return [schedule](const Task& task) {
    return make_gaussian_analytic_denoiser(Tensor::full(task.x_true.shape(), 0.5), 1.0,
                                           schedule);
  };
}

}  // namespace

TEST_CASE("make_task: noiseless measurements are exact and deblur reuses y as x_corrupt") {
  TaskSpec spec;
  spec.kind = TaskKind::DeblurGauss;
  spec.size = 16;
  spec.noise_percent = 0.0;
  SeededRng rng(1);
  const Task task = make_task(spec, rng);
  CHECK(max_abs_diff(task.y, task.A->apply(task.x_true)) == 0.0);
  CHECK(max_abs_diff(task.x_corrupt, task.y) == 0.0);
  for (std::size_t i = 0; i < task.x_true.size(); ++i) {
    CHECK(task.x_true[i] >= 0.0);
    CHECK(task.x_true[i] <= 1.0);
  }
}

TEST_CASE("make_task is reproducible from its seed") {
  TaskSpec spec;
  spec.kind = TaskKind::SrBlock;
  spec.size = 16;
  spec.sr_factor = 2;
  spec.noise_percent = 1.0;
  SeededRng a(9), b(9);
  const Task t1 = make_task(spec, a);
  const Task t2 = make_task(spec, b);
  CHECK(max_abs_diff(t1.x_true, t2.x_true) == 0.0);
  CHECK(max_abs_diff(t1.y, t2.y) == 0.0);
  CHECK(max_abs_diff(t1.x_corrupt, t2.x_corrupt) == 0.0);
}

TEST_CASE("make_task shapes per task kind") {
  SUBCASE("sr_block upsamples y back to the image grid") {
    TaskSpec spec;
    spec.kind = TaskKind::SrBlock;
    spec.size = 16;
    spec.sr_factor = 4;
    SeededRng rng(2);
    const Task task = make_task(spec, rng);
    CHECK(task.y.shape() == Shape{4, 4});
    CHECK(task.x_corrupt.shape() == Shape{16, 16});
    // nearest upsampling: every pixel equals its block measurement
    for (std::size_t r = 0; r < 16; ++r) {
      for (std::size_t c = 0; c < 16; ++c) {
        CHECK(task.x_corrupt.at(r, c) == task.y.at(r / 4, c / 4));
      }
    }
  }
  SUBCASE("inpaint embeds measurements with zeros elsewhere") {
    TaskSpec spec;
    spec.kind = TaskKind::Inpaint;
    spec.size = 12;
    spec.keep_fraction = 0.4;
    SeededRng rng(3);
    const Task task = make_task(spec, rng);
    CHECK(task.x_corrupt.shape() == Shape{12, 12});
    // adjoint embedding: A x_corrupt == y
    CHECK(max_abs_diff(task.A->apply(task.x_corrupt), task.y) == 0.0);
  }
  SUBCASE("ct_toy reconstructs via least squares") {
    TaskSpec spec;
    spec.kind = TaskKind::CtToy;
    spec.size = 16;
    spec.ct_views = 8;
    spec.noise_percent = 0.1;
    SeededRng rng(4);
    const Task task = make_task(spec, rng);
    CHECK(task.x_corrupt.shape() == Shape{16, 16});
    // the CG reconstruction should beat the zero image on data fit
    const double res = norm2(axpby(1.0, task.A->apply(task.x_corrupt), -1.0, task.y));
    CHECK(res < 0.5 * norm2(task.y));
  }
}

TEST_CASE("psnr: identical images hit the infinity sentinel, constant shift is exact") {
  SeededRng rng(5);
  const Tensor x = gaussian({8, 8}, rng);
  CHECK(std::isinf(psnr(x, x, 1.0)));

  const Tensor shifted = axpby(1.0, x, 0.1, Tensor::full({8, 8}, 1.0));
  CHECK(psnr(shifted, x, 1.0) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("ssim: self-similarity is 1, independent noise scores near 0") {
  SeededRng rng(6);
  const Tensor x = gaussian({64, 64}, rng);
  CHECK(ssim(x, x, 1.0) == doctest::Approx(1.0).epsilon(1e-12));

  for (int seed = 0; seed < 10; ++seed) {
    SeededRng ra(mix_seed(100, seed)), rb(mix_seed(200, seed));
    const Tensor a = gaussian({64, 64}, ra);
    const Tensor b = gaussian({64, 64}, rb);
    CHECK(std::fabs(ssim(a, b, 1.0)) <= 0.1);
  }
}

TEST_CASE("psnr and ssim agree with the scalar-loop reference on 8x8 fixtures") {
  SeededRng rng(7);
  for (int i = 0; i < 4; ++i) {
    const Tensor x = gaussian({8, 8}, rng);
    const Tensor noise = gaussian({8, 8}, rng);
    const Tensor y = axpby(1.0, x, 0.25, noise);
    CHECK(psnr(y, x, 1.0) == doctest::Approx(psnr_reference(y, x, 1.0)).epsilon(1e-10));
    CHECK(ssim(y, x, 1.0) == doctest::Approx(ssim_reference(y, x, 1.0)).epsilon(1e-10));
  }
}

TEST_CASE("metric shape and range errors") {
  const Tensor x = Tensor::zeros({8, 8});
  CHECK_THROWS_AS(psnr(x, Tensor::zeros({4, 4}), 1.0), Error);
  CHECK_THROWS_AS(ssim(x, x, 0.0), Error);
}

TEST_CASE("run_experiment: i2sb and degenerate mesb produce identical rows") {
  Experiment experiment;
  experiment.task.kind = TaskKind::DeblurGauss;
  experiment.task.size = 12;
  experiment.task.blur_sigma = 1.0;
  experiment.n_phantoms = 1;
  experiment.seed = 5;

  SamplerSetup i2sb;
  i2sb.config.kind = SamplerKind::I2sb;
  i2sb.config.steps = 5;
  SamplerSetup mesb0;
  mesb0.config.kind = SamplerKind::Mesb;
  mesb0.config.steps = 5;
  mesb0.config.k_y = 0.0;
  mesb0.config.k_E = 0.0;
  experiment.samplers = {i2sb, mesb0};

  const ExperimentResult result =
      run_experiment(experiment, analytic_factory(experiment.schedule));
  REQUIRE(result.cells.size() == 2);
  REQUIRE(result.cells[0].rows.size() == 1);
  REQUIRE(result.cells[1].rows.size() == 1);
  CHECK(result.cells[0].rows[0].psnr_db == result.cells[1].rows[0].psnr_db);
  CHECK(result.cells[0].rows[0].ssim_value == result.cells[1].rows[0].ssim_value);
  CHECK(result.cells[0].rows[0].data_residual == result.cells[1].rows[0].data_residual);
  CHECK(result.cells[0].rows[0].seed == result.cells[1].rows[0].seed);
}

TEST_CASE("run_experiment: the oracle denoiser in deterministic mode maxes out PSNR") {
  Experiment experiment;
  experiment.task.kind = TaskKind::DeblurGauss;
  experiment.task.size = 12;
  experiment.n_phantoms = 2;

  SamplerSetup setup;
  setup.config.kind = SamplerKind::Project;
  setup.config.steps = 5;
  setup.config.stochastic = false;
  experiment.samplers = {setup};

  const NoiseSchedule sched = experiment.schedule;
  const DenoiserFactory oracle_factory = [sched](const Task& task) {
    return make_oracle_denoiser(task.x_true, sched);
  };
  const ExperimentResult result = run_experiment(experiment, oracle_factory);
  REQUIRE(result.cells.front().error.empty());
  for (const auto& row : result.cells.front().rows) {
    CHECK(std::isinf(row.psnr_db));
    CHECK(row.ssim_value == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("run_experiment records capability failures per cell without aborting the table") {
  Experiment experiment;
  experiment.task.kind = TaskKind::DeblurGauss;
  experiment.task.size = 12;
  experiment.n_phantoms = 1;

  SamplerSetup deep;  // analytic denoiser has a vjp; zero denoiser cell fails below
  deep.config.kind = SamplerKind::CddbDeep;
  deep.config.steps = 3;
  SamplerSetup good;
  good.config.kind = SamplerKind::I2sb;
  good.config.steps = 3;
  experiment.samplers = {deep, good};

  struct NoVjp final : Denoiser {
    Tensor predict_eps(const Tensor& x_t, double, const Conditioning&) const override {
      return Tensor::zeros(x_t.shape());
    }
  };
  const DenoiserFactory factory = [](const Task&) { return std::make_shared<NoVjp>(); };
  const ExperimentResult result = run_experiment(experiment, factory);
  CHECK_FALSE(result.cells[0].error.empty());
  CHECK(result.cells[0].rows.empty());
  CHECK(result.cells[1].error.empty());
  CHECK(result.cells[1].rows.size() == 1);
}

TEST_CASE("run_experiment rows are bit-reproducible") {
  Experiment experiment;
  experiment.task.kind = TaskKind::SrBlock;
  experiment.task.size = 16;
  experiment.task.sr_factor = 2;
  experiment.task.noise_percent = 1.0;
  experiment.n_phantoms = 2;
  experiment.seed = 123;

  SamplerSetup setup;
  setup.config.kind = SamplerKind::Mesb;
  setup.config.steps = 4;
  setup.config.k_y = 16.0;
  experiment.samplers = {setup};

  const auto r1 = run_experiment(experiment, analytic_factory(experiment.schedule));
  const auto r2 = run_experiment(experiment, analytic_factory(experiment.schedule));
  for (std::size_t i = 0; i < r1.cells.front().rows.size(); ++i) {
    CHECK(r1.cells.front().rows[i].psnr_db == r2.cells.front().rows[i].psnr_db);
    CHECK(r1.cells.front().rows[i].ssim_value == r2.cells.front().rows[i].ssim_value);
    CHECK(r1.cells.front().rows[i].data_residual == r2.cells.front().rows[i].data_residual);
  }
}

TEST_CASE("run_sweep: one aggregated row per value, k_E=0 equals the plain run") {
  Experiment experiment;
  experiment.task.kind = TaskKind::DeblurGauss;
  experiment.task.size = 12;
  experiment.n_phantoms = 2;
  experiment.seed = 9;

  SamplerSetup setup;
  setup.config.kind = SamplerKind::Mesb;
  setup.config.steps = 4;
  setup.config.k_y = 8.0;
  setup.config.k_E = 0.0;
  experiment.samplers = {setup};

  const double values[] = {0.0, 10.0, 20.0};
  const SweepResult sweep =
      run_sweep(experiment, "k_E", values, analytic_factory(experiment.schedule));
  REQUIRE(sweep.rows.size() == 3);
  for (const auto& row : sweep.rows) CHECK(row.phantom_index == -1);

  // the k_E = 0 sweep row equals the plain experiment's aggregate
  const ExperimentResult plain =
      run_experiment(experiment, analytic_factory(experiment.schedule));
  CHECK(sweep.rows[0].psnr_db == plain.cells.front().mean_psnr);
  CHECK(sweep.rows[0].data_residual == plain.cells.front().mean_residual);

  SUBCASE("single-value sweep reproduces run_experiment") {
    const double one[] = {0.0};
    const SweepResult single =
        run_sweep(experiment, "k_E", one, analytic_factory(experiment.schedule));
    REQUIRE(single.rows.size() == 1);
    CHECK(single.rows[0].psnr_db == plain.cells.front().mean_psnr);
  }
}

TEST_CASE("run_sweep validates its parameter name and values") {
  Experiment experiment;
  experiment.task.size = 12;
  SamplerSetup setup;
  setup.config.kind = SamplerKind::Mesb;
  setup.config.steps = 2;
  experiment.samplers = {setup};
  const double values[] = {1.0};
  const double bad_values[] = {-1.0};
  CHECK_THROWS_AS(
      run_sweep(experiment, "alpha", values, analytic_factory(experiment.schedule)), Error);
  CHECK_THROWS_AS(
      run_sweep(experiment, "k_y", bad_values, analytic_factory(experiment.schedule)), Error);
}

TEST_SUITE_END();
