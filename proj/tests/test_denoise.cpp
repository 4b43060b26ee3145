#include "doctest.h"

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "mesb/denoise.hpp"
#include "support.hpp"

using namespace mesb;

TEST_SUITE_BEGIN("denoise");

namespace {

struct ZeroDenoiser final : Denoiser {
  Tensor predict_eps(const Tensor& x_t, double, const Conditioning&) const override {
    return Tensor::zeros(x_t.shape());
  }
};

const NoiseSchedule& schedule() {
  static const NoiseSchedule s = NoiseSchedule::symmetric_beta(1e-4, 0.15);
  return s;
}

}  // namespace

TEST_CASE("x0_hat with a zero prediction returns x_t") {
  SeededRng rng(1);
  const Tensor x_t = gaussian({5}, rng);
  const Tensor out = x0_hat(ZeroDenoiser{}, x_t, 0.5, Conditioning{Tensor::zeros({5})}, schedule());
  CHECK(testsupport::max_abs_diff(out, x_t) == 0.0);
}

TEST_CASE("x0_hat rejects t = 0") {
  const Tensor x = Tensor::zeros({3});
  CHECK_THROWS_AS(x0_hat(ZeroDenoiser{}, x, 0.0, Conditioning{x}, schedule()), Error);
}

TEST_CASE("oracle denoiser reconstructs x0_true at any state and time") {
  SeededRng rng(2);
  const Tensor x0_true = gaussian({6}, rng);
  const auto oracle = make_oracle_denoiser(x0_true, schedule());
  for (double t : {0.03, 0.4, 1.0}) {
    const Tensor x_t = gaussian({6}, rng);
    const Tensor out = x0_hat(*oracle, x_t, t, Conditioning{x_t}, schedule());
    CHECK(testsupport::max_abs_diff(out, x0_true) <= 1e-12);
  }

  SUBCASE("vjp is the zero map") {
    const Tensor v = gaussian({6}, rng);
    CHECK(oracle->has_vjp());
    CHECK(norm2(oracle->vjp(gaussian({6}, rng), 0.5, Conditioning{x0_true}, v)) == 0.0);
  }
}

TEST_CASE("analytic denoiser: flat-prior limit inverts the forward mean") {
  SeededRng rng(3);
  const Shape shape{4};
  const Tensor x_t = gaussian(shape, rng);
  const Tensor x1 = gaussian(shape, rng);
  const double t = 0.6;

  const auto flat = make_gaussian_analytic_denoiser(Tensor::zeros(shape), 1e12, schedule());
  const Tensor got = x0_hat(*flat, x_t, t, Conditioning{x1}, schedule());

  const double s2 = schedule().sigma2(t);
  const double sb2 = schedule().sigma_bar2(t);
  const double a = sb2 / (s2 + sb2);
  const double b = s2 / (s2 + sb2);
  const Tensor expected = scaled(1.0 / a, axpby(1.0, x_t, -b, x1));
  CHECK(testsupport::max_abs_diff(got, expected) <= 1e-4);
}

TEST_CASE("analytic denoiser: the data-dominated small-t limit returns x_t") {
  SeededRng rng(4);
  const Shape shape{4};
  const Tensor x_t = gaussian(shape, rng);
  const Tensor x1 = gaussian(shape, rng);
  const double t = 1e-4;  // t_1-scale time on a fine quadratic grid
  const auto denoiser =
      make_gaussian_analytic_denoiser(Tensor::full(shape, 0.5), 1.0, schedule());
  const Tensor got = x0_hat(*denoiser, x_t, t, Conditioning{x1}, schedule());
  const double sigma_t = std::sqrt(schedule().sigma2(t));
  CHECK(norm2(axpby(1.0, got, -1.0, x_t)) <= 100.0 * sigma_t);
}

namespace {

// Rejection-free oracle for E[X0 | X_t = target]: draw (X0, X_t) jointly,
// bin draws with X_t near the target, average X0 in the bin. Returns
// (conditional mean, 3 * standard error of it).
std::pair<double, double> binned_conditional_mean(double mu0, double s0sq, double x1, double t,
                                                  double target, double half_width,
                                                  std::size_t draws, SeededRng& rng) {
  const double s2 = schedule().sigma2(t);
  const double sb2 = schedule().sigma_bar2(t);
  const double a = sb2 / (s2 + sb2);
  const double b = s2 / (s2 + sb2);
  const double v = s2 * sb2 / (s2 + sb2);
  double sum = 0.0, sum_sq = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double x0 = mu0 + std::sqrt(s0sq) * rng.normal();
    const double x_t = a * x0 + b * x1 + std::sqrt(v) * rng.normal();
    if (std::fabs(x_t - target) < half_width) {
      sum += x0;
      sum_sq += x0 * x0;
      ++hits;
    }
  }
  REQUIRE(hits > 500);
  const double mean = sum / static_cast<double>(hits);
  const double var = sum_sq / static_cast<double>(hits) - mean * mean;
  return {mean, 3.0 * std::sqrt(var / static_cast<double>(hits))};
}

}  // namespace

TEST_CASE("analytic denoiser matches the Monte-Carlo conditional mean, d = 1") {
  SeededRng rng(99);
  const double t = 0.5, x1 = 0.8, target = 0.3;
  const auto denoiser =
      make_gaussian_analytic_denoiser(Tensor::zeros({1}), 1.0, schedule());
  const Tensor x_t = Tensor::from_data({1}, {target});
  const Tensor analytic =
      x0_hat(*denoiser, x_t, t, Conditioning{Tensor::from_data({1}, {x1})}, schedule());

  const auto [mc_mean, three_se] =
      binned_conditional_mean(0.0, 1.0, x1, t, target, 0.02, 200000, rng);
  CHECK(std::fabs(analytic[0] - mc_mean) <= three_se + 1e-3);
}

TEST_CASE("analytic denoiser matches the Monte-Carlo conditional mean, d = 2") {
  SeededRng rng(123);
  const double t = 0.4;
  const Tensor x1 = Tensor::from_data({2}, {0.8, -0.5});
  const Tensor target = Tensor::from_data({2}, {0.3, 0.1});
  const auto denoiser =
      make_gaussian_analytic_denoiser(Tensor::full({2}, 0.2), 0.7, schedule());
  const Tensor analytic = x0_hat(*denoiser, target, t, Conditioning{x1}, schedule());

  // coordinates are independent under the isotropic model, so each binned
  // 1-D conditional mean is an oracle for its coordinate
  for (std::size_t j = 0; j < 2; ++j) {
    const auto [mc_mean, three_se] =
        binned_conditional_mean(0.2, 0.7, x1[j], t, target[j], 0.02, 200000, rng);
    CHECK(std::fabs(analytic[j] - mc_mean) <= three_se + 1e-3);
  }
}

TEST_CASE("analytic denoiser vjp matches central finite differences") {
  SeededRng rng(7);
  const Shape shape{8};
  const auto denoiser =
      make_gaussian_analytic_denoiser(Tensor::full(shape, 0.3), 0.8, schedule());
  const Conditioning cond{gaussian(shape, rng)};
  const Tensor x_n = gaussian(shape, rng);
  const Tensor v = gaussian(shape, rng);
  const double t = 0.45, h = 1e-4;

  // x0_hat is affine in x_n with an isotropic Jacobian, so J^T v can be
  // compared against the directional difference (J v) directly.
  const Tensor plus = x0_hat(*denoiser, axpby(1.0, x_n, h, v), t, cond, schedule());
  const Tensor minus = x0_hat(*denoiser, axpby(1.0, x_n, -h, v), t, cond, schedule());
  const Tensor fd = scaled(1.0 / (2.0 * h), axpby(1.0, plus, -1.0, minus));
  const Tensor vjp = denoiser->vjp(x_n, t, cond, v);
  CHECK(testsupport::rel_l2_diff(vjp, fd) <= 1e-6);
}

TEST_CASE("bridge matching loss: the oracle scores exactly zero") {
  SeededRng rng(11);
  const Tensor x0 = gaussian({6}, rng);
  const Tensor x1 = gaussian({6}, rng);
  const auto oracle = make_oracle_denoiser(x0, schedule());
  const std::vector<std::pair<Tensor, Tensor>> pairs = {{x0, x1}};
  SeededRng loss_rng(12);
  CHECK(bridge_matching_loss(*oracle, pairs, schedule(), 200, loss_rng) == 0.0);
}

TEST_CASE("bridge matching loss prefers the matching prior") {
  SeededRng rng(13);
  const Shape shape{4};
  const double s0sq = 0.5;
  const Tensor mu0 = Tensor::full(shape, 0.2);

  // pairs drawn from the prior the matching denoiser assumes
  std::vector<std::pair<Tensor, Tensor>> pairs;
  for (int i = 0; i < 32; ++i) {
    const Tensor x0 = axpby(1.0, mu0, std::sqrt(s0sq), gaussian(shape, rng));
    const Tensor x1 = gaussian(shape, rng);
    pairs.emplace_back(x0, x1);
  }

  const auto matching = make_gaussian_analytic_denoiser(mu0, s0sq, schedule());
  const auto perturbed =
      make_gaussian_analytic_denoiser(axpby(1.0, mu0, 1.0, Tensor::full(shape, 1.0)), s0sq,
                                      schedule());

  SeededRng rng_a(14), rng_b(14);
  const double loss_matching = bridge_matching_loss(*matching, pairs, schedule(), 10000, rng_a);
  const double loss_perturbed = bridge_matching_loss(*perturbed, pairs, schedule(), 10000, rng_b);
  CHECK(loss_matching < loss_perturbed);
}

TEST_CASE("bridge matching loss of the zero denoiser matches the folded-normal mean at fixed t") {
  const double t = 0.4;
  const Tensor x0 = Tensor::from_data({1}, {0.9});
  const Tensor x1 = Tensor::from_data({1}, {-0.3});
  const std::vector<std::pair<Tensor, Tensor>> pairs = {{x0, x1}};
  const double times[] = {t};

  const std::size_t n = 10000;
  SeededRng rng(15);
  const double loss =
      bridge_matching_loss(ZeroDenoiser{}, pairs, schedule(), n, rng, times);

  // (X_t - X0)/sigma_t ~ N(m, tau^2) with the moments below; E|Z| is the
  // folded-normal mean.
  const double s2 = schedule().sigma2(t);
  const double sb2 = schedule().sigma_bar2(t);
  const double b = s2 / (s2 + sb2);
  const double v = s2 * sb2 / (s2 + sb2);
  const double sigma_t = std::sqrt(s2);
  const double m = b * (x1[0] - x0[0]) / sigma_t;
  const double tau = std::sqrt(v) / sigma_t;
  const double expected = tau * std::sqrt(2.0 / std::numbers::pi) * std::exp(-m * m / (2 * tau * tau)) +
                          m * std::erf(m / (tau * std::numbers::sqrt2));
  const double second_moment = m * m + tau * tau;
  const double three_se = 3.0 * std::sqrt((second_moment - expected * expected) / double(n));
  CHECK(std::fabs(loss - expected) <= three_se);
}

TEST_CASE("bridge matching loss rejects empty pairs") {
  SeededRng rng(16);
  const std::vector<std::pair<Tensor, Tensor>> none;
  CHECK_THROWS_AS(bridge_matching_loss(ZeroDenoiser{}, none, schedule(), 10, rng), Error);
}

TEST_CASE("denoiser without vjp reports a capability error") {
  SeededRng rng(17);
  const Tensor v = gaussian({3}, rng);
  const ZeroDenoiser z;
  CHECK_FALSE(z.has_vjp());
  try {
    z.vjp(v, 0.5, Conditioning{v}, v);
    FAIL("expected capability error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Capability);
  }
}

TEST_SUITE_END();
