#include "mesb/denoise.hpp"

#include <cmath>

namespace mesb {

Tensor Denoiser::vjp(const Tensor&, double, const Conditioning&, const Tensor&) const {
  fail(ErrorKind::Capability, "denoiser does not provide a vjp");
}

Tensor x0_hat(const Denoiser& denoiser, const Tensor& x_t, double t,
              const Conditioning& cond, const NoiseSchedule& schedule) {
  if (!(t > 0.0 && t <= 1.0)) {
    fail_invalid("x0_hat requires t in (0,1], got " + std::to_string(t));
  }
  const double sigma_t = std::sqrt(schedule.sigma2(t));
  if (!(sigma_t > 0.0)) fail_invalid("x0_hat: sigma_t = 0 at t = " + std::to_string(t));
  const Tensor eps = denoiser.predict_eps(x_t, t, cond);
  if (!eps.same_shape(x_t)) {
    fail(ErrorKind::Internal, "denoiser returned shape " + shape_to_string(eps.shape()) +
                                  " for input " + shape_to_string(x_t.shape()));
  }
  return axpby(1.0, x_t, -sigma_t, eps);
}

namespace detail {

ForwardMoments forward_moments(const NoiseSchedule& schedule, double t) {
  const double s2 = schedule.sigma2(t);
  const double sb2 = schedule.sigma_bar2(t);
  const double total = s2 + sb2;
  return {sb2 / total, s2 / total, s2 * sb2 / total};
}

}  // namespace detail

namespace {

class GaussianAnalyticDenoiser final : public Denoiser {
 public:
  GaussianAnalyticDenoiser(Tensor mu0, double s0sq, NoiseSchedule schedule)
      : mu0_(std::move(mu0)), s0sq_(s0sq), schedule_(std::move(schedule)) {}

  Tensor predict_eps(const Tensor& x_t, double t, const Conditioning& cond) const override {
    const double sigma_t = std::sqrt(sigma2_checked(t));
    const Tensor mean = posterior_mean(x_t, t, cond);
    return scaled(1.0 / sigma_t, axpby(1.0, x_t, -1.0, mean));
  }

  bool has_vjp() const override { return true; }

  Tensor vjp(const Tensor&, double t, const Conditioning&, const Tensor& v) const override {
    return scaled(gain(t), v);
  }

 private:
  double sigma2_checked(double t) const {
    if (!(t > 0.0 && t <= 1.0)) {
      fail_invalid("analytic denoiser requires t in (0,1], got " + std::to_string(t));
    }
    return schedule_.sigma2(t);
  }

  // Posterior precision 1/s0sq + a^2/v, written with a^2/v = sb2/(total*s2)
  // and a/v = 1/s2 so the t -> 1 (v -> 0) limit stays finite.
  double precision(double t) const {
    const double s2 = schedule_.sigma2(t);
    const double sb2 = schedule_.sigma_bar2(t);
    return 1.0 / s0sq_ + sb2 / ((s2 + sb2) * s2);
  }

  // d x0_hat / d x_t is gain * I.
  double gain(double t) const { return (1.0 / sigma2_checked(t)) / precision(t); }

  Tensor posterior_mean(const Tensor& x_t, double t, const Conditioning& cond) const {
    if (!cond.x_corrupt.same_shape(x_t)) {
      fail_invalid("analytic denoiser: conditioning shape " +
                   shape_to_string(cond.x_corrupt.shape()) + " does not match state shape " +
                   shape_to_string(x_t.shape()));
    }
    if (!mu0_.same_shape(x_t)) {
      fail_invalid("analytic denoiser: prior mean shape " + shape_to_string(mu0_.shape()) +
                   " does not match state shape " + shape_to_string(x_t.shape()));
    }
    const double s2 = sigma2_checked(t);
    const auto m = detail::forward_moments(schedule_, t);
    const double prec = precision(t);
    // (mu0/s0sq + (x_t - b*x1)/s2) / prec
    const Tensor residual = axpby(1.0, x_t, -m.b, cond.x_corrupt);
    return axpby(1.0 / (s0sq_ * prec), mu0_, 1.0 / (s2 * prec), residual);
  }

  Tensor mu0_;
  double s0sq_;
  NoiseSchedule schedule_;
};

class OracleDenoiser final : public Denoiser {
 public:
  OracleDenoiser(Tensor x0_true, NoiseSchedule schedule)
      : x0_true_(std::move(x0_true)), schedule_(std::move(schedule)) {}

  Tensor predict_eps(const Tensor& x_t, double t, const Conditioning&) const override {
    if (!(t > 0.0 && t <= 1.0)) {
      fail_invalid("oracle denoiser requires t in (0,1], got " + std::to_string(t));
    }
    if (!x_t.same_shape(x0_true_)) {
      fail_invalid("oracle denoiser: state shape " + shape_to_string(x_t.shape()) +
                   " does not match x0_true shape " + shape_to_string(x0_true_.shape()));
    }
    const double sigma_t = std::sqrt(schedule_.sigma2(t));
    return scaled(1.0 / sigma_t, axpby(1.0, x_t, -1.0, x0_true_));
  }

  bool has_vjp() const override { return true; }

  // x0_hat is constant in x_n: zero map.
  Tensor vjp(const Tensor&, double, const Conditioning&, const Tensor& v) const override {
    return Tensor::zeros(v.shape());
  }

 private:
  Tensor x0_true_;
  NoiseSchedule schedule_;
};

}  // namespace

DenoiserPtr make_gaussian_analytic_denoiser(Tensor mu0, double s0sq, NoiseSchedule schedule) {
  if (!(s0sq > 0.0)) fail_invalid("analytic denoiser requires s0sq > 0");
  return std::make_shared<GaussianAnalyticDenoiser>(std::move(mu0), s0sq, std::move(schedule));
}

DenoiserPtr make_oracle_denoiser(Tensor x0_true, NoiseSchedule schedule) {
  return std::make_shared<OracleDenoiser>(std::move(x0_true), std::move(schedule));
}

double bridge_matching_loss(const Denoiser& denoiser,
                            std::span<const std::pair<Tensor, Tensor>> pairs,
                            const NoiseSchedule& schedule, std::size_t n_draws,
                            SeededRng& rng, std::span<const double> times) {
  if (pairs.empty()) fail_invalid("bridge_matching_loss requires at least one (x0, x1) pair");
  if (n_draws < 1) fail_invalid("bridge_matching_loss requires n_draws >= 1");

  std::vector<double> default_times;
  if (times.empty()) {
    for (double t : schedule.knot_times()) {
      if (t > 0.0) default_times.push_back(t);
    }
    times = default_times;
  }
  for (double t : times) {
    if (!(t > 0.0 && t <= 1.0)) fail_invalid("bridge_matching_loss times must lie in (0,1]");
  }

  double total = 0.0;
  for (std::size_t i = 0; i < n_draws; ++i) {
    const auto& [x0, x1] = pairs[std::min<std::size_t>(
        static_cast<std::size_t>(rng.uniform() * static_cast<double>(pairs.size())),
        pairs.size() - 1)];
    const double t = times[std::min<std::size_t>(
        static_cast<std::size_t>(rng.uniform() * static_cast<double>(times.size())),
        times.size() - 1)];
    const auto m = detail::forward_moments(schedule, t);
    Tensor x_t = axpby(m.a, x0, m.b, x1);
    if (m.v > 0.0) x_t = axpby(1.0, x_t, std::sqrt(m.v), gaussian(x_t.shape(), rng));
    const double sigma_t = std::sqrt(schedule.sigma2(t));
    const Tensor target = scaled(1.0 / sigma_t, axpby(1.0, x_t, -1.0, x0));
    const Tensor eps = denoiser.predict_eps(x_t, t, Conditioning{x1});
    total += norm2(axpby(1.0, eps, -1.0, target));
  }
  return total / static_cast<double>(n_draws);
}

}  // namespace mesb
