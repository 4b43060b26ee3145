#include "mesb/schedule.hpp"

#include <cmath>

namespace mesb {

namespace {

void check_unit_time(double t, const char* what) {
  if (!(t >= 0.0 && t <= 1.0)) {
    fail_invalid(std::string(what) + " requires t in [0,1], got " + std::to_string(t));
  }
}

}  // namespace

NoiseSchedule NoiseSchedule::symmetric_beta(double beta_min, double beta_max,
                                            std::size_t n_base) {
  if (!(beta_min > 0.0) || !(beta_max > 0.0)) {
    fail_invalid("symmetric_beta requires positive beta_min and beta_max");
  }
  if (beta_min > beta_max) fail_invalid("symmetric_beta requires beta_min <= beta_max");
  if (n_base < 2) fail_invalid("symmetric_beta requires n_base >= 2");

  std::vector<double> samples(n_base + 1);
  for (std::size_t i = 0; i <= n_base; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n_base);
    const double ramp = t <= 0.5 ? 2.0 * t : 2.0 * (1.0 - t);
    samples[i] = beta_min + (beta_max - beta_min) * ramp;
  }
  return from_beta_samples(std::move(samples));
}

NoiseSchedule NoiseSchedule::from_beta_samples(std::vector<double> beta_samples) {
  if (beta_samples.size() < 3) fail_invalid("schedule needs at least 3 beta samples");
  for (double b : beta_samples) {
    if (!(b >= 0.0) || !std::isfinite(b)) fail_invalid("beta samples must be finite and >= 0");
  }
  NoiseSchedule s;
  s.beta_ = std::move(beta_samples);
  s.h_ = 1.0 / static_cast<double>(s.beta_.size() - 1);
  s.cum_.assign(s.beta_.size(), 0.0);
  for (std::size_t i = 1; i < s.beta_.size(); ++i) {
    s.cum_[i] = s.cum_[i - 1] + 0.5 * (s.beta_[i - 1] + s.beta_[i]) * s.h_;
  }
  return s;
}

double NoiseSchedule::beta(double t) const {
  check_unit_time(t, "beta");
  const double pos = t / h_;
  const std::size_t k = std::min(static_cast<std::size_t>(pos), beta_.size() - 2);
  const double frac = pos - static_cast<double>(k);
  return beta_[k] + frac * (beta_[k + 1] - beta_[k]);
}

double NoiseSchedule::sigma2(double t) const {
  check_unit_time(t, "sigma2");
  const double pos = t / h_;
  const std::size_t k = std::min(static_cast<std::size_t>(pos), beta_.size() - 2);
  const double frac = pos - static_cast<double>(k);
  return cum_[k] + frac * (cum_[k + 1] - cum_[k]);
}

double NoiseSchedule::sigma_bar2(double t) const {
  check_unit_time(t, "sigma_bar2");
  if (t >= 1.0) return 0.0;
  return cum_.back() - sigma2(t);
}

double NoiseSchedule::alpha2(double t_a, double t_b) const {
  check_unit_time(t_a, "alpha2");
  check_unit_time(t_b, "alpha2");
  if (!(t_a < t_b)) fail_invalid("alpha2 requires t_a < t_b");
  return sigma2(t_b) - sigma2(t_a);
}

std::vector<double> NoiseSchedule::knot_times() const {
  std::vector<double> times(beta_.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    times[i] = static_cast<double>(i) * h_;
  }
  times.back() = 1.0;
  return times;
}

TimeGrid TimeGrid::quadratic(std::size_t n_steps, bool dense_near_one) {
  if (n_steps < 1) fail_invalid("time grid requires at least 1 step");
  TimeGrid grid;
  grid.times.resize(n_steps + 1);
  const double n = static_cast<double>(n_steps);
  for (std::size_t i = 0; i <= n_steps; ++i) {
    const double r = static_cast<double>(i) / n;
    grid.times[i] = dense_near_one ? 1.0 - (1.0 - r) * (1.0 - r) : r * r;
  }
  grid.times.front() = 0.0;
  grid.times.back() = 1.0;
  return grid;
}

}  // namespace mesb
