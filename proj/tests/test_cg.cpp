#include "doctest.h"

#include <cmath>
#include <vector>

#include "mesb/cg.hpp"
#include "mesb/rng.hpp"
#include "support.hpp"

using namespace mesb;

TEST_SUITE_BEGIN("cg");

TEST_CASE("identity system converges in one iteration from any start") {
  SeededRng rng(3);
  const Tensor b = gaussian({16}, rng);
  const Tensor x0 = gaussian({16}, rng);
  SpdSystem system{[](const Tensor& x) { return x; }, b};
  const CgResult result = cg_solve(system, x0, 8, 1e-12);
  CHECK(result.iters == 1);
  CHECK(testsupport::max_abs_diff(result.x, b) <= 1e-12);
}

TEST_CASE("diagonal system solves componentwise") {
  const Tensor b = Tensor::full({4}, 1.0);
  SpdSystem system;
  system.rhs = b;
  system.op = [](const Tensor& x) {
    Tensor out = x;
    for (std::size_t i = 0; i < 4; ++i) out[i] = static_cast<double>(i + 1) * x[i];
    return out;
  };
  const CgResult result = cg_solve(system, Tensor::zeros({4}), 4, 1e-14);
  CHECK(result.x[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(result.x[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(result.x[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(result.x[3] == doctest::Approx(0.25).epsilon(1e-12));

  // mild diagonal systems do have non-increasing residuals
  for (std::size_t k = 0; k + 1 < result.residual_history.size(); ++k) {
    CHECK(result.residual_history[k + 1] <= result.residual_history[k] * (1.0 + 1e-12));
  }
}

TEST_CASE("random dense SPD system matches Gaussian elimination in n steps") {
  const std::size_t n = 12;
  SeededRng rng(8);
  // SPD as B^T B + I
  std::vector<std::vector<double>> bmat(n, std::vector<double>(n));
  for (auto& row : bmat) {
    for (double& v : row) v = rng.normal();
  }
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += bmat[k][i] * bmat[k][j];
      m[i][j] = s + (i == j ? 1.0 : 0.0);
    }
  }
  const Tensor b = gaussian({n}, rng);

  SpdSystem system;
  system.rhs = b;
  system.op = [&m, n](const Tensor& x) {
    Tensor out = Tensor::zeros({n});
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += m[i][j] * x[j];
      out[i] = s;
    }
    return out;
  };

  const CgResult cg = cg_solve(system, Tensor::zeros({n}), n, 1e-12);
  const std::vector<double> reference =
      testsupport::gauss_solve(m, std::vector<double>(b.data(), b.data() + n));
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(cg.x[i] == doctest::Approx(reference[i]).epsilon(1e-8));
  }

  SUBCASE("energy-norm error is non-increasing (the CG minimization invariant)") {
    // Standard CG minimizes the M-norm of the error over the Krylov space;
    // the plain residual 2-norm may oscillate on general SPD systems, so the
    // monotone quantity is ||x* - x_k||_M.
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t p = 1; p <= n; ++p) {
      const CgResult partial = cg_solve(system, Tensor::zeros({n}), p, 0.0);
      Tensor err = partial.x;
      for (std::size_t i = 0; i < n; ++i) err[i] -= reference[i];
      const double energy = std::sqrt(dot(err, system.op(err)));
      CHECK(energy <= previous * (1.0 + 1e-10));
      previous = energy;
    }
  }

  SUBCASE("p-step truncation is bit-deterministic") {
    const CgResult a = cg_solve(system, Tensor::zeros({n}), 5, 0.0);
    const CgResult b2 = cg_solve(system, Tensor::zeros({n}), 5, 0.0);
    CHECK(a.iters == b2.iters);
    CHECK(testsupport::max_abs_diff(a.x, b2.x) == 0.0);
  }
}

TEST_CASE("indefinite operator raises a contract violation naming the iterate") {
  SpdSystem system;
  system.rhs = Tensor::from_data({2}, {1.0, 1.0});
  system.op = [](const Tensor& x) {
    Tensor out = x;
    out[0] = -x[0];
    return out;
  };
  try {
    cg_solve(system, Tensor::zeros({2}), 4, 1e-12);
    FAIL("expected a contract violation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OperatorContract);
    CHECK(std::string(e.what()).find("iterate") != std::string::npos);
  }
}

TEST_CASE("symmetry probe flags asymmetric operators") {
  SpdSystem bad;
  bad.rhs = Tensor::zeros({3});
  bad.op = [](const Tensor& x) {
    Tensor out = x;
    out[0] = x[0] + 2.0 * x[1];
    out[1] = x[1];
    return out;
  };
  CHECK_THROWS_AS(check_spd_symmetry(bad, {3}), Error);

  SpdSystem good;
  good.rhs = Tensor::zeros({3});
  good.op = [](const Tensor& x) { return scaled(2.0, x); };
  CHECK_NOTHROW(check_spd_symmetry(good, {3}));
}

TEST_CASE("zero rhs with zero start returns immediately") {
  SpdSystem system{[](const Tensor& x) { return x; }, Tensor::zeros({4})};
  const CgResult result = cg_solve(system, Tensor::zeros({4}), 3, 1e-12);
  CHECK(result.iters == 0);
  CHECK(result.final_residual == 0.0);
}

TEST_SUITE_END();
