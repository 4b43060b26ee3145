#include "doctest.h"

#include <Eigen/Dense>

#include <cmath>

#include "mesb/linop.hpp"
#include "mesb/rng.hpp"
#include "support.hpp"

using namespace mesb;
using testsupport::dense_from_operator;
using testsupport::max_abs_diff;

TEST_SUITE_BEGIN("linop");

namespace {

// <A x, y> == <x, A^T y> on seeded random pairs.
void check_adjoint(const LinearOperator& a, double rel_tol = 1e-10, int pairs = 32) {
  SeededRng rng(2024);
  for (int i = 0; i < pairs; ++i) {
    const Tensor x = gaussian(a.shape_in(), rng);
    const Tensor y = gaussian(a.shape_out(), rng);
    const double left = dot(a.apply(x), y);
    const double right = dot(x, a.adjoint(y));
    const double scale = std::max({std::fabs(left), std::fabs(right), 1e-12});
    CHECK(std::fabs(left - right) <= rel_tol * scale);
  }
}

void check_linearity(const LinearOperator& a) {
  SeededRng rng(5);
  const Tensor x = gaussian(a.shape_in(), rng);
  const Tensor y = gaussian(a.shape_in(), rng);
  const Tensor lhs = a.apply(axpby(0.7, x, -1.3, y));
  const Tensor rhs = axpby(0.7, a.apply(x), -1.3, a.apply(y));
  CHECK(max_abs_diff(lhs, rhs) <= 1e-12 * std::max(1.0, norm2(rhs)));
}

}  // namespace

TEST_CASE("identity operator") {
  const auto id = identity({3, 3});
  SeededRng rng(1);
  const Tensor x = gaussian({3, 3}, rng);
  CHECK(max_abs_diff(id->apply(x), x) == 0.0);
  CHECK(max_abs_diff(id->adjoint(x), x) == 0.0);
  check_adjoint(*id);
}

TEST_CASE("gaussian blur preserves constants") {
  const auto blur = gaussian_blur({16, 16}, 1.5);
  const Tensor flat = Tensor::full({16, 16}, 5.0);
  CHECK(max_abs_diff(blur->apply(flat), flat) <= 1e-12);
}

TEST_CASE("gaussian blur is self-adjoint and linear") {
  const auto blur = gaussian_blur({12, 16}, 1.2);
  check_adjoint(*blur);
  check_linearity(*blur);
  SeededRng rng(9);
  const Tensor y = gaussian({12, 16}, rng);
  CHECK(max_abs_diff(blur->apply(y), blur->adjoint(y)) <= 1e-14);
}

TEST_CASE("gaussian blur semigroup: blur(s) twice equals blur(s*sqrt2)") {
  const Shape shape{16, 16};
  const double sigma = 1.5;
  const auto once = gaussian_blur(shape, sigma);
  const auto twice = gaussian_blur(shape, sigma * std::numbers::sqrt2);

  // dense-kernel composition oracle on 16x16
  const Eigen::MatrixXd m1 = dense_from_operator(*once);
  const Eigen::MatrixXd m2 = dense_from_operator(*twice);
  CHECK((m1 * m1 - m2).cwiseAbs().maxCoeff() <= 1e-8);

  SeededRng rng(31);
  const Tensor x = gaussian(shape, rng);
  const Tensor composed = once->apply(once->apply(x));
  const Tensor direct = twice->apply(x);
  CHECK(max_abs_diff(composed, direct) <= 1e-8);
}

TEST_CASE("gaussian blur rejects nonpositive sigma") {
  CHECK_THROWS_AS(gaussian_blur({8, 8}, 0.0), Error);
  CHECK_THROWS_AS(gaussian_blur({8, 8}, -1.0), Error);
}

TEST_CASE("block downsample averages blocks") {
  const auto down = block_downsample({4, 4}, 2);
  const Tensor fives = Tensor::full({4, 4}, 5.0);
  const Tensor out = down->apply(fives);
  REQUIRE(out.shape() == Shape{2, 2});
  CHECK(max_abs_diff(out, Tensor::full({2, 2}, 5.0)) == 0.0);
  check_adjoint(*down, 1e-12, 32);
  check_linearity(*down);
}

TEST_CASE("block downsample Gram structure: A = alpha0 A A^T A with alpha0 = factor^2") {
  const auto down = block_downsample({8, 8}, 2);
  const Eigen::MatrixXd a = dense_from_operator(*down);
  const double alpha0 = 4.0;
  const Eigen::MatrixXd lhs = a;
  const Eigen::MatrixXd rhs = alpha0 * a * a.transpose() * a;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("block downsample rejects indivisible dims") {
  CHECK_THROWS_AS(block_downsample({5, 4}, 2), Error);
  CHECK_THROWS_AS(block_downsample({4, 6}, 4), Error);
}

TEST_CASE("nearest upsample replicates pixels and adjoins the block sum") {
  const auto up = nearest_upsample({2, 2}, 3);
  const Tensor x = Tensor::from_data({2, 2}, {1.0, 2.0, 3.0, 4.0});
  const Tensor big = up->apply(x);
  REQUIRE(big.shape() == Shape{6, 6});
  CHECK(big.at(0, 0) == 1.0);
  CHECK(big.at(2, 2) == 1.0);
  CHECK(big.at(0, 3) == 2.0);
  CHECK(big.at(5, 5) == 4.0);
  check_adjoint(*up, 1e-12);
}

TEST_CASE("mask keeps, scatters, and round-trips") {
  const auto keep_all = mask({4}, {0, 1, 2, 3});
  SeededRng rng(77);
  const Tensor x = gaussian({4}, rng);
  CHECK(max_abs_diff(keep_all->apply(x), Tensor::from_data({4}, {x[0], x[1], x[2], x[3]})) == 0.0);

  const auto m = mask({2, 3}, {1, 4});
  const Tensor img = Tensor::from_data({2, 3}, {10, 11, 12, 13, 14, 15});
  const Tensor kept = m->apply(img);
  REQUIRE(kept.shape() == Shape{2});
  CHECK(kept[0] == 11.0);
  CHECK(kept[1] == 14.0);

  const Tensor back = m->adjoint(kept);
  CHECK(back[1] == 11.0);
  CHECK(back[4] == 14.0);
  CHECK(back[0] == 0.0);
  CHECK(back[5] == 0.0);
  check_adjoint(*m, 1e-12);
}

TEST_CASE("mask validates its index set") {
  CHECK_THROWS_AS(mask({4}, {}), Error);
  CHECK_THROWS_AS(mask({4}, {4}), Error);
  CHECK_THROWS_AS(mask({4}, {1, 1}), Error);
}

TEST_CASE("toy radon maps zero to zero and has an exact adjoint") {
  const auto radon = toy_radon(16, 8);
  const Tensor zero = Tensor::zeros({16, 16});
  CHECK(norm2(radon->apply(zero)) == 0.0);
  check_adjoint(*radon, 1e-10);
  check_linearity(*radon);
}

TEST_CASE("toy radon: centered disk projections are symmetric about the central detector") {
  const std::size_t n = 16;
  const auto radon = toy_radon(n, 6, n);
  Tensor disk = Tensor::zeros({n, n});
  const double center = 0.5 * static_cast<double>(n - 1);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double dr = static_cast<double>(r) - center;
      const double dc = static_cast<double>(c) - center;
      if (dr * dr + dc * dc <= 25.0) disk.at(r, c) = 1.0;
    }
  }
  const Tensor sino = radon->apply(disk);
  for (std::size_t v = 0; v < 6; ++v) {
    for (std::size_t d = 0; d < n; ++d) {
      const double a = sino.at(v, d);
      const double b = sino.at(v, n - 1 - d);
      CHECK(std::fabs(a - b) <= 1e-8 * std::max(1.0, std::fabs(a)));
    }
  }
}

TEST_CASE("toy radon rejects degenerate sizes") {
  CHECK_THROWS_AS(toy_radon(4, 8), Error);
  CHECK_THROWS_AS(toy_radon(16, 0), Error);
}

TEST_CASE("laplacian gram annihilates constants and matches the stencil") {
  const auto g = laplacian_gram({8, 8});
  CHECK(norm2(g->apply(Tensor::full({8, 8}, 3.7))) <= 1e-14);

  Tensor impulse = Tensor::zeros({8, 8});
  impulse.at(3, 4) = 1.0;
  const Tensor out = g->apply(impulse);
  CHECK(out.at(3, 4) == doctest::Approx(2.0));
  CHECK(out.at(2, 4) == doctest::Approx(-0.5));
  CHECK(out.at(4, 4) == doctest::Approx(-0.5));
  CHECK(out.at(3, 3) == doctest::Approx(-0.5));
  CHECK(out.at(3, 5) == doctest::Approx(-0.5));
  check_adjoint(*g, 1e-12);
}

TEST_CASE("laplacian gram is positive semidefinite") {
  const auto g = laplacian_gram({8, 8});
  SeededRng rng(12);
  for (int i = 0; i < 16; ++i) {
    const Tensor x = gaussian({8, 8}, rng);
    const double quad = dot(x, g->apply(x));
    // oracle: 0.5 * sum of squared periodic forward differences
    double diffsum = 0.0;
    for (std::size_t r = 0; r < 8; ++r) {
      for (std::size_t c = 0; c < 8; ++c) {
        const double dr = x.at((r + 1) % 8, c) - x.at(r, c);
        const double dc = x.at(r, (c + 1) % 8) - x.at(r, c);
        diffsum += dr * dr + dc * dc;
      }
    }
    CHECK(quad >= 0.0);
    CHECK(quad == doctest::Approx(0.5 * diffsum).epsilon(1e-10));
  }
  CHECK_THROWS_AS(laplacian_gram({8}), Error);
}

TEST_CASE("partial isometry check: identity, mask, downsample pass; blur fails") {
  const auto id = identity({16});
  const auto a0_id = partial_isometry_check(*id, 1e-8);
  REQUIRE(a0_id.has_value());
  CHECK(*a0_id == doctest::Approx(1.0).epsilon(1e-12));

  const auto m = mask({16}, {0, 3, 5, 6, 9, 12, 15});
  const auto a0_mask = partial_isometry_check(*m, 1e-8);
  REQUIRE(a0_mask.has_value());
  CHECK(*a0_mask == doctest::Approx(1.0).epsilon(1e-10));
  {
    // dense oracle: A A^T A == A exactly for a selection matrix
    const Eigen::MatrixXd a = dense_from_operator(*m);
    CHECK((a * a.transpose() * a - a).cwiseAbs().maxCoeff() <= 1e-14);
  }

  const auto down = block_downsample({8, 8}, 2);
  const auto a0_down = partial_isometry_check(*down, 1e-8);
  REQUIRE(a0_down.has_value());
  CHECK(*a0_down == doctest::Approx(4.0).epsilon(1e-10));

  const auto blur = gaussian_blur({8, 8}, 1.0);
  CHECK_FALSE(partial_isometry_check(*blur, 1e-6).has_value());
  {
    // oracle: dense spectrum of the blur Gram is visibly non-flat
    const Eigen::MatrixXd a = dense_from_operator(*blur);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.transpose() * a);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    CHECK(hi / std::max(lo, 1e-300) > 10.0);
  }

  const auto radon = toy_radon(16, 8);
  CHECK_FALSE(partial_isometry_check(*radon, 1e-6).has_value());
}

TEST_SUITE_END();
