#include "streamopt/blocktridiag.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace streamopt;
using streamopt::testing::random_system;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }
Vector scalar_vec(double v) { return Vector::Constant(1, v); }

BlockTridiagSystem scalar_pair() {
  BlockTridiagSystem s;
  s.n = 1;
  s.diag = {scalar(2), scalar(2)};
  s.offdiag = {scalar(1)};
  s.rhs = {scalar_vec(1), scalar_vec(1)};
  return s;
}

}  // namespace

TEST_CASE("lu append on the scalar pair") {
  LuStreamCache cache(1);
  cache.seed(scalar(2));
  cache.append(scalar(2), scalar(1));
  CHECK(cache.upper(0)(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(cache.pivot(1)(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("forward and backward sweeps on the scalar pair") {
  LuStreamCache cache(1);
  cache.seed(scalar(2));
  cache.forward(scalar_vec(1));
  cache.append(scalar(2), scalar(1));
  cache.forward(scalar_vec(1), scalar(1));
  CHECK(cache.forward_variable(0)(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(cache.forward_variable(1)(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const auto x = cache.backward_sweep();
  REQUIRE(x.size() == 2);
  CHECK(x[0](0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(x[1](0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const auto last = cache.backward_sweep(1);
  REQUIRE(last.size() == 1);
  CHECK(last[0](0) == cache.forward_variable(1)(0));
  CHECK_THROWS_AS(cache.backward_sweep(3), std::invalid_argument);
}

TEST_CASE("dense oracle on the scalar pair") {
  const auto x = solve_dense(scalar_pair());
  CHECK(x[0](0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(x[1](0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("decoupled frames give Q = H, U = 0 and v = Q⁻¹g") {
  std::mt19937_64 rng(3);
  auto s = random_system(3, 4, 2.0, 0.3, 0.0, rng);
  for (auto& e : s.offdiag) e.setZero();
  LuStreamCache cache(3);
  cache.seed(s.diag[0]);
  cache.forward(s.rhs[0]);
  for (std::size_t t = 1; t < s.frames(); ++t) {
    cache.append(s.diag[t], s.offdiag[t - 1]);
    cache.forward(s.rhs[t], s.offdiag[t - 1]);
  }
  const auto x = cache.backward_sweep();
  for (std::size_t t = 0; t < s.frames(); ++t) {
    CHECK((cache.pivot(t) - s.diag[t]).norm() == 0.0);
    if (t + 1 < s.frames()) CHECK(cache.upper(t).norm() == 0.0);
    const Vector v = s.diag[t].lu().solve(s.rhs[t]);
    CHECK((cache.forward_variable(t) - v).norm() < 1e-13 * v.norm());
    CHECK((x[t] - cache.forward_variable(t)).norm() == 0.0);
  }
}

TEST_CASE("identity system keeps identity pivots and zero rhs gives zero forward variables") {
  const Index n = 2;
  LuStreamCache cache(n);
  cache.seed(Matrix::Identity(n, n));
  cache.forward(Vector::Zero(n));
  for (int t = 1; t < 5; ++t) {
    cache.append(Matrix::Identity(n, n), Matrix::Zero(n, n));
    cache.forward(Vector::Zero(n), Matrix::Zero(n, n));
  }
  for (std::size_t t = 0; t < 5; ++t) {
    CHECK((cache.pivot(t) - Matrix::Identity(n, n)).norm() == 0.0);
    CHECK(cache.forward_variable(t).norm() == 0.0);
  }
}

TEST_CASE("recursion invariants hold to 1e-10") {
  std::mt19937_64 rng(11);
  const auto s = random_system(4, 12, 3.0, 0.2, 0.3, rng);
  LuStreamCache cache(4);
  cache.seed(s.diag[0]);
  for (std::size_t t = 1; t < s.frames(); ++t) cache.append(s.diag[t], s.offdiag[t - 1]);
  for (std::size_t t = 1; t < s.frames(); ++t) {
    const Matrix& qp = cache.pivot(t - 1);
    const Matrix u = qp.lu().solve(s.offdiag[t - 1].transpose());
    CHECK((cache.upper(t - 1) - u).norm() <= 1e-10 * u.norm());
    const Matrix q = s.diag[t] - s.offdiag[t - 1] * u;
    CHECK((cache.pivot(t) - q).norm() <= 1e-10 * q.norm());
  }
}

TEST_CASE("ill-conditioned pivot raises a breakdown naming the frame") {
  LuStreamCache cache(2);
  Matrix h = Matrix::Identity(2, 2);
  cache.seed(h);
  Matrix singular(2, 2);
  singular << 1, 1, 1, 1;
  cache.append(singular, Matrix::Zero(2, 2));
  try {
    cache.append(h, Matrix::Identity(2, 2));
    FAIL("expected a breakdown");
  } catch (const FactorizationBreakdown& e) {
    CHECK(e.frame() == 1);
    CHECK(e.condition() > 1e12);
  }
}

TEST_CASE("dense oracle residual, identity system and singular input") {
  std::mt19937_64 rng(5);
  const auto s = random_system(3, 6, 1.5, 0.4, 0.2, rng);
  const auto x = solve_dense(s);
  const Vector r = stack(multiply(s, x)) - stack(s.rhs);
  CHECK(r.norm() < 1e-10 * stack(s.rhs).norm());

  BlockTridiagSystem id;
  id.n = 2;
  id.diag = {Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  id.offdiag = {Matrix::Zero(2, 2)};
  id.rhs = {Vector::Constant(2, 3.0), Vector::Constant(2, -1.0)};
  const auto xi = solve_dense(id);
  CHECK((stack(xi) - stack(id.rhs)).norm() == 0.0);

  BlockTridiagSystem bad = id;
  bad.diag[1].setZero();
  CHECK_THROWS(solve_dense(bad));
}

TEST_CASE("validate rejects shape and symmetry violations") {
  auto s = scalar_pair();
  CHECK_NOTHROW(s.validate());
  auto short_off = s;
  short_off.offdiag.clear();
  CHECK_THROWS_AS(short_off.validate(), std::invalid_argument);
  BlockTridiagSystem asym;
  asym.n = 2;
  Matrix h(2, 2);
  h << 1, 0.5, 0, 1;
  asym.diag = {h};
  asym.rhs = {Vector::Zero(2)};
  CHECK_THROWS_AS(asym.validate(), std::invalid_argument);
}

TEST_CASE("oracle equivalence on random dominant systems") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> frames(1, 30);
  std::uniform_real_distribution<double> kappa(0.5, 5.0);
  for (const Index n : {1, 2, 5}) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto s = random_system(n, static_cast<std::size_t>(frames(rng)), kappa(rng), 0.3, 0.3, rng);
      const double err = max_relative_block_error(solve_block_tridiagonal(s), solve_dense(s));
      CHECK(err < 1e-9);
    }
  }
}

TEST_CASE("closed-form limiting epsilon") {
  SUBCASE("identity-like") {
    const auto r = conditioning_from_constants(1.0, 0.0, 0.0);
    REQUIRE(r.eps_star);
    CHECK(*r.eps_star == 0.0);
    CHECK(*r.rho == 0.0);
    CHECK(r.dominant);
  }
  SUBCASE("boundary of dominance") {
    const auto eps = limiting_epsilon(0.2, 0.4);
    REQUIRE(eps);
    CHECK(*eps == doctest::Approx(0.6).epsilon(1e-12));
  }
  SUBCASE("delta 0.1 theta 0.2") {
    // Reference values from a 30-digit evaluation.
    const auto r = conditioning_from_constants(1.0, 0.1, 0.2);
    REQUIRE(r.eps_star);
    CHECK(std::abs(*r.eps_star - 0.146887112585072517) < 1e-14);
    CHECK(std::abs(*r.rho - 0.234435562925362587) < 1e-14);
    const auto it = iterate_epsilon_recursion(0.1, 0.2);
    CHECK(it.converged);
    CHECK(it.monotone);
    CHECK(std::abs(it.limit - *r.eps_star) < 1e-10);
  }
  SUBCASE("non-dominant") {
    const auto r = conditioning_from_constants(1.0, 0.2, 0.5);
    CHECK_FALSE(r.dominant);
    CHECK_FALSE(r.eps_star);
    CHECK_FALSE(r.rho);
  }
}

TEST_CASE("measured conditioning and the pivot envelope") {
  std::mt19937_64 rng(77);
  const auto s = random_system(3, 20, 2.5, 0.25, 0.3, rng);
  const auto r = conditioning_report(s);
  CHECK(r.dominant);
  REQUIRE(r.eps_star);
  LuStreamCache cache(3);
  cache.seed(s.diag[0]);
  for (std::size_t t = 1; t < s.frames(); ++t) cache.append(s.diag[t], s.offdiag[t - 1]);
  for (std::size_t t = 0; t < s.frames(); ++t) {
    Matrix scaled = cache.pivot(t) / r.kappa;
    scaled.diagonal().array() -= 1.0;
    CHECK(spectral_norm(scaled) <= *r.eps_star + 1e-9);
  }
}

TEST_CASE("uniform solution bound") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = random_system(3, 25, 1.0 + trial, 0.2, 0.3, rng);
    const auto r = conditioning_report(s);
    REQUIRE(r.dominant);
    double m = 0.0;
    for (const auto& g : s.rhs) m = std::max(m, g.norm());
    const double bound = solution_block_bound(r, m);
    for (const auto& x : solve_dense(s)) CHECK(x.norm() <= bound + 1e-9);
  }
}

TEST_CASE("contractive recursion bound matches direct iteration") {
  for (const double a : {0.0, 0.3, 0.9}) {
    const double b = 1.7;
    double z = b;
    for (std::size_t t = 0; t < 40; ++t) {
      CHECK(contractive_bound(a, b, t) == doctest::Approx(z).epsilon(1e-12));
      z = b + a * z;
    }
  }
}

TEST_CASE("first block sensitivity") {
  std::mt19937_64 rng(21);
  SUBCASE("zero coupling gives a zero tail") {
    auto s = random_system(3, 3, 2.0, 0.2, 0.0, rng);
    for (auto& e : s.offdiag) e.setZero();
    for (std::size_t t = 1; t < s.frames(); ++t) s.rhs[t].setZero();
    const auto c = first_block_sensitivity(s);
    CHECK(c.tail_norm == 0.0);
    CHECK(c.within_bound);
  }
  SUBCASE("random two-block system") {
    auto s = random_system(3, 2, 2.0, 0.3, 0.3, rng);
    s.rhs[1].setZero();
    const auto c = first_block_sensitivity(s);
    CHECK(c.within_bound);
    CHECK(c.ratio <= c.alpha * c.beta * (1.0 + 1e-12));
  }
  SUBCASE("B = I, V = I/2") {
    BlockTridiagSystem s;
    s.n = 3;
    s.diag = {2.0 * Matrix::Identity(3, 3), Matrix::Identity(3, 3)};
    s.offdiag = {0.5 * Matrix::Identity(3, 3)};
    s.rhs = {streamopt::testing::random_vector(3, rng), Vector::Zero(3)};
    const auto c = first_block_sensitivity(s);
    CHECK(c.tail_norm == doctest::Approx(0.5 * c.h0_norm).epsilon(1e-12));
    CHECK((c.solution[1] + 0.5 * c.solution[0]).norm() < 1e-14);
  }
  SUBCASE("rhs beyond the first block is rejected") {
    auto s = random_system(2, 3, 2.0, 0.2, 0.2, rng);
    CHECK_THROWS_AS(first_block_sensitivity(s), std::invalid_argument);
  }
}
