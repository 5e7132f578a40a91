#include "streamopt/testbeds/lot.hpp"
#include "streamopt/testbeds/nhpp.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace streamopt;

TEST_CASE("crossings of a constant signal") {
  const auto scan = lot::find_crossings([](double) { return 0.1; }, 0.0, 5.0, lot::LotConfig::default_levels(),
                                        1e-3, 1e-10);
  CHECK(scan.crossings.empty());
}

TEST_CASE("crossing of a ramp") {
  const auto scan = lot::find_crossings([](double t) { return t; }, 0.0, 1.0, {0.3}, 1e-3, 1e-12);
  REQUIRE(scan.crossings.size() == 1);
  CHECK(scan.crossings[0].time == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(scan.crossings[0].level == 0.3);
}

TEST_CASE("default level-crossing stream") {
  const auto stream = lot::generate_lot_stream(lot::LotConfig{});
  CHECK(stream.scan.crossings.size() >= 1000);
  CHECK(stream.batches.size() == stream.config.frames);
  std::size_t rows = 0;
  for (const auto& b : stream.batches) {
    rows += static_cast<std::size_t>(b.y.size());
    CHECK(b.a.cols() == stream.config.basis_per_frame);
  }
  CHECK(rows == stream.scan.crossings.size());
  for (const auto& c : stream.scan.crossings)
    CHECK(std::abs(stream.signal(c.time) - c.level) < 1e-6);
}

TEST_CASE("crossing stream is deterministic in the seed") {
  lot::LotConfig c;
  c.frames = 4;
  c.sample_end = c.sample_begin + 4.0 * 16.5 / 16.0;
  const auto a = lot::generate_lot_stream(c);
  const auto b = lot::generate_lot_stream(c, Execution::Serial);
  REQUIRE(a.scan.crossings.size() == b.scan.crossings.size());
  for (std::size_t i = 0; i < a.scan.crossings.size(); ++i) CHECK(a.scan.crossings[i].time == b.scan.crossings[i].time);
}

TEST_CASE("rising cut satisfies the power-complement identity") {
  for (double u = -1.5; u <= 1.5; u += 0.01) {
    const double r = lot::rising_cut(u);
    const double s = lot::rising_cut(-u);
    CHECK(r * r + s * s == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(lot::rising_cut(-1.0) == 0.0);
  CHECK(lot::rising_cut(1.0) == 1.0);
}

TEST_CASE("LOT basis is orthonormal") {
  lot::LotConfig c;
  c.basis_per_frame = 12;
  const auto check = lot::lot_basis_orthonormality(c);
  CHECK(check.max_deviation < 1e-8);
  const lot::LotBasis basis(c);
  CHECK(lot::inner_product(basis, 3, 2, 3, 2) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(lot::inner_product(basis, 2, 0, 5, 0) == 0.0);
}

TEST_CASE("LOT basis at the default size") {
  const auto check = lot::lot_basis_orthonormality(lot::LotConfig{}, 4000);
  CHECK(check.max_deviation < 1e-8);
}

TEST_CASE("homogeneous Poisson count matches the rate") {
  std::mt19937_64 rng(1);
  const double rate = 50.0;
  const int reps = 400;
  double total = 0.0;
  double doubled = 0.0;
  for (int r = 0; r < reps; ++r) {
    total += static_cast<double>(nhpp::simulate_nhpp([&](double) { return rate; }, rate, 0.0, 10.0, rng).size());
    doubled +=
        static_cast<double>(nhpp::simulate_nhpp([&](double) { return 2.0 * rate; }, 2.0 * rate, 0.0, 10.0, rng).size());
  }
  const double mean = total / reps;
  CHECK(std::abs(mean - 500.0) < 4.0 * std::sqrt(500.0 / reps));
  const double ratio = doubled / total;
  CHECK(ratio >= 1.8);
  CHECK(ratio <= 2.2);
}

TEST_CASE("thinning edge cases") {
  std::mt19937_64 rng(2);
  CHECK(nhpp::simulate_nhpp([](double) { return 0.0; }, 0.0, 0.0, 10.0, rng).empty());
  CHECK_THROWS_AS(nhpp::simulate_nhpp([](double) { return 10.0; }, 5.0, 0.0, 10.0, rng), nhpp::BoundViolation);
  const auto events = nhpp::simulate_nhpp([](double t) { return 20.0 + 10.0 * std::sin(t); }, 30.0, 1.0, 4.0, rng);
  for (std::size_t i = 0; i < events.size(); ++i) {
    CHECK(events[i] >= 1.0);
    CHECK(events[i] < 4.0);
    if (i > 0) CHECK(events[i] >= events[i - 1]);
  }
}

TEST_CASE("intensity bound covers the intensity") {
  nhpp::SplineNhppConfig c;
  const auto lambda = nhpp::GaussianBumpIntensity::random(c);
  for (double t = 0.0; t <= c.horizon(); t += 0.01) {
    CHECK(lambda(t) >= lambda.floor());
    CHECK(lambda(t) <= lambda.upper_bound());
  }
}

TEST_CASE("hat integrals") {
  const double h = 0.125;
  for (std::size_t g : {0, 1, 5}) {
    CHECK(nhpp::hat_integral(g, h, -10.0, 10.0) == doctest::Approx(h));
    double numeric = 0.0;
    const double lo = 0.05;
    const double hi = 0.6;
    const int steps = 200000;
    for (int i = 0; i < steps; ++i) numeric += nhpp::hat(g, h, lo + (i + 0.5) * (hi - lo) / steps);
    numeric *= (hi - lo) / steps;
    CHECK(nhpp::hat_integral(g, h, lo, hi) == doctest::Approx(numeric).epsilon(1e-8));
  }
}

TEST_CASE("event batches partition the horizon") {
  nhpp::SplineNhppConfig c;
  c.frames = 6;
  const auto inst = nhpp::make_instance(c);
  const auto batches = nhpp::build_event_batches(c, inst.events);
  REQUIRE(batches.size() == c.frames);
  CHECK(batches.front().begin == 0.0);
  CHECK(batches.back().end == doctest::Approx(c.horizon()));
  std::size_t count = 0;
  for (std::size_t k = 0; k < batches.size(); ++k) {
    CHECK(batches[k].k == k + 1);
    if (k > 0) CHECK(batches[k].begin == batches[k - 1].end);
    count += batches[k].events.size();
  }
  CHECK(count == inst.events.size());
  CHECK_THROWS_AS(nhpp::build_event_batches(c, {c.horizon() + 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(nhpp::build_event_batches(c, {0.5, 0.2}), std::invalid_argument);
}

TEST_CASE("frame without events is linear") {
  nhpp::SplineNhppConfig c;
  c.frames = 3;
  const auto batches = nhpp::build_event_batches(c, {});
  const nhpp::NhppFrameLoss f(batches[1], false, {1.0, 100.0});
  std::mt19937_64 rng(3);
  const Vector prev = testing::random_vector(8, rng, 1.0, 5.0);
  const Vector cur = testing::random_vector(8, rng, 1.0, 5.0);
  Vector expected(16);
  expected << batches[1].b, batches[1].a;
  CHECK((f.gradient(prev, cur) - expected).norm() == 0.0);
  CHECK(f.hessian(prev, cur).joint().norm() == 0.0);
}

TEST_CASE("single event minimizer") {
  nhpp::EventBatch batch;
  batch.k = 1;
  batch.events = {0.5};
  batch.a = Vector::Constant(1, 2.0);
  batch.b = Vector::Zero(1);
  batch.c = Matrix::Constant(1, 1, 1.0);
  batch.d = Matrix::Zero(1, 1);
  const nhpp::NhppFrameLoss f(batch, false, {0.01, 10.0});
  const Vector x = tail_minimizer(f, Vector::Zero(1), Vector::Constant(1, 1.0));
  CHECK(x(0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(std::isinf(f.value(Vector::Zero(1), Vector::Constant(1, -1.0))));
}

TEST_CASE("NHPP loss derivatives") {
  nhpp::SplineNhppConfig c;
  c.frames = 5;
  const auto inst = nhpp::make_instance(c);
  std::mt19937_64 rng(4);
  for (const auto& f : inst.losses) {
    const Vector prev = testing::random_vector(8, rng, 40.0, 120.0);
    const Vector cur = testing::random_vector(8, rng, 40.0, 120.0);
    const auto e = testing::finite_difference_errors(*f, prev, cur);
    CHECK(e.gradient < 1e-6);
    CHECK(e.hessian < 1e-5);
  }
}

TEST_CASE("intensity estimate and L2 distance") {
  const double h = 0.125;
  const BlockVector x{Vector::Constant(8, 3.0), Vector::Constant(8, 3.0)};
  CHECK(nhpp::intensity_estimate(x, h, 0.7) == doctest::Approx(3.0));
  CHECK(nhpp::relative_l2_distance(x, x, h, 0.0, 1.8) == 0.0);
  BlockVector y = x;
  for (auto& b : y) b *= 1.1;
  CHECK(nhpp::relative_l2_distance(y, x, h, 0.2, 1.5) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("config validation rejects bad settings") {
  nhpp::SplineNhppConfig c;
  c.spline_order = 3;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  lot::LotConfig l;
  l.eta = 10.0;
  CHECK_THROWS_AS(l.validate(), std::invalid_argument);
}
