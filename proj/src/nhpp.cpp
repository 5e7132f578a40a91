#include "streamopt/testbeds/nhpp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace streamopt::nhpp {

double SplineNhppConfig::horizon() const {
  return static_cast<double>((frames + 1) * static_cast<std::size_t>(basis_per_frame) - 1) * knot_spacing();
}

void SplineNhppConfig::validate() const {
  if (spline_order != 2) throw std::invalid_argument("only order-2 (hat) B-splines are implemented");
  if (basis_per_frame < 1) throw std::invalid_argument("NHPP needs at least one spline per frame");
  if (!(frame_length > 0.0)) throw std::invalid_argument("NHPP frame length must be positive");
  if (frames == 0) throw std::invalid_argument("NHPP needs at least one frame");
  if (!(rate_floor > 0.0)) throw std::invalid_argument("NHPP rate floor must be positive");
  if (bumps_min < 0 || bumps_max < bumps_min) throw std::invalid_argument("NHPP bump counts are invalid");
  if (amplitude_min < 0.0 || amplitude_max < amplitude_min) throw std::invalid_argument("NHPP amplitudes are invalid");
  if (!(width_min > 0.0) || width_max < width_min) throw std::invalid_argument("NHPP widths are invalid");
  if (!(box_lo_factor > 0.0) || !(box_hi_factor > 0.0)) throw std::invalid_argument("NHPP box factors are invalid");
}

GaussianBumpIntensity::GaussianBumpIntensity(double floor, std::vector<Bump> bumps)
    : floor_(floor), bumps_(std::move(bumps)) {
  if (floor_ < 0.0) throw std::invalid_argument("intensity floor must be nonnegative");
  for (const auto& b : bumps_)
    if (b.amplitude < 0.0 || !(b.width > 0.0)) throw std::invalid_argument("bumps need positive amplitude and width");
}

GaussianBumpIntensity GaussianBumpIntensity::random(const SplineNhppConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.rate_seed);
  std::uniform_int_distribution<int> count(config.bumps_min, config.bumps_max);
  std::uniform_real_distribution<double> center(0.0, config.horizon());
  std::uniform_real_distribution<double> amplitude(config.amplitude_min, config.amplitude_max);
  std::uniform_real_distribution<double> width(config.width_min, config.width_max);
  std::vector<Bump> bumps(static_cast<std::size_t>(count(rng)));
  for (auto& b : bumps) {
    b.amplitude = amplitude(rng);
    b.center = center(rng);
    b.width = width(rng);
  }
  return GaussianBumpIntensity(config.rate_floor, std::move(bumps));
}

double GaussianBumpIntensity::operator()(double t) const {
  double rate = floor_;
  for (const auto& b : bumps_) {
    const double z = (t - b.center) / b.width;
    rate += b.amplitude * std::exp(-0.5 * z * z);
  }
  return rate;
}

double GaussianBumpIntensity::upper_bound() const {
  double bound = floor_;
  for (const auto& b : bumps_) bound += b.amplitude;
  return bound;
}

std::vector<double> simulate_nhpp(const std::function<double(double)>& rate, double rate_bound, double begin,
                                  double end, std::mt19937_64& rng) {
  if (rate_bound < 0.0) throw std::invalid_argument("rate bound must be nonnegative");
  std::vector<double> events;
  if (rate_bound == 0.0 || !(end > begin)) return events;
  std::exponential_distribution<double> gap(rate_bound);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (double t = begin + gap(rng); t < end; t += gap(rng)) {
    const double u = unif(rng);
    const double lambda = rate(t);
    if (lambda > rate_bound * (1.0 + 1e-12))
      throw BoundViolation("intensity " + std::to_string(lambda) + " exceeds the thinning bound " +
                           std::to_string(rate_bound) + " at t = " + std::to_string(t));
    if (u * rate_bound < lambda) events.push_back(t);
  }
  return events;
}

double hat(std::size_t g, double h, double t) {
  const double u = std::abs(t - static_cast<double>(g) * h) / h;
  return u < 1.0 ? 1.0 - u : 0.0;
}

double hat_integral(std::size_t g, double h, double lo, double hi) {
  const double c = static_cast<double>(g) * h;
  double total = 0.0;
  const double r0 = std::max(lo, c - h);
  const double r1 = std::min(hi, c);
  if (r1 > r0) total += ((r1 - c + h) * (r1 - c + h) - (r0 - c + h) * (r0 - c + h)) / (2.0 * h);
  const double f0 = std::max(lo, c);
  const double f1 = std::min(hi, c + h);
  if (f1 > f0) total += ((c + h - f0) * (c + h - f0) - (c + h - f1) * (c + h - f1)) / (2.0 * h);
  return total;
}

std::vector<EventBatch> build_event_batches(const SplineNhppConfig& config, const std::vector<double>& events) {
  config.validate();
  const double h = config.knot_spacing();
  const auto n = static_cast<std::size_t>(config.basis_per_frame);
  const double horizon = config.horizon();
  for (const double t : events)
    if (!(t >= 0.0 && t <= horizon)) throw std::invalid_argument("event at " + std::to_string(t) + " outside horizon");
  if (!std::is_sorted(events.begin(), events.end())) throw std::invalid_argument("events must be sorted");

  std::vector<EventBatch> batches;
  auto it = events.begin();
  for (std::size_t k = 1; k <= config.frames; ++k) {
    EventBatch batch;
    batch.k = k;
    batch.begin = k == 1 ? 0.0 : static_cast<double>(k * n - 1) * h;
    batch.end = static_cast<double>((k + 1) * n - 1) * h;
    const bool last = k == config.frames;
    while (it != events.end() && (*it < batch.end || (last && *it <= batch.end))) batch.events.push_back(*it++);
    batch.a.resize(static_cast<Index>(n));
    batch.b.resize(static_cast<Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      batch.a(static_cast<Index>(i)) = hat_integral(k * n + i, h, batch.begin, batch.end);
      batch.b(static_cast<Index>(i)) = hat_integral((k - 1) * n + i, h, batch.begin, batch.end);
    }
    const auto m = static_cast<Index>(batch.events.size());
    batch.c.resize(m, static_cast<Index>(n));
    batch.d.resize(m, static_cast<Index>(n));
    for (Index r = 0; r < m; ++r) {
      const double t = batch.events[static_cast<std::size_t>(r)];
      for (std::size_t i = 0; i < n; ++i) {
        batch.c(r, static_cast<Index>(i)) = hat(k * n + i, h, t);
        batch.d(r, static_cast<Index>(i)) = hat((k - 1) * n + i, h, t);
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

NhppFrameLoss::NhppFrameLoss(EventBatch batch, bool owns_prev, DomainBox box)
    : batch_(std::move(batch)), owns_prev_(owns_prev), box_(box) {
  if (!(box_.lo > 0.0) || !(box_.hi >= box_.lo)) throw std::invalid_argument("NHPP box needs 0 < lo ≤ hi");
  const Index n = batch_.a.size();
  Matrix outer = Matrix::Zero(2 * n, 2 * n);
  Vector w(2 * n);
  for (Index r = 0; r < batch_.c.rows(); ++r) {
    w << batch_.d.row(r).transpose(), batch_.c.row(r).transpose();
    const double mass = w.sum();
    if (mass > 0.0) outer += w * w.transpose() / (mass * mass);
  }
  const Matrix lower = outer / (box_.hi * box_.hi);
  const Matrix upper = outer / (box_.lo * box_.lo);
  const auto range = symmetric_eigen_range(upper);
  const double mu = owns_prev_ ? symmetric_eigen_range(lower).min
                               : symmetric_eigen_range(trailing_schur_complement(lower, n)).min;
  curvature_ = {std::max(0.0, mu), std::max(0.0, range.max)};
}

Vector NhppFrameLoss::rates(const Vector& prev, const Vector& cur) const { return batch_.c * cur + batch_.d * prev; }

bool NhppFrameLoss::in_domain(const Vector& prev, const Vector& cur) const {
  return batch_.c.rows() == 0 || (rates(prev, cur).array() > 0.0).all();
}

double NhppFrameLoss::value(const Vector& prev, const Vector& cur) const {
  const Vector lambda = rates(prev, cur);
  if (lambda.size() > 0 && (lambda.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
  return batch_.a.dot(cur) + batch_.b.dot(prev) - lambda.array().log().sum();
}

Vector NhppFrameLoss::gradient(const Vector& prev, const Vector& cur) const {
  const Index n = dim();
  const Vector inv = rates(prev, cur).cwiseInverse();
  Vector g(2 * n);
  g.head(n) = batch_.b - batch_.d.transpose() * inv;
  g.tail(n) = batch_.a - batch_.c.transpose() * inv;
  return g;
}

HessianBlocks NhppFrameLoss::hessian(const Vector& prev, const Vector& cur) const {
  const Vector weight = rates(prev, cur).array().square().inverse();
  const Matrix wd = weight.asDiagonal() * batch_.d;
  const Matrix wc = weight.asDiagonal() * batch_.c;
  return {batch_.d.transpose() * wd, batch_.c.transpose() * wd, batch_.c.transpose() * wc};
}

Vector NhppFrameLoss::interior_point() const {
  const double span = batch_.end - batch_.begin;
  const double mean = span > 0.0 ? static_cast<double>(batch_.events.size()) / span : 0.0;
  return Vector::Constant(dim(), std::max(mean, 1.0));
}

std::vector<FrameLossPtr> build_nhpp_losses(const SplineNhppConfig& config, const std::vector<double>& events) {
  const GaussianBumpIntensity intensity = GaussianBumpIntensity::random(config);
  const DomainBox box{config.box_lo_factor * config.rate_floor, config.box_hi_factor * intensity.upper_bound()};
  std::vector<FrameLossPtr> losses;
  for (auto& batch : build_event_batches(config, events)) {
    const bool first = batch.k == 1;
    losses.push_back(std::make_shared<NhppFrameLoss>(std::move(batch), first, box));
  }
  return losses;
}

NhppInstance make_instance(const SplineNhppConfig& config) {
  config.validate();
  GaussianBumpIntensity intensity = GaussianBumpIntensity::random(config);
  std::mt19937_64 rng(config.event_seed);
  std::vector<double> events = simulate_nhpp(std::cref(intensity), intensity.upper_bound(), 0.0, config.horizon(), rng);
  std::vector<FrameLossPtr> losses = build_nhpp_losses(config, events);
  return {config, std::move(intensity), std::move(events), std::move(losses)};
}

double intensity_estimate(const BlockVector& coefficients, double h, double t) {
  if (coefficients.empty()) return 0.0;
  const Index n = coefficients.front().size();
  const double u = t / h;
  if (u < 0.0) return 0.0;
  const auto g = static_cast<std::size_t>(std::floor(u));
  const double frac = u - static_cast<double>(g);
  auto coef = [&](std::size_t idx) -> double {
    const std::size_t frame = idx / static_cast<std::size_t>(n);
    if (frame >= coefficients.size()) return 0.0;
    return coefficients[frame](static_cast<Index>(idx % static_cast<std::size_t>(n)));
  };
  return (1.0 - frac) * coef(g) + frac * coef(g + 1);
}

double relative_l2_distance(const BlockVector& estimate, const BlockVector& reference, double h, double begin,
                            double end) {
  // Both are piecewise linear on the knots, so the squared integral is exact
  // per knot interval: h(e₀² + e₀e₁ + e₁²)/3.
  if (estimate.size() != reference.size()) throw std::invalid_argument("coefficient block counts differ");
  double diff = 0.0;
  double ref = 0.0;
  const auto first = static_cast<std::size_t>(std::max(0.0, std::floor(begin / h)));
  const auto last = static_cast<std::size_t>(std::ceil(end / h));
  for (std::size_t g = first; g < last; ++g) {
    const double lo = std::max(begin, static_cast<double>(g) * h);
    const double hi = std::min(end, static_cast<double>(g + 1) * h);
    if (!(hi > lo)) continue;
    const double d0 = intensity_estimate(estimate, h, lo) - intensity_estimate(reference, h, lo);
    const double d1 = intensity_estimate(estimate, h, hi) - intensity_estimate(reference, h, hi);
    const double r0 = intensity_estimate(reference, h, lo);
    const double r1 = intensity_estimate(reference, h, hi);
    diff += (hi - lo) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
    ref += (hi - lo) * (r0 * r0 + r0 * r1 + r1 * r1) / 3.0;
  }
  return ref > 0.0 ? std::sqrt(diff / ref) : std::sqrt(diff);
}

}  // namespace streamopt::nhpp
