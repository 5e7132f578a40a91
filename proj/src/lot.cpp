#include "streamopt/testbeds/lot.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace streamopt::lot {

namespace {

constexpr double kPi = std::numbers::pi;

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

constexpr unsigned kGaussPoints = 20;

// Composite Gauss–Legendre on [begin, end] with `panels` equal panels.
void append_composite(QuadratureRule& rule, double begin, double end, std::size_t panels) {
  using Gauss = boost::math::quadrature::gauss<double, kGaussPoints>;
  const auto& x = Gauss::abscissa();
  const auto& w = Gauss::weights();
  const double width = (end - begin) / static_cast<double>(panels);
  for (std::size_t p = 0; p < panels; ++p) {
    const double mid = begin + (static_cast<double>(p) + 0.5) * width;
    const double half = 0.5 * width;
    for (std::size_t i = 0; i < x.size(); ++i) {
      rule.nodes.push_back(mid - half * x[i]);
      rule.weights.push_back(half * w[i]);
      if (x[i] != 0.0) {
        rule.nodes.push_back(mid + half * x[i]);
        rule.weights.push_back(half * w[i]);
      }
    }
  }
}

// Rule over [begin, end] with panel edges at every breakpoint inside.
QuadratureRule aligned_rule(double begin, double end, std::vector<double> breaks, std::size_t points) {
  breaks.push_back(begin);
  breaks.push_back(end);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::remove_if(breaks.begin(), breaks.end(), [&](double b) { return b < begin || b > end; }),
               breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  const double total_panels = std::max(1.0, static_cast<double>(points) / kGaussPoints);
  QuadratureRule rule;
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double share = (breaks[s + 1] - breaks[s]) / (end - begin);
    const auto panels = static_cast<std::size_t>(std::max(1.0, std::round(total_panels * share)));
    append_composite(rule, breaks[s], breaks[s + 1], panels);
  }
  return rule;
}

double bisect(const std::function<double(double)>& signal, double level, double lo, double hi, double tolerance) {
  double flo = signal(lo) - level;
  while (hi - lo > tolerance) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = signal(mid) - level;
    if (fmid == 0.0) return mid;
    if ((fmid < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fmid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> LotConfig::default_levels() {
  std::vector<double> levels;
  for (int j = 0; j < 16; ++j) levels.push_back(-2.5 + j * (5.0 / 16.0));
  return levels;
}

void LotConfig::validate() const {
  if (basis_per_frame < 1) throw std::invalid_argument("LOT needs at least one basis function per frame");
  if (!(eta > 0.0 && eta <= 0.5)) throw std::invalid_argument("LOT transition width must lie in (0, 1/2]");
  if (frames == 0) throw std::invalid_argument("LOT needs at least one frame");
  if (!(sample_end > sample_begin)) throw std::invalid_argument("LOT sample window is empty");
  if (2.0 * eta > frame_length()) throw std::invalid_argument("LOT transitions overlap within a frame");
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (!(levels[i] > levels[i - 1])) throw std::invalid_argument("LOT levels must be strictly increasing");
  if (!(sinc_spacing > 0.0) || !(sinc_end >= sinc_begin)) throw std::invalid_argument("LOT sinc grid is invalid");
  if (!(grid_spacing > 0.0) || !(bisection_tolerance > 0.0)) throw std::invalid_argument("LOT scan spacing is invalid");
  if (gamma < 0.0) throw std::invalid_argument("LOT gamma must be nonnegative");
}

SincSignal::SincSignal(std::vector<double> heights, double first_knot, double spacing)
    : heights_(std::move(heights)), first_(first_knot), spacing_(spacing) {}

SincSignal SincSignal::random(const LotConfig& config) {
  std::mt19937_64 rng(config.signal_seed);
  std::normal_distribution<double> normal;
  const auto count = static_cast<std::size_t>(std::llround((config.sinc_end - config.sinc_begin) / config.sinc_spacing)) + 1;
  std::vector<double> heights(count);
  for (auto& h : heights) h = normal(rng);
  return SincSignal(std::move(heights), config.sinc_begin, config.sinc_spacing);
}

double SincSignal::operator()(double t) const {
  // sinc((t − t_i)/s) = sin(π t/s)·(−1)^{i+i₀} / (π (t − t_i)/s) with t_i/s = i₀ + i.
  const double u = (t - first_) / spacing_;
  const double near = std::round(u);
  double direct = 0.0;
  double series = 0.0;
  for (std::size_t i = 0; i < heights_.size(); ++i) {
    const double d = u - static_cast<double>(i);
    if (std::abs(d) < 1e-6) {
      const double x = kPi * d;
      direct += heights_[i] * (x == 0.0 ? 1.0 : std::sin(x) / x);
    } else {
      series += ((i % 2 == 0) ? heights_[i] : -heights_[i]) / d;
    }
  }
  // sin(π d) = sin(π u)·(−1)^i for integer i.
  return direct + std::sin(kPi * (u - near)) * ((static_cast<long long>(near) % 2 == 0) ? 1.0 : -1.0) * series / kPi;
}

double rising_cut(double u) {
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return std::sin(0.25 * kPi * (1.0 + std::sin(0.5 * kPi * u)));
}

LotBasis::LotBasis(const LotConfig& config)
    : n_(config.basis_per_frame),
      frames_(config.frames),
      origin_(config.sample_begin),
      length_(config.frame_length()),
      eta_(config.eta) {
  config.validate();
}

double LotBasis::frame_start(std::size_t k) const { return origin_ + static_cast<double>(k) * length_; }

double LotBasis::window(std::size_t k, double t) const {
  const double a = frame_start(k);
  const double b = frame_start(k + 1);
  if (t <= a - eta_ || t >= b + eta_) return 0.0;
  if (t < a + eta_) return rising_cut((t - a) / eta_);
  if (t > b - eta_) return rising_cut((b - t) / eta_);
  return 1.0;
}

double LotBasis::value(std::size_t k, Index i, double t) const {
  const double w = window(k, t);
  if (w == 0.0) return 0.0;
  return w * std::sqrt(2.0 / length_) * std::cos(kPi * (static_cast<double>(i) + 0.5) * (t - frame_start(k)) / length_);
}

void LotBasis::evaluate(std::size_t k, double t, double* out) const {
  const double w = window(k, t);
  if (w == 0.0) {
    std::fill(out, out + n_, 0.0);
    return;
  }
  const double scale = w * std::sqrt(2.0 / length_);
  const double phase = kPi * (t - frame_start(k)) / length_;
  for (Index i = 0; i < n_; ++i) out[i] = scale * std::cos((static_cast<double>(i) + 0.5) * phase);
}

Vector LotBasis::evaluate(std::size_t k, double t) const {
  Vector row(n_);
  evaluate(k, t, row.data());
  return row;
}

CrossingScan find_crossings(const std::function<double(double)>& signal, double begin, double end,
                            const std::vector<double>& levels, double grid_spacing, double tolerance, Execution exec) {
  if (!(end > begin)) return {};
  const auto steps = static_cast<std::ptrdiff_t>(std::ceil((end - begin) / grid_spacing));
  std::vector<double> grid(static_cast<std::size_t>(steps) + 1);
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    grid[i] = std::min(end, begin + static_cast<double>(i) * grid_spacing);
  const auto count = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(static) if (exec == Execution::Parallel)
  for (std::ptrdiff_t i = 0; i < count; ++i) values[static_cast<std::size_t>(i)] = signal(grid[static_cast<std::size_t>(i)]);

  struct Bracket {
    double lo;
    double hi;
    double level;
  };
  std::vector<Bracket> brackets;
  CrossingScan scan;
  std::vector<Crossing> exact;
  for (const double level : levels) {
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      const double f0 = values[i] - level;
      const double f1 = values[i + 1] - level;
      if (f0 == 0.0) {
        const double before = i > 0 ? values[i - 1] - level : -f1;
        if ((before < 0.0) != (f1 < 0.0) && before != 0.0 && f1 != 0.0)
          exact.push_back({grid[i], level});
        else
          ++scan.tangencies;
      } else if ((f0 < 0.0) != (f1 < 0.0) && f1 != 0.0) {
        brackets.push_back({grid[i], grid[i + 1], level});
      }
    }
  }
  std::vector<Crossing> refined(brackets.size());
  const auto nb = static_cast<std::ptrdiff_t>(brackets.size());
#pragma omp parallel for schedule(dynamic, 64) if (exec == Execution::Parallel)
  for (std::ptrdiff_t b = 0; b < nb; ++b) {
    const auto& br = brackets[static_cast<std::size_t>(b)];
    refined[static_cast<std::size_t>(b)] = {bisect(signal, br.level, br.lo, br.hi, tolerance), br.level};
  }
  scan.crossings = std::move(refined);
  scan.crossings.insert(scan.crossings.end(), exact.begin(), exact.end());
  std::sort(scan.crossings.begin(), scan.crossings.end(), [](const Crossing& x, const Crossing& y) {
    return x.time < y.time || (x.time == y.time && x.level < y.level);
  });
  if (scan.tangencies > 0) spdlog::warn("skipped {} tangential level contacts", scan.tangencies);
  return scan;
}

std::vector<LsBatch> pack_batches(const LotConfig& config, const LotBasis& basis,
                                  const std::vector<Crossing>& crossings, Execution exec) {
  const std::size_t frames = config.frames;
  const Index n = basis.size();
  std::vector<std::size_t> owner(crossings.size());
  std::vector<std::size_t> counts(frames, 0);
  for (std::size_t m = 0; m < crossings.size(); ++m) {
    const double t = crossings[m].time;
    if (t < config.sample_begin || t > config.sample_end)
      throw std::invalid_argument("crossing outside the sample window");
    std::size_t k = 0;
    while (k + 1 < frames && t >= basis.frame_start(k + 1) - config.eta) ++k;
    owner[m] = k;
    ++counts[k];
  }
  std::vector<LsBatch> batches(frames);
  std::vector<std::size_t> offset(frames, 0);
  std::vector<std::size_t> row_of(crossings.size());
  for (std::size_t k = 0; k < frames; ++k) {
    const auto m = static_cast<Index>(counts[k]);
    batches[k].t = k;
    batches[k].y.resize(m);
    batches[k].a.resize(m, n);
    if (k > 0) batches[k].b.resize(m, n);
  }
  for (std::size_t m = 0; m < crossings.size(); ++m) row_of[m] = offset[owner[m]]++;
  const auto total = static_cast<std::ptrdiff_t>(crossings.size());
#pragma omp parallel for schedule(static) if (exec == Execution::Parallel)
  for (std::ptrdiff_t mi = 0; mi < total; ++mi) {
    const auto m = static_cast<std::size_t>(mi);
    const std::size_t k = owner[m];
    const auto r = static_cast<Index>(row_of[m]);
    LsBatch& batch = batches[k];
    batch.y(r) = crossings[m].level;
    basis.evaluate(k, crossings[m].time, batch.a.row(r).data());
    if (k > 0) basis.evaluate(k - 1, crossings[m].time, batch.b.row(r).data());
  }
  return batches;
}

LotStream generate_lot_stream(const LotConfig& config, Execution exec) {
  config.validate();
  SincSignal signal = SincSignal::random(config);
  CrossingScan scan = find_crossings(std::cref(signal), config.sample_begin, config.sample_end, config.levels,
                                     config.grid_spacing, config.bisection_tolerance, exec);
  const LotBasis basis(config);
  std::vector<LsBatch> batches = pack_batches(config, basis, scan.crossings, exec);
  spdlog::info("LOT stream: {} crossings over {} frames", scan.crossings.size(), config.frames);
  return {config, std::move(signal), std::move(scan), std::move(batches)};
}

namespace {

Matrix sample_frame(const LotBasis& basis, std::size_t k, const QuadratureRule& rule) {
  Matrix psi(basis.size(), static_cast<Index>(rule.nodes.size()));
  Vector row(basis.size());
  for (std::size_t p = 0; p < rule.nodes.size(); ++p) {
    basis.evaluate(k, rule.nodes[p], row.data());
    psi.col(static_cast<Index>(p)) = row * std::sqrt(rule.weights[p]);
  }
  return psi;
}

QuadratureRule frame_rule(const LotBasis& basis, std::size_t k, std::size_t points) {
  const double a = basis.frame_start(k);
  const double b = basis.frame_start(k + 1);
  const double eta = basis.eta();
  return aligned_rule(a - eta, b + eta, {a, a + eta, b - eta, b}, points);
}

QuadratureRule overlap_rule(const LotBasis& basis, std::size_t k, std::size_t points) {
  const double b = basis.frame_start(k + 1);
  const double eta = basis.eta();
  const double share = 2.0 * eta / (basis.frame_length() + 2.0 * eta);
  return aligned_rule(b - eta, b + eta, {b},
                      static_cast<std::size_t>(std::max(2.0 * kGaussPoints, share * static_cast<double>(points))));
}

}  // namespace

OrthonormalityCheck lot_basis_orthonormality(const LotConfig& config, std::size_t points_per_frame) {
  const LotBasis basis(config);
  const std::size_t frames = config.frames;
  std::vector<double> self(frames, 0.0);
  std::vector<double> cross(frames, 0.0);
  const auto count = static_cast<std::ptrdiff_t>(frames);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ki = 0; ki < count; ++ki) {
    const auto k = static_cast<std::size_t>(ki);
    const Matrix psi = sample_frame(basis, k, frame_rule(basis, k, points_per_frame));
    Matrix gram = psi * psi.transpose();
    gram.diagonal().array() -= 1.0;
    self[k] = gram.cwiseAbs().maxCoeff();
    if (k + 1 < frames) {
      const QuadratureRule rule = overlap_rule(basis, k, points_per_frame);
      const Matrix left = sample_frame(basis, k, rule);
      const Matrix right = sample_frame(basis, k + 1, rule);
      cross[k] = (left * right.transpose()).cwiseAbs().maxCoeff();
    }
  }
  OrthonormalityCheck out;
  out.max_self_deviation = *std::max_element(self.begin(), self.end());
  out.max_cross_magnitude = *std::max_element(cross.begin(), cross.end());
  out.max_deviation = std::max(out.max_self_deviation, out.max_cross_magnitude);
  return out;
}

double inner_product(const LotBasis& basis, std::size_t k1, Index i1, std::size_t k2, Index i2,
                     std::size_t points_per_frame) {
  const double lo = std::max(basis.support_begin(k1), basis.support_begin(k2));
  const double hi = std::min(basis.support_end(k1), basis.support_end(k2));
  if (!(hi > lo)) return 0.0;
  std::vector<double> breaks;
  for (const std::size_t k : {k1, k2}) {
    const double a = basis.frame_start(k);
    const double b = basis.frame_start(k + 1);
    breaks.insert(breaks.end(), {a - basis.eta(), a, a + basis.eta(), b - basis.eta(), b, b + basis.eta()});
  }
  const QuadratureRule rule = aligned_rule(lo, hi, breaks, points_per_frame);
  double sum = 0.0;
  for (std::size_t p = 0; p < rule.nodes.size(); ++p)
    sum += rule.weights[p] * basis.value(k1, i1, rule.nodes[p]) * basis.value(k2, i2, rule.nodes[p]);
  return sum;
}

}  // namespace streamopt::lot
