#include "streamopt/blocktridiag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace streamopt {

namespace {

std::uint64_t cube(Index n) { return static_cast<std::uint64_t>(n) * n * n; }
std::uint64_t square(Index n) { return static_cast<std::uint64_t>(n) * n; }

std::string breakdown_message(std::size_t frame, double condition) {
  std::ostringstream out;
  out << "factorization breakdown at frame " << frame << " (condition estimate " << condition << ")";
  return out.str();
}

}  // namespace

void BlockTridiagSystem::validate(bool require_rhs) const {
  if (n <= 0) throw std::invalid_argument("block size must be positive");
  if (diag.empty()) throw std::invalid_argument("system has no frames");
  if (offdiag.size() + 1 != diag.size())
    throw std::invalid_argument("offdiag must have one block fewer than diag");
  if (require_rhs && rhs.size() != diag.size())
    throw std::invalid_argument("rhs must have one block per frame");
  for (std::size_t t = 0; t < diag.size(); ++t) {
    if (diag[t].rows() != n || diag[t].cols() != n)
      throw std::invalid_argument("diagonal block " + std::to_string(t) + " has wrong shape");
    if (relative_asymmetry(diag[t]) > 1e-12)
      throw std::invalid_argument("diagonal block " + std::to_string(t) + " is not symmetric");
  }
  for (std::size_t t = 0; t < offdiag.size(); ++t)
    if (offdiag[t].rows() != n || offdiag[t].cols() != n)
      throw std::invalid_argument("off-diagonal block " + std::to_string(t) + " has wrong shape");
  if (require_rhs)
    for (std::size_t t = 0; t < rhs.size(); ++t)
      if (rhs[t].size() != n) throw std::invalid_argument("rhs block " + std::to_string(t) + " has wrong size");
}

Matrix assemble_dense(const BlockTridiagSystem& system) {
  system.validate(false);
  const Index n = system.n;
  const Index total = n * static_cast<Index>(system.frames());
  Matrix dense = Matrix::Zero(total, total);
  for (std::size_t t = 0; t < system.frames(); ++t) {
    const Index o = n * static_cast<Index>(t);
    dense.block(o, o, n, n) = system.diag[t];
    if (t + 1 < system.frames()) {
      dense.block(o + n, o, n, n) = system.offdiag[t];
      dense.block(o, o + n, n, n) = system.offdiag[t].transpose();
    }
  }
  return dense;
}

BlockVector multiply(const BlockTridiagSystem& system, const BlockVector& x) {
  system.validate(false);
  if (x.size() != system.frames()) throw std::invalid_argument("multiply: block count mismatch");
  BlockVector out(system.frames());
  for (std::size_t t = 0; t < system.frames(); ++t) {
    out[t] = system.diag[t] * x[t];
    if (t > 0) out[t] += system.offdiag[t - 1] * x[t - 1];
    if (t + 1 < system.frames()) out[t] += system.offdiag[t].transpose() * x[t + 1];
  }
  return out;
}

BlockVector solve_dense(const BlockTridiagSystem& system) {
  system.validate();
  const Matrix dense = assemble_dense(system);
  Eigen::FullPivLU<Matrix> lu(dense);
  if (!lu.isInvertible()) throw std::runtime_error("solve_dense: matrix is singular");
  return unstack(lu.solve(stack(system.rhs)), system.n);
}

BlockVector solve_block_tridiagonal(const BlockTridiagSystem& system) {
  system.validate();
  LuStreamCache cache(system.n);
  cache.seed(system.diag[0]);
  cache.forward(system.rhs[0]);
  for (std::size_t t = 1; t < system.frames(); ++t) {
    cache.append(system.diag[t], system.offdiag[t - 1]);
    cache.forward(system.rhs[t], system.offdiag[t - 1]);
  }
  return cache.backward_sweep();
}

FactorizationBreakdown::FactorizationBreakdown(std::size_t frame, double condition)
    : std::runtime_error(breakdown_message(frame, condition)), frame_(frame), condition_(condition) {}

LuStreamCache::LuStreamCache(Index n, double condition_cap) : n_(n), condition_cap_(condition_cap) {
  if (n <= 0) throw std::invalid_argument("block size must be positive");
}

void LuStreamCache::check_block(const Matrix& m, const char* what) const {
  if (m.rows() != n_ || m.cols() != n_) throw std::invalid_argument(std::string(what) + " has wrong shape");
}

LuStreamCache::Entry& LuStreamCache::entry(std::size_t frame) {
  if (frame < base_ || frame >= end_frame())
    throw std::out_of_range("frame " + std::to_string(frame) + " is not cached");
  return entries_[frame - base_];
}

const LuStreamCache::Entry& LuStreamCache::entry(std::size_t frame) const {
  if (frame < base_ || frame >= end_frame())
    throw std::out_of_range("frame " + std::to_string(frame) + " is not cached");
  return entries_[frame - base_];
}

const Eigen::PartialPivLU<Matrix>& LuStreamCache::factor(std::size_t frame) const {
  const Entry& e = entry(frame);
  if (!e.lu) {
    auto& mut = const_cast<Entry&>(e);
    // Symmetric Jacobi scaling: barrier terms near an active bound inflate
    // single diagonal entries without making the pivot singular.
    const Vector d = e.q.diagonal();
    if ((d.array() > 0.0).all() && d.allFinite())
      mut.scale = d.cwiseSqrt().cwiseInverse();
    else
      mut.scale = Vector::Ones(n_);
    mut.lu.emplace(mut.scale.asDiagonal() * e.q * mut.scale.asDiagonal());
    flops_ += 2 * cube(n_) / 3;
    const double rcond = mut.lu->rcond();
    mut.condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (!e.q.allFinite()) mut.condition = std::numeric_limits<double>::infinity();
  }
  if (!(e.condition <= condition_cap_)) throw FactorizationBreakdown(frame, e.condition);
  return *e.lu;
}

Matrix LuStreamCache::solve_factored(std::size_t frame, const Matrix& rhs) const {
  const auto& lu = factor(frame);
  const Vector& s = entry(frame).scale;
  return s.asDiagonal() * lu.solve(s.asDiagonal() * rhs);
}

void LuStreamCache::seed(const Matrix& h0, std::size_t frame) {
  check_block(h0, "seed block");
  entries_.clear();
  base_ = frame;
  chain_start_ = frame;
  entries_.push_back(Entry{h0, std::nullopt, 0.0, std::nullopt, std::nullopt});
}

void LuStreamCache::append(const Matrix& h, const Matrix& e_prev) {
  if (empty()) throw std::logic_error("append on an unseeded cache");
  check_block(h, "diagonal block");
  check_block(e_prev, "coupling block");
  const std::size_t prev = end_frame() - 1;
  Matrix u = solve_factored(prev, e_prev.transpose());
  flops_ += 2 * cube(n_);
  Matrix q = h - e_prev * u;
  flops_ += 2 * cube(n_);
  entry(prev).u = std::move(u);
  entries_.push_back(Entry{std::move(q), std::nullopt, 0.0, std::nullopt, std::nullopt});
}

void LuStreamCache::amend_last_pivot(const Matrix& delta) {
  if (empty()) throw std::logic_error("amend on an empty cache");
  check_block(delta, "pivot update");
  Entry& e = entries_.back();
  e.q += delta;
  e.lu.reset();
  e.condition = 0.0;
  e.v.reset();
}

void LuStreamCache::forward(const Vector& g) { forward_at(end_frame() - 1, g, nullptr); }

void LuStreamCache::forward(const Vector& g, const Matrix& e_prev) { forward_at(end_frame() - 1, g, &e_prev); }

void LuStreamCache::forward_at(std::size_t frame, const Vector& g, const Matrix* e_prev) {
  if (empty()) throw std::logic_error("forward on an empty cache");
  if (g.size() != n_) throw std::invalid_argument("rhs block has wrong size");
  Vector rhs = g;
  if (frame == chain_start_) {
    if (e_prev != nullptr) throw std::invalid_argument("chain start frame takes no coupling block");
  } else {
    if (e_prev == nullptr) throw std::invalid_argument("coupling block required after the chain start");
    check_block(*e_prev, "coupling block");
    const Entry& before = entry(frame - 1);
    if (!before.v) throw std::logic_error("forward variable of the previous frame is missing");
    rhs -= *e_prev * *before.v;
    flops_ += 2 * square(n_);
  }
  Vector v = solve_factored(frame, rhs);
  flops_ += 2 * square(n_);
  entry(frame).v = std::move(v);
}

BlockVector LuStreamCache::backward_sweep(std::size_t depth) const {
  if (depth == 0 || depth > size())
    throw std::invalid_argument("backward sweep depth " + std::to_string(depth) + " outside [1, " +
                                std::to_string(size()) + "]");
  BlockVector out(depth);
  const std::size_t last = end_frame() - 1;
  const Entry& tail = entry(last);
  if (!tail.v) throw std::logic_error("forward sweep incomplete at the last frame");
  out[depth - 1] = *tail.v;
  for (std::size_t k = 1; k < depth; ++k) {
    const Entry& e = entry(last - k);
    if (!e.v || !e.u) throw std::logic_error("forward sweep incomplete at frame " + std::to_string(last - k));
    out[depth - 1 - k] = *e.v - *e.u * out[depth - k];
    flops_ += 2 * square(n_);
  }
  return out;
}

void LuStreamCache::retain_last(std::size_t count) {
  while (entries_.size() > count) {
    entries_.pop_front();
    ++base_;
  }
}

void LuStreamCache::truncate_after(std::size_t frame) {
  while (!entries_.empty() && end_frame() - 1 > frame) entries_.pop_back();
  if (!entries_.empty()) entries_.back().u.reset();
}

void LuStreamCache::rebase(std::size_t frame) {
  if (frame < base_ || frame >= end_frame()) throw std::out_of_range("rebase frame is not cached");
  while (base_ < frame) {
    entries_.pop_front();
    ++base_;
  }
  chain_start_ = frame;
  for (auto& e : entries_) e.v.reset();
}

const Matrix& LuStreamCache::pivot(std::size_t frame) const { return entry(frame).q; }

const Matrix& LuStreamCache::upper(std::size_t frame) const {
  const Entry& e = entry(frame);
  if (!e.u) throw std::out_of_range("frame " + std::to_string(frame) + " has no upper block");
  return *e.u;
}

const Vector& LuStreamCache::forward_variable(std::size_t frame) const {
  const Entry& e = entry(frame);
  if (!e.v) throw std::out_of_range("frame " + std::to_string(frame) + " has no forward variable");
  return *e.v;
}

bool LuStreamCache::has_upper(std::size_t frame) const { return entry(frame).u.has_value(); }

bool LuStreamCache::has_forward_variable(std::size_t frame) const { return entry(frame).v.has_value(); }

Vector LuStreamCache::solve_pivot(std::size_t frame, const Vector& rhs) const {
  flops_ += 2 * square(n_);
  return solve_factored(frame, rhs);
}

double LuStreamCache::pivot_condition(std::size_t frame) const {
  factor(frame);
  return entry(frame).condition;
}

std::optional<double> limiting_epsilon(double delta, double theta) {
  if (!(theta <= 0.5 * (1.0 - delta)) || delta < 0.0 || theta < 0.0) return std::nullopt;
  const double half_gap = 0.5 * (1.0 - delta);
  const double disc = std::max(0.0, half_gap * half_gap - theta * theta);
  return 0.5 * (1.0 + delta) - std::sqrt(disc);
}

ConditioningReport conditioning_from_constants(double kappa, double delta, double theta) {
  ConditioningReport r;
  r.kappa = kappa;
  r.delta = delta;
  r.theta = theta;
  r.dominant = theta < 0.5 * (1.0 - delta);
  r.eps_star = limiting_epsilon(delta, theta);
  if (r.eps_star && *r.eps_star < 1.0) r.rho = theta / (1.0 - *r.eps_star);
  return r;
}

ConditioningReport conditioning_from_blocks(std::span<const Matrix> diag, std::span<const Matrix> offdiag) {
  if (diag.empty()) throw std::invalid_argument("conditioning report needs at least one block");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& h : diag) {
    const auto range = symmetric_eigen_range(0.5 * (h + h.transpose()));
    lo = std::min(lo, range.min);
    hi = std::max(hi, range.max);
  }
  const double kappa = 0.5 * (lo + hi);
  double delta = 0.0;
  double theta = 0.0;
  if (kappa > 0.0) {
    for (const auto& h : diag) {
      Matrix scaled = h / kappa;
      scaled.diagonal().array() -= 1.0;
      delta = std::max(delta, spectral_norm(scaled));
    }
    for (const auto& e : offdiag) theta = std::max(theta, spectral_norm(e) / kappa);
  } else {
    delta = std::numeric_limits<double>::infinity();
    theta = std::numeric_limits<double>::infinity();
  }
  return conditioning_from_constants(kappa, delta, theta);
}

ConditioningReport conditioning_report(const BlockTridiagSystem& system) {
  system.validate(false);
  return conditioning_from_blocks(system.diag, system.offdiag);
}

EpsilonIteration iterate_epsilon_recursion(double delta, double theta, double tolerance, int max_iterations) {
  EpsilonIteration out;
  double eps = delta;
  for (int i = 1; i <= max_iterations; ++i) {
    if (eps >= 1.0) {
      out.limit = eps;
      out.iterations = i;
      return out;
    }
    const double next = delta + theta * theta / (1.0 - eps);
    if (next < eps) out.monotone = false;
    const double change = std::abs(next - eps);
    eps = next;
    if (change <= tolerance) {
      out.converged = true;
      out.iterations = i;
      break;
    }
    out.iterations = i;
  }
  out.limit = eps;
  return out;
}

double contractive_bound(double a, double b, std::size_t t) {
  if (a == 1.0) return b * static_cast<double>(t + 1);
  return b * (1.0 - std::pow(a, static_cast<double>(t + 1))) / (1.0 - a);
}

double solution_block_bound(const ConditioningReport& report, double max_rhs_norm) {
  if (!report.eps_star || !report.rho || *report.rho >= 1.0 || report.kappa <= 0.0)
    return std::numeric_limits<double>::infinity();
  const double eps = *report.eps_star;
  const double rho = *report.rho;
  return max_rhs_norm / (report.kappa * (1.0 - eps) * (1.0 - rho) * (1.0 - rho));
}

SensitivityCheck first_block_sensitivity(const BlockTridiagSystem& system) {
  system.validate();
  if (system.frames() < 2) throw std::invalid_argument("sensitivity check needs at least two frames");
  for (std::size_t t = 1; t < system.rhs.size(); ++t)
    if (system.rhs[t].cwiseAbs().maxCoeff() != 0.0)
      throw std::invalid_argument("rhs must vanish outside the first block");

  const Index n = system.n;
  const Matrix dense = assemble_dense(system);
  const Index tail = dense.rows() - n;
  const Matrix border = dense.bottomLeftCorner(tail, n);
  const Matrix trailing = dense.bottomRightCorner(tail, tail);
  Eigen::FullPivLU<Matrix> trailing_lu(trailing);
  if (!trailing_lu.isInvertible()) throw std::runtime_error("trailing block of the bordered system is singular");

  SensitivityCheck out;
  out.solution = solve_dense(system);
  const Vector& h0 = out.solution.front();
  const Vector y = -trailing_lu.solve(border * h0);
  Eigen::JacobiSVD<Matrix> svd(trailing);
  const auto& sv = svd.singularValues();
  out.alpha = spectral_norm(border);
  out.beta = 1.0 / sv(sv.size() - 1);
  out.h0_norm = h0.norm();
  out.tail_norm = y.norm();
  out.ratio = out.h0_norm > 0.0 ? out.tail_norm / out.h0_norm : 0.0;
  const double bound = out.alpha * out.beta;
  out.within_bound = out.ratio <= bound * (1.0 + 1e-9) + 1e-15;
  for (Index t = 0; t < tail / n; ++t) {
    const double block = y.segment(t * n, n).norm();
    if (block > bound * out.h0_norm * (1.0 + 1e-9) + 1e-15) out.within_bound = false;
  }
  return out;
}

}  // namespace streamopt
