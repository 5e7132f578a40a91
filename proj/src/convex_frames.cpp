#include "streamopt/convex_frames.hpp"

#include "streamopt/newton.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace streamopt {

namespace {

CurvatureBounds curvature_of(const Matrix& joint, Index n, bool owns_prev) {
  const auto full = symmetric_eigen_range(joint);
  const double mu = owns_prev ? full.min : symmetric_eigen_range(trailing_schur_complement(joint, n)).min;
  return {std::max(mu, 0.0), full.max};
}

HessianBlocks split(const Matrix& joint, Index n) {
  return {joint.topLeftCorner(n, n), joint.bottomLeftCorner(n, n), joint.bottomRightCorner(n, n)};
}

double phi_rounding(double phi) { return 64.0 * std::numeric_limits<double>::epsilon() * std::abs(phi); }

}  // namespace

Matrix HessianBlocks::joint() const {
  const Index n = cur_cur.rows();
  Matrix j(2 * n, 2 * n);
  j.topLeftCorner(n, n) = prev_prev;
  j.bottomLeftCorner(n, n) = cross;
  j.topRightCorner(n, n) = cross.transpose();
  j.bottomRightCorner(n, n) = cur_cur;
  return j;
}

bool FrameLoss::in_domain(const Vector& prev, const Vector& cur) const { return std::isfinite(value(prev, cur)); }

QuadraticFrameLoss::QuadraticFrameLoss(const LsBatch& cur, double gamma, const LsBatch* leading)
    : a_(cur.a), b_(cur.b), y_(cur.y), gamma_(gamma) {
  const Index n = a_.cols();
  if (cur.t == 0) throw std::invalid_argument("a frame loss starts at t = 1");
  cur.validate(n);
  if (leading) {
    leading->validate(n);
    lead_ = Lead{leading->a, leading->y};
  }
  hessian_.cur_cur = 2.0 * a_.transpose() * a_;
  hessian_.cur_cur.diagonal().array() += 2.0 * gamma_;
  hessian_.cross = 2.0 * a_.transpose() * b_;
  hessian_.prev_prev = 2.0 * b_.transpose() * b_;
  if (lead_) {
    hessian_.prev_prev += 2.0 * lead_->a.transpose() * lead_->a;
    hessian_.prev_prev.diagonal().array() += 2.0 * gamma_;
  }
  curvature_ = curvature_of(hessian_.joint(), n, owns_prev());
}

double QuadraticFrameLoss::value(const Vector& prev, const Vector& cur) const {
  double v = (b_ * prev + a_ * cur - y_).squaredNorm() + gamma_ * cur.squaredNorm();
  if (lead_) v += (lead_->a * prev - lead_->y).squaredNorm() + gamma_ * prev.squaredNorm();
  return v;
}

Vector QuadraticFrameLoss::gradient(const Vector& prev, const Vector& cur) const {
  const Index n = dim();
  const Vector r = b_ * prev + a_ * cur - y_;
  Vector g(2 * n);
  g.head(n) = 2.0 * b_.transpose() * r;
  g.tail(n) = 2.0 * a_.transpose() * r + 2.0 * gamma_ * cur;
  if (lead_) g.head(n) += 2.0 * lead_->a.transpose() * (lead_->a * prev - lead_->y) + 2.0 * gamma_ * prev;
  return g;
}

HessianBlocks QuadraticFrameLoss::hessian(const Vector&, const Vector&) const { return hessian_; }

StackedQuadraticLoss::StackedQuadraticLoss(Matrix p, Vector q, bool owns_prev, double constant)
    : p_(std::move(p)), q_(std::move(q)), c_(constant), owns_prev_(owns_prev) {
  if (q_.size() % 2 != 0 || p_.rows() != q_.size() || p_.cols() != q_.size())
    throw std::invalid_argument("stacked quadratic needs a 2n×2n matrix and a 2n vector");
  if (relative_asymmetry(p_) > 1e-12) throw std::invalid_argument("stacked quadratic matrix must be symmetric");
  curvature_ = curvature_of(p_, dim(), owns_prev_);
}

double StackedQuadraticLoss::value(const Vector& prev, const Vector& cur) const {
  Vector z(q_.size());
  z << prev, cur;
  return 0.5 * z.dot(p_ * z) + q_.dot(z) + c_;
}

Vector StackedQuadraticLoss::gradient(const Vector& prev, const Vector& cur) const {
  Vector z(q_.size());
  z << prev, cur;
  return p_ * z + q_;
}

HessianBlocks StackedQuadraticLoss::hessian(const Vector&, const Vector&) const { return split(p_, dim()); }

LogBarrierLoss::LogBarrierLoss(FrameLossPtr base, double weight, bool barrier_prev)
    : base_(std::move(base)), weight_(weight) {
  if (!base_) throw std::invalid_argument("barrier needs a base loss");
  barrier_prev_ = barrier_prev || base_->owns_prev();
  if (!(weight_ > 0.0)) throw std::invalid_argument("barrier weight must be positive");
}

Vector LogBarrierLoss::interior_point() const {
  Vector p = base_->interior_point();
  if ((p.array() > 0.0).all()) return p;
  return Vector::Ones(dim());
}

bool LogBarrierLoss::in_domain(const Vector& prev, const Vector& cur) const {
  if ((cur.array() <= 0.0).any()) return false;
  if (barrier_prev_ && (prev.array() <= 0.0).any()) return false;
  return base_->in_domain(prev, cur);
}

double LogBarrierLoss::value(const Vector& prev, const Vector& cur) const {
  if (!in_domain(prev, cur)) return std::numeric_limits<double>::infinity();
  double v = base_->value(prev, cur) - weight_ * cur.array().log().sum();
  if (barrier_prev_) v -= weight_ * prev.array().log().sum();
  return v;
}

Vector LogBarrierLoss::gradient(const Vector& prev, const Vector& cur) const {
  const Index n = dim();
  Vector g = base_->gradient(prev, cur);
  g.tail(n).array() -= weight_ / cur.array();
  if (barrier_prev_) g.head(n).array() -= weight_ / prev.array();
  return g;
}

HessianBlocks LogBarrierLoss::hessian(const Vector& prev, const Vector& cur) const {
  HessianBlocks h = base_->hessian(prev, cur);
  h.cur_cur.diagonal().array() += weight_ / cur.array().square();
  if (barrier_prev_) h.prev_prev.diagonal().array() += weight_ / prev.array().square();
  return h;
}

CurvatureBounds LogBarrierLoss::curvature() const {
  CurvatureBounds c = base_->curvature();
  if (const auto box = base_->domain_box()) {
    c.mu += weight_ / (box->hi * box->hi);
    c.lipschitz += weight_ / (box->lo * box->lo);
  } else {
    c.lipschitz = std::numeric_limits<double>::infinity();
  }
  return c;
}

ChainObjective::ChainObjective(std::vector<FrameLossPtr> losses, std::optional<Vector> boundary)
    : losses_(std::move(losses)), boundary_(std::move(boundary)) {
  if (losses_.empty() && !boundary_) throw std::invalid_argument("objective needs at least one loss");
  if (losses_.empty()) throw std::invalid_argument("window needs at least one loss");
  n_ = losses_.front()->dim();
  for (const auto& f : losses_)
    if (!f || f->dim() != n_) throw std::invalid_argument("all losses must share the block size");
  if (boundary_ && boundary_->size() != n_) throw std::invalid_argument("boundary has wrong size");
}

void ChainObjective::check(const BlockVector& y) const {
  if (y.size() != blocks())
    throw std::invalid_argument("expected " + std::to_string(blocks()) + " blocks, got " + std::to_string(y.size()));
  for (const auto& b : y)
    if (b.size() != n_) throw std::invalid_argument("block has wrong size");
}

const Vector& ChainObjective::prev_of(const BlockVector& y, std::size_t i) const {
  if (boundary_) return i == 0 ? *boundary_ : y[i - 1];
  return y[i];
}

const Vector& ChainObjective::cur_of(const BlockVector& y, std::size_t i) const { return boundary_ ? y[i] : y[i + 1]; }

double ChainObjective::value(const BlockVector& y) const {
  check(y);
  double total = 0.0;
  for (std::size_t i = 0; i < losses_.size(); ++i) total += losses_[i]->value(prev_of(y, i), cur_of(y, i));
  return total;
}

bool ChainObjective::in_domain(const BlockVector& y) const {
  check(y);
  for (std::size_t i = 0; i < losses_.size(); ++i)
    if (!losses_[i]->in_domain(prev_of(y, i), cur_of(y, i))) return false;
  return true;
}

BlockVector ChainObjective::gradient(const BlockVector& y, Execution exec) const {
  check(y);
  const auto count = static_cast<std::ptrdiff_t>(losses_.size());
  std::vector<Vector> parts(losses_.size());
#pragma omp parallel for schedule(static) if (exec == Execution::Parallel)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto k = static_cast<std::size_t>(i);
    parts[k] = losses_[k]->gradient(prev_of(y, k), cur_of(y, k));
  }
  const std::size_t shift = boundary_ ? 1 : 0;
  BlockVector g(blocks(), Vector::Zero(n_));
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (k + 1 > shift) g[k - shift] += parts[k].head(n_);
    g[k + 1 - shift] += parts[k].tail(n_);
  }
  return g;
}

BlockTridiagSystem ChainObjective::hessian(const BlockVector& y, Execution exec) const {
  check(y);
  const auto count = static_cast<std::ptrdiff_t>(losses_.size());
  std::vector<HessianBlocks> parts(losses_.size());
#pragma omp parallel for schedule(static) if (exec == Execution::Parallel)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto k = static_cast<std::size_t>(i);
    parts[k] = losses_[k]->hessian(prev_of(y, k), cur_of(y, k));
  }
  const std::size_t shift = boundary_ ? 1 : 0;
  BlockTridiagSystem h;
  h.n = n_;
  h.diag.assign(blocks(), Matrix::Zero(n_, n_));
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (k + 1 > shift) {
      h.diag[k - shift] += parts[k].prev_prev;
      h.offdiag.push_back(parts[k].cross);
    }
    h.diag[k + 1 - shift] += parts[k].cur_cur;
  }
  return h;
}

BlockTridiagSystem ChainObjective::newton_system(const BlockVector& y, Execution exec) const {
  BlockTridiagSystem h = hessian(y, exec);
  h.rhs = gradient(y, exec);
  return h;
}

BlockVector aggregate_grad_reference(const ChainObjective& obj, const BlockVector& y) {
  const Index n = obj.n();
  BlockVector g(obj.blocks(), Vector::Zero(n));
  const bool bounded = obj.boundary().has_value();
  for (std::size_t k = 0; k < obj.losses(); ++k) {
    const auto& f = obj.loss_handles()[k];
    if (bounded) {
      const Vector& prev = k == 0 ? *obj.boundary() : y[k - 1];
      const Vector grad = f->gradient(prev, y[k]);
      if (k > 0) g[k - 1] += grad.head(n);
      g[k] += grad.tail(n);
    } else {
      const Vector grad = f->gradient(y[k], y[k + 1]);
      g[k] += grad.head(n);
      g[k + 1] += grad.tail(n);
    }
  }
  return g;
}

BlockTridiagSystem aggregate_hessian_reference(const ChainObjective& obj, const BlockVector& y) {
  const Index n = obj.n();
  BlockTridiagSystem h;
  h.n = n;
  h.diag.assign(obj.blocks(), Matrix::Zero(n, n));
  const bool bounded = obj.boundary().has_value();
  for (std::size_t k = 0; k < obj.losses(); ++k) {
    const auto& f = obj.loss_handles()[k];
    if (bounded) {
      const Vector& prev = k == 0 ? *obj.boundary() : y[k - 1];
      const HessianBlocks blocks = f->hessian(prev, y[k]);
      if (k > 0) {
        h.diag[k - 1] += blocks.prev_prev;
        h.offdiag.push_back(blocks.cross);
      }
      h.diag[k] += blocks.cur_cur;
    } else {
      const HessianBlocks blocks = f->hessian(y[k], y[k + 1]);
      h.diag[k] += blocks.prev_prev;
      h.offdiag.push_back(blocks.cross);
      h.diag[k + 1] += blocks.cur_cur;
    }
  }
  return h;
}

ConvergenceError::ConvergenceError(const std::string& what, std::vector<double> gradient_norms)
    : std::runtime_error(what), gradient_norms_(std::move(gradient_norms)) {}

std::optional<double> armijo_search(const std::function<double(double)>& phi_at,
                                    const std::function<bool(double)>& feasible_at, double phi0, double slope,
                                    const ArmijoOptions& options) {
  double tau = 1.0;
  for (int k = 0; k <= options.max_halvings; ++k) {
    if (feasible_at(tau)) {
      const double phi = phi_at(tau);
      if (std::isfinite(phi) && phi <= phi0 + options.sufficient_decrease * tau * slope + phi_rounding(phi0))
        return tau;
    }
    tau *= options.shrink;
  }
  return std::nullopt;
}

NewtonOutcome damped_newton(const NewtonProblem& problem, Vector z, const NewtonOptions& options,
                            const std::string& label) {
  NewtonOutcome out;
  if (!problem.in_domain(z)) throw std::invalid_argument(label + ": starting point outside the domain");
  for (int it = 0;; ++it) {
    const Vector g = problem.gradient(z);
    const double gn = g.norm();
    out.gradient_norms.push_back(gn);
    if (gn < options.gradient_tolerance) {
      out.z = std::move(z);
      out.iterations = it;
      out.gradient_norm = gn;
      return out;
    }
    if (it == options.max_iterations) {
      std::ostringstream msg;
      msg << label << ": no convergence in " << options.max_iterations << " Newton iterations (gradient norm " << gn
          << ")";
      throw ConvergenceError(msg.str(), out.gradient_norms);
    }
    const Vector s = problem.direction(z, g);
    const double slope = g.dot(s);
    const double phi0 = problem.value(z);
    const auto tau = armijo_search([&](double t) { return problem.value(z + t * s); },
                                   [&](double t) { return problem.in_domain(z + t * s); }, phi0, slope,
                                   options.armijo);
    if (!tau) {
      std::ostringstream msg;
      msg << label << ": line search failed at iteration " << it << " (gradient norm " << gn << ")";
      throw ConvergenceError(msg.str(), out.gradient_norms);
    }
    z += *tau * s;
  }
}

namespace {

Vector regularized_solve(const Matrix& h, const Vector& g) {
  if (Eigen::LLT<Matrix> llt(h); llt.info() == Eigen::Success) return -llt.solve(g);
  Matrix shifted = h;
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  shifted.diagonal().array() += 1e-12 * scale;
  Eigen::LDLT<Matrix> ldlt(shifted);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) return -ldlt.solve(g);
  return -Eigen::FullPivLU<Matrix>(shifted).solve(g);
}

}  // namespace

IsolatedMinimizer isolated_minimizer(const FrameLoss& f, NewtonOptions options) {
  const Index n = f.dim();
  NewtonProblem problem;
  problem.value = [&](const Vector& z) { return f.value(z.head(n), z.tail(n)); };
  problem.in_domain = [&](const Vector& z) { return f.in_domain(z.head(n), z.tail(n)); };
  problem.gradient = [&](const Vector& z) { return f.gradient(z.head(n), z.tail(n)); };
  problem.direction = [&](const Vector& z, const Vector& g) {
    return regularized_solve(f.hessian(z.head(n), z.tail(n)).joint(), g);
  };
  Vector z0(2 * n);
  z0 << f.interior_point(), f.interior_point();
  const auto result = damped_newton(problem, z0, options, "isolated minimizer");
  return {result.z.head(n), result.z.tail(n), result.iterations, result.gradient_norm};
}

Vector tail_minimizer(const FrameLoss& f, const Vector& prev, const Vector& start, NewtonOptions options) {
  const Index n = f.dim();
  NewtonProblem problem;
  problem.value = [&](const Vector& w) { return f.value(prev, w); };
  problem.in_domain = [&](const Vector& w) { return f.in_domain(prev, w); };
  problem.gradient = [&](const Vector& w) -> Vector { return f.gradient(prev, w).tail(n); };
  problem.direction = [&](const Vector& w, const Vector& g) {
    return regularized_solve(f.hessian(prev, w).cur_cur, g);
  };
  return damped_newton(problem, start, options, "tail minimizer").z;
}

BlockVector default_start(const ChainObjective& obj) {
  BlockVector y(obj.blocks());
  for (std::size_t b = 0; b < y.size(); ++b) {
    const std::size_t k = std::min(b, obj.losses() - 1);
    y[b] = obj.loss_handles()[k]->interior_point();
  }
  return y;
}

BatchResult batch_minimize(const ChainObjective& obj, BlockVector init, NewtonOptions options) {
  const Index n = obj.n();
  NewtonProblem problem;
  problem.value = [&](const Vector& z) { return obj.value(unstack(z, n)); };
  problem.in_domain = [&](const Vector& z) { return obj.in_domain(unstack(z, n)); };
  problem.gradient = [&](const Vector& z) { return stack(obj.gradient(unstack(z, n))); };
  problem.direction = [&](const Vector& z, const Vector& g) {
    BlockTridiagSystem system = obj.hessian(unstack(z, n));
    system.rhs = unstack(-g, n);
    return stack(solve_block_tridiagonal(system));
  };
  const auto result = damped_newton(problem, stack(init), options, "batch minimization");
  return {unstack(result.z, n), result.iterations, result.gradient_norm};
}

DecouplingCheck conditional_decoupling_check(const std::vector<FrameLossPtr>& losses, std::size_t tau,
                                             const BlockVector& batch_solution, double tolerance) {
  if (batch_solution.size() != losses.size() + 1) throw std::invalid_argument("batch solution has wrong length");
  if (tau >= losses.size()) throw std::invalid_argument("tau must leave at least one loss in the tail");
  std::vector<FrameLossPtr> tail(losses.begin() + static_cast<std::ptrdiff_t>(tau), losses.end());
  ChainObjective tail_obj(std::move(tail), batch_solution[tau]);
  BlockVector y = default_start(tail_obj);
  if (!tail_obj.in_domain(y)) y.assign(batch_solution.begin() + static_cast<std::ptrdiff_t>(tau) + 1, batch_solution.end());
  const auto result = batch_minimize(tail_obj, std::move(y));
  DecouplingCheck out;
  const double scale = std::max(1.0, max_block_norm(batch_solution));
  for (std::size_t k = 0; k < result.x.size(); ++k)
    out.max_deviation = std::max(out.max_deviation, (result.x[k] - batch_solution[tau + 1 + k]).norm() / scale);
  out.passed = out.max_deviation < tolerance;
  return out;
}

ConvexRateReport rate_report(const ChainObjective& obj, std::span<const IsolatedMinimizer> isolated,
                             std::span<const BlockVector> samples) {
  ConvexRateReport r;
  r.mu_min = std::numeric_limits<double>::infinity();
  for (const auto& f : obj.loss_handles()) {
    const auto c = f->curvature();
    r.mu_min = std::min(r.mu_min, c.mu);
    r.l_max = std::max(r.l_max, c.lipschitz);
  }
  const double two_l = 2.0 * r.l_max;
  r.a = (two_l - r.mu_min) / (two_l + r.mu_min);
  r.kappa = 0.5 * (two_l + r.mu_min);
  r.delta = r.a;
  for (const auto& y : samples) {
    const BlockTridiagSystem h = obj.hessian(y);
    for (const auto& e : h.offdiag) r.theta = std::max(r.theta, spectral_norm(e) / r.kappa);
  }
  r.eps_star = limiting_epsilon(r.delta, r.theta);
  if (r.eps_star && *r.eps_star < 1.0) r.rho = r.theta / (1.0 - *r.eps_star);
  for (const auto& m : isolated) r.m_x = std::max(r.m_x, std::sqrt(m.prev.squaredNorm() + m.cur.squaredNorm()));
  r.m_g = 2.0 * r.m_x * r.kappa * std::sqrt(r.l_max * r.l_max + r.theta * r.theta);
  r.c0 = r.m_g / r.mu_min;
  r.c1 = r.c0 * (two_l - r.mu_min) / (2.0 * r.mu_min);
  const double coupling = r.theta / (1.0 - r.delta);
  r.c_b = coupling < 1.0 ? r.c0 * (1.0 / (1.0 - r.a) + 1.0 / (1.0 - coupling))
                         : std::numeric_limits<double>::infinity();
  return r;
}

double convex_solution_bound(const ConvexRateReport& report) {
  if (!report.eps_star || !report.rho || *report.rho >= 1.0) return std::numeric_limits<double>::infinity();
  const double rho = *report.rho;
  return report.m_g / ((1.0 - *report.eps_star) * (1.0 - rho) * (1.0 - rho));
}

}  // namespace streamopt
