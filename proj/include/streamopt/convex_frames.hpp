#pragma once

#include "streamopt/blocktridiag.hpp"
#include "streamopt/stream_ls.hpp"

#include <memory>
#include <optional>
#include <span>
#include <stdexcept>

namespace streamopt {

struct HessianBlocks {
  Matrix prev_prev;
  // ∂²f / ∂x_cur ∂x_prev
  Matrix cross;
  Matrix cur_cur;

  Matrix joint() const;
};

struct CurvatureBounds {
  double mu = 0.0;
  double lipschitz = 0.0;
};

// Componentwise bounds lo ≤ x_i ≤ hi of the region where curvature bounds hold.
struct DomainBox {
  double lo = 0.0;
  double hi = 0.0;
};

// One term f_t(x_{t−1}, x_t) of the objective. Implementations must be pure.
class FrameLoss {
 public:
  virtual ~FrameLoss() = default;

  virtual Index dim() const = 0;
  // +inf outside the domain.
  virtual double value(const Vector& prev, const Vector& cur) const = 0;
  // Stacked (∇_prev f; ∇_cur f).
  virtual Vector gradient(const Vector& prev, const Vector& cur) const = 0;
  virtual HessianBlocks hessian(const Vector& prev, const Vector& cur) const = 0;
  // μ bounds the curvature left in the current block once the previous block
  // is minimized out; for a loss owning its previous block it bounds the joint
  // Hessian.
  virtual CurvatureBounds curvature() const = 0;
  // True for the first loss, which alone carries the data of frame 0.
  virtual bool owns_prev() const { return false; }
  virtual bool in_domain(const Vector& prev, const Vector& cur) const;
  virtual std::optional<DomainBox> domain_box() const { return std::nullopt; }
  // A point inside the domain, used to start minimizations.
  virtual Vector interior_point() const { return Vector::Zero(dim()); }
};

using FrameLossPtr = std::shared_ptr<const FrameLoss>;

// ‖B u + A v − y‖² + γ‖v‖², plus ‖A₀u − y₀‖² + γ‖u‖² for the leading loss.
class QuadraticFrameLoss final : public FrameLoss {
 public:
  QuadraticFrameLoss(const LsBatch& cur, double gamma, const LsBatch* leading = nullptr);

  Index dim() const override { return a_.cols(); }
  double value(const Vector& prev, const Vector& cur) const override;
  Vector gradient(const Vector& prev, const Vector& cur) const override;
  HessianBlocks hessian(const Vector& prev, const Vector& cur) const override;
  CurvatureBounds curvature() const override { return curvature_; }
  bool owns_prev() const override { return lead_.has_value(); }

 private:
  struct Lead {
    Matrix a;
    Vector y;
  };
  Matrix a_;
  Matrix b_;
  Vector y_;
  double gamma_;
  std::optional<Lead> lead_;
  HessianBlocks hessian_;
  CurvatureBounds curvature_;
};

// General quadratic ½ zᵀ P z + qᵀ z + c in z = (prev; cur) with P symmetric.
class StackedQuadraticLoss final : public FrameLoss {
 public:
  StackedQuadraticLoss(Matrix p, Vector q, bool owns_prev, double constant = 0.0);

  Index dim() const override { return q_.size() / 2; }
  double value(const Vector& prev, const Vector& cur) const override;
  Vector gradient(const Vector& prev, const Vector& cur) const override;
  HessianBlocks hessian(const Vector& prev, const Vector& cur) const override;
  CurvatureBounds curvature() const override { return curvature_; }
  bool owns_prev() const override { return owns_prev_; }

 private:
  Matrix p_;
  Vector q_;
  double c_;
  bool owns_prev_;
  CurvatureBounds curvature_;
};

// f − w Σ log(x_i) over the owned components, w = 1/μ_barrier. With
// barrier_prev the previous block is barriered too, which keeps isolated
// minimizations inside the nonnegative orthant.
class LogBarrierLoss final : public FrameLoss {
 public:
  LogBarrierLoss(FrameLossPtr base, double weight, bool barrier_prev = false);

  Index dim() const override { return base_->dim(); }
  double value(const Vector& prev, const Vector& cur) const override;
  Vector gradient(const Vector& prev, const Vector& cur) const override;
  HessianBlocks hessian(const Vector& prev, const Vector& cur) const override;
  CurvatureBounds curvature() const override;
  bool owns_prev() const override { return base_->owns_prev(); }
  bool in_domain(const Vector& prev, const Vector& cur) const override;
  std::optional<DomainBox> domain_box() const override { return base_->domain_box(); }
  // The base interior point when strictly positive, else all ones.
  Vector interior_point() const override;

  double weight() const { return weight_; }
  const FrameLossPtr& base() const { return base_; }

 private:
  FrameLossPtr base_;
  double weight_;
  bool barrier_prev_ = false;
};

enum class Execution { Serial, Parallel };

// Σ f_t over a contiguous run of losses. Without a boundary the variables are
// frames 0..T and losses[i] couples frames i and i+1. With a boundary the
// first loss takes the boundary as its previous block and losses[i] couples
// variables i−1 and i.
class ChainObjective {
 public:
  explicit ChainObjective(std::vector<FrameLossPtr> losses, std::optional<Vector> boundary = std::nullopt);

  Index n() const { return n_; }
  std::size_t blocks() const { return boundary_ ? losses_.size() : losses_.size() + 1; }
  std::size_t losses() const { return losses_.size(); }
  const std::vector<FrameLossPtr>& loss_handles() const { return losses_; }
  const std::optional<Vector>& boundary() const { return boundary_; }

  double value(const BlockVector& y) const;
  bool in_domain(const BlockVector& y) const;
  BlockVector gradient(const BlockVector& y, Execution exec = Execution::Parallel) const;
  // Diagonal and off-diagonal blocks; rhs left empty.
  BlockTridiagSystem hessian(const BlockVector& y, Execution exec = Execution::Parallel) const;
  // Gradient and Hessian from a single pass over the losses.
  BlockTridiagSystem newton_system(const BlockVector& y, Execution exec = Execution::Parallel) const;

 private:
  const Vector& prev_of(const BlockVector& y, std::size_t i) const;
  const Vector& cur_of(const BlockVector& y, std::size_t i) const;
  void check(const BlockVector& y) const;

  std::vector<FrameLossPtr> losses_;
  std::optional<Vector> boundary_;
  Index n_;
};

// Straight-line serial reference for the aggregate gradient and Hessian.
BlockVector aggregate_grad_reference(const ChainObjective& obj, const BlockVector& y);
BlockTridiagSystem aggregate_hessian_reference(const ChainObjective& obj, const BlockVector& y);

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> gradient_norms);
  const std::vector<double>& gradient_norms() const { return gradient_norms_; }

 private:
  std::vector<double> gradient_norms_;
};

struct ArmijoOptions {
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;
  int max_halvings = 60;
};

struct NewtonOptions {
  double gradient_tolerance = 1e-11;
  int max_iterations = 100;
  ArmijoOptions armijo;
};

struct IsolatedMinimizer {
  Vector prev;
  Vector cur;
  int iterations = 0;
  double gradient_norm = 0.0;
};

// Damped Newton on the 2n-dimensional problem with a tiny Tikhonov shift so
// that directions absent from f stay at their starting values.
IsolatedMinimizer isolated_minimizer(const FrameLoss& f, NewtonOptions options = {1e-10, 100, {}});

// argmin_w f(prev, w).
Vector tail_minimizer(const FrameLoss& f, const Vector& prev, const Vector& start,
                      NewtonOptions options = {1e-10, 100, {}});

struct BatchResult {
  BlockVector x;
  int iterations = 0;
  double gradient_norm = 0.0;
};

// Full-dimensional damped Newton with block-tridiagonal solves.
BatchResult batch_minimize(const ChainObjective& obj, BlockVector init, NewtonOptions options = {});
BlockVector default_start(const ChainObjective& obj);

struct DecouplingCheck {
  bool passed = false;
  double max_deviation = 0.0;
};

// Fixes x_τ at the batch solution and re-solves the tail f_{τ+1}..f_T.
DecouplingCheck conditional_decoupling_check(const std::vector<FrameLossPtr>& losses, std::size_t tau,
                                             const BlockVector& batch_solution, double tolerance = 1e-8);

struct ConvexRateReport {
  double mu_min = 0.0;
  double l_max = 0.0;
  double a = 0.0;
  double kappa = 0.0;
  double delta = 0.0;
  double theta = 0.0;
  std::optional<double> eps_star;
  std::optional<double> rho;
  double m_x = 0.0;
  double m_g = 0.0;
  double c0 = 0.0;
  double c1 = 0.0;
  double c_b = 0.0;
};

// θ is the largest ‖E_t‖/κ over the supplied sample points.
ConvexRateReport rate_report(const ChainObjective& obj, std::span<const IsolatedMinimizer> isolated,
                             std::span<const BlockVector> samples);

// Frame-wise bound M_g/((1−ε★)(1−ρ)²).
double convex_solution_bound(const ConvexRateReport& report);

}  // namespace streamopt
