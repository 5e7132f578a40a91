#pragma once

#include "streamopt/dense.hpp"

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

namespace streamopt {

// Symmetric block-tridiagonal system. offdiag[t] couples frame t+1 (rows) to
// frame t (columns).
struct BlockTridiagSystem {
  Index n = 0;
  std::vector<Matrix> diag;
  std::vector<Matrix> offdiag;
  BlockVector rhs;

  std::size_t frames() const { return diag.size(); }
  // Throws std::invalid_argument on shape or symmetry violations.
  void validate(bool require_rhs = true) const;
};

Matrix assemble_dense(const BlockTridiagSystem& system);
BlockVector multiply(const BlockTridiagSystem& system, const BlockVector& x);
// Dense LU oracle.
BlockVector solve_dense(const BlockTridiagSystem& system);
// Forward and backward sweeps over the whole system.
BlockVector solve_block_tridiagonal(const BlockTridiagSystem& system);

inline constexpr double kDefaultConditionCap = 1e12;

class FactorizationBreakdown : public std::runtime_error {
 public:
  FactorizationBreakdown(std::size_t frame, double condition);
  std::size_t frame() const { return frame_; }
  double condition() const { return condition_; }

 private:
  std::size_t frame_;
  double condition_;
};

// Recursive block LU state {Q_t, U_t, v_t}. Frames are addressed by their
// absolute index; older frames may be dropped with retain_last.
class LuStreamCache {
 public:
  explicit LuStreamCache(Index n, double condition_cap = kDefaultConditionCap);

  Index block_size() const { return n_; }
  bool empty() const { return entries_.empty(); }
  std::size_t begin_frame() const { return base_; }
  std::size_t end_frame() const { return base_ + entries_.size(); }
  std::size_t size() const { return entries_.size(); }
  std::size_t chain_start() const { return chain_start_; }

  // Starts a new chain with Q = h0 at the given frame.
  void seed(const Matrix& h0, std::size_t frame = 0);
  // U_{t-1} = Q_{t-1}⁻¹ E_{t-1}ᵀ and Q_t = H_t − E_{t-1} U_{t-1}.
  void append(const Matrix& h, const Matrix& e_prev);
  // Q_last += delta; drops cached factors of the last frame.
  void amend_last_pivot(const Matrix& delta);

  // v at the chain start frame: Q⁻¹ g.
  void forward(const Vector& g);
  // v at the last frame: Q⁻¹ (g − E_{t-1} v_{t-1}).
  void forward(const Vector& g, const Matrix& e_prev);
  void forward_at(std::size_t frame, const Vector& g, const Matrix* e_prev);

  // Trailing `depth` estimates, oldest first.
  BlockVector backward_sweep(std::size_t depth) const;
  BlockVector backward_sweep() const { return backward_sweep(size()); }

  void retain_last(std::size_t count);
  // Drops every frame after `frame`.
  void truncate_after(std::size_t frame);
  // Drops frames before `frame` and treats it as the new chain start; its
  // pivot is kept as is.
  void rebase(std::size_t frame);

  const Matrix& pivot(std::size_t frame) const;
  const Matrix& upper(std::size_t frame) const;
  const Vector& forward_variable(std::size_t frame) const;
  bool has_upper(std::size_t frame) const;
  bool has_forward_variable(std::size_t frame) const;
  Vector solve_pivot(std::size_t frame, const Vector& rhs) const;
  double pivot_condition(std::size_t frame) const;

  std::uint64_t flops() const { return flops_; }
  void reset_flops() { flops_ = 0; }

 private:
  struct Entry {
    Matrix q;
    // LU of diag(scale)·q·diag(scale).
    std::optional<Eigen::PartialPivLU<Matrix>> lu;
    double condition = 0.0;
    std::optional<Matrix> u;
    std::optional<Vector> v;
    Vector scale;
  };

  Entry& entry(std::size_t frame);
  const Entry& entry(std::size_t frame) const;
  const Eigen::PartialPivLU<Matrix>& factor(std::size_t frame) const;
  Matrix solve_factored(std::size_t frame, const Matrix& rhs) const;
  void check_block(const Matrix& m, const char* what) const;

  Index n_;
  double condition_cap_;
  std::size_t base_ = 0;
  std::size_t chain_start_ = 0;
  mutable std::deque<Entry> entries_;
  mutable std::uint64_t flops_ = 0;
};

struct ConditioningReport {
  double kappa = 0.0;
  double delta = 0.0;
  double theta = 0.0;
  std::optional<double> eps_star;
  std::optional<double> rho;
  bool dominant = false;
};

// ε★ for dominant (δ, θ), unset otherwise.
std::optional<double> limiting_epsilon(double delta, double theta);
ConditioningReport conditioning_from_constants(double kappa, double delta, double theta);
ConditioningReport conditioning_from_blocks(std::span<const Matrix> diag, std::span<const Matrix> offdiag);
ConditioningReport conditioning_report(const BlockTridiagSystem& system);

struct EpsilonIteration {
  double limit = 0.0;
  bool monotone = true;
  int iterations = 0;
  bool converged = false;
};

// ε_t = δ + θ²/(1 − ε_{t−1}), ε_0 = δ.
EpsilonIteration iterate_epsilon_recursion(double delta, double theta, double tolerance = 1e-12,
                                           int max_iterations = 10'000'000);

// Resolves z_t ≤ b + a z_{t−1}, z_0 ≤ b: z_t ≤ b(1 − a^{t+1})/(1 − a).
double contractive_bound(double a, double b, std::size_t t);

// Uniform block bound M/(κ(1 − ε★)(1 − ρ)²) given ‖g_t‖ ≤ M.
double solution_block_bound(const ConditioningReport& report, double max_rhs_norm);

struct SensitivityCheck {
  double alpha = 0.0;
  double beta = 0.0;
  double h0_norm = 0.0;
  double tail_norm = 0.0;
  double ratio = 0.0;
  bool within_bound = false;
  BlockVector solution;
};

// For rhs supported on the first block: the tail y = −B⁻¹ V h₀ with
// α = ‖V‖, β = ‖B⁻¹‖.
SensitivityCheck first_block_sensitivity(const BlockTridiagSystem& system);

}  // namespace streamopt
