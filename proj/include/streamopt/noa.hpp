#pragma once

#include "streamopt/convex_frames.hpp"

#include <deque>
#include <iosfwd>

namespace streamopt {

enum class NewFrameInit {
  // argmin_w f_T(x̂_{T−1}, w)
  TailMin,
  // current block of the isolated minimizer of f_T
  Isolated,
};

struct NoaConfig {
  BufferSize buffer = BufferSize::of(6);
  // Stop when ‖F‖² < eps0.
  double eps0 = 1e-16;
  int max_newton_iters = 50;
  ArmijoOptions damping;
  NewFrameInit new_frame_init = NewFrameInit::Isolated;
  // Reuse the previous time step's factorization for all but the last two
  // frames on the first Newton step.
  bool reuse_first_factorization = false;
  Execution execution = Execution::Parallel;

  void validate() const;
};

struct NewtonTraceRow {
  std::size_t time_step = 0;
  int newton_iter = 0;
  double grad_norm = 0.0;
  double step_norm = 0.0;
  double damping = 0.0;
};

struct NewtonStepResult {
  BlockVector step;
  BlockVector gradient;
  std::uint64_t flops = 0;
};

// Solves F′(y) s = −F(y) over the window with one forward and one backward sweep.
NewtonStepResult newton_step(const std::vector<FrameLossPtr>& window, const std::optional<Vector>& boundary,
                             const BlockVector& y, Execution exec = Execution::Parallel);

struct BarrierSchedule {
  double initial = 1.0;
  double factor = 10.0;
  double gap_tolerance = 1e-6;
  // Variable count used in the gap proxy; the window size when unset.
  std::optional<std::size_t> dimension;

  // Increasing barrier parameters μ, ending at the first with dim/μ below the tolerance.
  std::vector<double> stages(std::size_t dim) const;
};

class NewtonOnline {
 public:
  NewtonOnline(Index n, NoaConfig config);

  void advance(FrameLossPtr f);
  // Path-following over the barrier schedule with f − (1/μ)Σ log x on every
  // window loss. After the first time step only stages at or above the
  // current μ run.
  void barrier_advance(FrameLossPtr f, const BarrierSchedule& schedule);

  Index block_size() const { return n_; }
  const NoaConfig& config() const { return config_; }
  std::size_t time_step() const { return time_step_; }
  std::size_t window_begin() const { return window_begin_; }
  const BlockVector& window() const { return window_; }
  const std::optional<Vector>& boundary() const { return boundary_; }
  const BlockVector& archive() const { return archive_; }
  BlockVector estimates() const;
  const std::vector<NewtonTraceRow>& trace() const { return trace_; }
  const std::vector<int>& iterations_per_step() const { return iterations_; }
  const std::vector<UpdateRecord>& update_log() const { return update_log_; }
  std::optional<double> barrier_parameter() const { return barrier_mu_; }
  // Window losses as currently optimized (barrier-wrapped when active).
  std::vector<FrameLossPtr> window_losses() const;
  std::uint64_t flops() const { return flops_; }

 private:
  FrameLossPtr effective(const FrameLossPtr& f) const;
  void push_frame(FrameLossPtr f);
  int solve_window();
  BlockVector solve_step(const BlockTridiagSystem& system, bool first);

  Index n_;
  NoaConfig config_;
  std::size_t time_step_ = 0;
  std::size_t window_begin_ = 0;
  std::deque<FrameLossPtr> raw_;
  BlockVector window_;
  std::optional<Vector> boundary_;
  BlockVector archive_;
  std::vector<NewtonTraceRow> trace_;
  std::vector<int> iterations_;
  std::vector<UpdateRecord> update_log_;
  std::optional<double> barrier_mu_;
  LuStreamCache cache_;
  std::uint64_t flops_ = 0;
};

void barrier_solve(NewtonOnline& state, FrameLossPtr f, const BarrierSchedule& schedule);

struct BarrierBatchResult {
  BlockVector x;
  double barrier_parameter = 0.0;
  int iterations = 0;
};

// Batch path-following over all losses with the same stages NOA uses.
BarrierBatchResult barrier_batch_minimize(const std::vector<FrameLossPtr>& losses, const BarrierSchedule& schedule);

void write_trace_csv(std::ostream& out, std::span<const NewtonTraceRow> rows);

}  // namespace streamopt
