#include "streamopt/noa.hpp"

#include "streamopt/diagnostics.hpp"
#include "streamopt/newton.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <ostream>
#include <sstream>

namespace streamopt {

namespace {

void seed_chain(LuStreamCache& cache, const BlockTridiagSystem& system, std::size_t first_frame) {
  cache.seed(system.diag[0], first_frame);
  for (std::size_t i = 1; i < system.frames(); ++i) cache.append(system.diag[i], system.offdiag[i - 1]);
}

BlockVector sweep(LuStreamCache& cache, const BlockTridiagSystem& system, std::size_t first_frame) {
  cache.forward_at(first_frame, -system.rhs[0], nullptr);
  for (std::size_t i = 1; i < system.frames(); ++i)
    cache.forward_at(first_frame + i, -system.rhs[i], &system.offdiag[i - 1]);
  return cache.backward_sweep();
}

bool strictly_positive(const BlockVector& blocks) {
  for (const auto& b : blocks)
    if ((b.array() <= 0.0).any()) return false;
  return true;
}

}  // namespace

void NoaConfig::validate() const {
  if (!(eps0 > 0.0)) throw std::invalid_argument("eps0 must be positive");
  if (max_newton_iters < 1) throw std::invalid_argument("max_newton_iters must be positive");
  if (!(damping.shrink > 0.0 && damping.shrink < 1.0)) throw std::invalid_argument("Armijo shrink must lie in (0, 1)");
  if (!(damping.sufficient_decrease > 0.0 && damping.sufficient_decrease < 0.5))
    throw std::invalid_argument("Armijo sufficient decrease must lie in (0, 1/2)");
}

NewtonStepResult newton_step(const std::vector<FrameLossPtr>& window, const std::optional<Vector>& boundary,
                             const BlockVector& y, Execution exec) {
  const ChainObjective obj(window, boundary);
  const BlockTridiagSystem system = obj.newton_system(y, exec);
  LuStreamCache cache(obj.n());
  seed_chain(cache, system, 0);
  NewtonStepResult out;
  out.step = sweep(cache, system, 0);
  out.gradient = system.rhs;
  out.flops = cache.flops();
  return out;
}

std::vector<double> BarrierSchedule::stages(std::size_t dim) const {
  if (!(initial > 0.0) || !(factor > 1.0) || !(gap_tolerance > 0.0))
    throw std::invalid_argument("barrier schedule needs initial > 0, factor > 1, tolerance > 0");
  const double count = static_cast<double>(dimension.value_or(dim));
  std::vector<double> out{initial};
  while (count / out.back() >= gap_tolerance) out.push_back(out.back() * factor);
  return out;
}

NewtonOnline::NewtonOnline(Index n, NoaConfig config) : n_(n), config_(config), cache_(n) { config_.validate(); }

BlockVector NewtonOnline::estimates() const {
  BlockVector all = archive_;
  all.insert(all.end(), window_.begin(), window_.end());
  return all;
}

FrameLossPtr NewtonOnline::effective(const FrameLossPtr& f) const {
  if (!barrier_mu_) return f;
  return std::make_shared<LogBarrierLoss>(f, 1.0 / *barrier_mu_);
}

std::vector<FrameLossPtr> NewtonOnline::window_losses() const {
  std::vector<FrameLossPtr> out;
  out.reserve(raw_.size());
  for (const auto& f : raw_) out.push_back(effective(f));
  return out;
}

void NewtonOnline::push_frame(FrameLossPtr f) {
  if (!f || f->dim() != n_) throw std::invalid_argument("loss has the wrong block size");
  const FrameLossPtr wf = barrier_mu_ ? std::make_shared<LogBarrierLoss>(f, 1.0 / *barrier_mu_, true) : f;
  raw_.push_back(std::move(f));
  const std::size_t t = time_step_ + 1;
  if (t == 1) {
    const auto iso = isolated_minimizer(*wf);
    window_ = {iso.prev, config_.new_frame_init == NewFrameInit::Isolated
                             ? iso.cur
                             : tail_minimizer(*wf, iso.prev, wf->interior_point())};
  } else if (config_.new_frame_init == NewFrameInit::Isolated) {
    window_.push_back(isolated_minimizer(*wf).cur);
  } else {
    window_.push_back(tail_minimizer(*wf, window_.back(), wf->interior_point()));
  }
  time_step_ = t;
  while (window_.size() > config_.buffer.frames()) {
    archive_.push_back(window_.front());
    boundary_ = window_.front();
    window_.erase(window_.begin());
    ++window_begin_;
  }
  const std::size_t keep = boundary_ ? window_.size() : window_.size() - 1;
  while (raw_.size() > keep) raw_.pop_front();
}

BlockVector NewtonOnline::solve_step(const BlockTridiagSystem& system, bool first) {
  const std::size_t s = window_begin_;
  const std::size_t last = time_step_;
  const bool reuse = first && config_.reuse_first_factorization && !cache_.empty() && cache_.end_frame() == last &&
                     s >= cache_.begin_frame() && last >= s + 3;
  const std::uint64_t before = cache_.flops();
  BlockVector step;
  if (reuse) {
    cache_.rebase(s);
    cache_.truncate_after(last - 2);
    for (std::size_t frame = last - 1; frame <= last; ++frame)
      cache_.append(system.diag[frame - s], system.offdiag[frame - s - 1]);
  } else {
    seed_chain(cache_, system, s);
  }
  step = sweep(cache_, system, s);
  flops_ += cache_.flops() - before;
  return step;
}

int NewtonOnline::solve_window() {
  const ChainObjective obj(window_losses(), boundary_);
  for (int k = 0;; ++k) {
    const BlockTridiagSystem system = obj.newton_system(window_, config_.execution);
    const double gn = norm(system.rhs);
    if (gn * gn < config_.eps0) {
      trace_.push_back({time_step_, k, gn, 0.0, 0.0});
      return k;
    }
    if (k == config_.max_newton_iters) {
      std::vector<double> norms;
      for (const auto& row : trace_)
        if (row.time_step == time_step_) norms.push_back(row.grad_norm);
      norms.push_back(gn);
      std::ostringstream msg;
      msg << "NOA: no convergence at time step " << time_step_ << " within " << config_.max_newton_iters
          << " Newton iterations (gradient norm " << gn << ")";
      throw ConvergenceError(msg.str(), std::move(norms));
    }
    BlockVector step = solve_step(system, k == 0);
    const Vector g = stack(system.rhs);
    Vector s = stack(step);
    if (g.dot(s) >= 0.0 && k == 0 && config_.reuse_first_factorization) {
      spdlog::debug("reused factorization gave no descent at time step {}; refactoring", time_step_);
      seed_chain(cache_, system, window_begin_);
      step = sweep(cache_, system, window_begin_);
      s = stack(step);
    }
    const Vector y = stack(window_);
    const double phi0 = obj.value(window_);
    const auto tau = armijo_search([&](double t) { return obj.value(unstack(y + t * s, n_)); },
                                   [&](double t) { return obj.in_domain(unstack(y + t * s, n_)); }, phi0, g.dot(s),
                                   config_.damping);
    if (!tau) {
      std::vector<double> norms{gn};
      throw ConvergenceError("NOA: line search failed at time step " + std::to_string(time_step_), norms);
    }
    trace_.push_back({time_step_, k, gn, s.norm(), *tau});
    window_ = unstack(y + *tau * s, n_);
  }
}

void NewtonOnline::advance(FrameLossPtr f) {
  const BlockVector previous = window_;
  const std::size_t previous_begin = window_begin_;
  push_frame(std::move(f));
  const int iterations = solve_window();
  iterations_.push_back(iterations);
  const std::size_t t = time_step_;
  for (std::size_t k = 0; k < previous.size(); ++k) {
    const std::size_t frame = previous_begin + k;
    if (frame < window_begin_) continue;
    update_log_.push_back({t, (t - 1) - frame, (window_[frame - window_begin_] - previous[k]).norm()});
  }
  spdlog::debug("NOA time step {}: {} Newton iterations", t, iterations);
}

void NewtonOnline::barrier_advance(FrameLossPtr f, const BarrierSchedule& schedule) {
  if (!barrier_mu_) barrier_mu_ = schedule.initial;
  if (!strictly_positive(window_) || (boundary_ && (boundary_->array() <= 0.0).any()))
    throw std::invalid_argument("barrier solve needs a strictly feasible warm start");
  const BlockVector previous = window_;
  const std::size_t previous_begin = window_begin_;
  push_frame(std::move(f));
  if (!strictly_positive(window_)) throw std::invalid_argument("barrier solve: new frame start is infeasible");
  int iterations = 0;
  for (const double mu : schedule.stages(window_.size() * static_cast<std::size_t>(n_))) {
    if (mu < *barrier_mu_) continue;
    barrier_mu_ = mu;
    iterations += solve_window();
  }
  iterations_.push_back(iterations);
  const std::size_t t = time_step_;
  for (std::size_t k = 0; k < previous.size(); ++k) {
    const std::size_t frame = previous_begin + k;
    if (frame < window_begin_) continue;
    update_log_.push_back({t, (t - 1) - frame, (window_[frame - window_begin_] - previous[k]).norm()});
  }
}

void barrier_solve(NewtonOnline& state, FrameLossPtr f, const BarrierSchedule& schedule) {
  state.barrier_advance(std::move(f), schedule);
}

BarrierBatchResult barrier_batch_minimize(const std::vector<FrameLossPtr>& losses, const BarrierSchedule& schedule) {
  if (losses.empty()) throw std::invalid_argument("batch oracle needs at least one loss");
  const ChainObjective plain(losses);
  BarrierBatchResult out;
  out.x = default_start(plain);
  for (const double mu : schedule.stages(plain.blocks() * static_cast<std::size_t>(plain.n()))) {
    std::vector<FrameLossPtr> wrapped;
    wrapped.reserve(losses.size());
    for (const auto& f : losses) wrapped.push_back(std::make_shared<LogBarrierLoss>(f, 1.0 / mu));
    auto stage = batch_minimize(ChainObjective(std::move(wrapped)), std::move(out.x));
    out.x = std::move(stage.x);
    out.iterations += stage.iterations;
    out.barrier_parameter = mu;
  }
  return out;
}

void write_trace_csv(std::ostream& out, std::span<const NewtonTraceRow> rows) {
  CsvWriter csv(out, {"time_step", "newton_iter", "grad_norm", "step_norm", "damping"});
  for (const auto& r : rows) csv.row(r.time_step, r.newton_iter, r.grad_norm, r.step_norm, r.damping);
}

}  // namespace streamopt
