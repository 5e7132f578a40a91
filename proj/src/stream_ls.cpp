#include "streamopt/stream_ls.hpp"

#include "streamopt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <ostream>

namespace streamopt {

namespace {

void mix(std::uint64_t& h, const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

void mix_matrix(std::uint64_t& h, const Matrix& m) {
  const std::int64_t shape[2] = {m.rows(), m.cols()};
  mix(h, shape, sizeof(shape));
  mix(h, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

Matrix gram_plus(const Matrix& a, double gamma) {
  Matrix g = a.transpose() * a;
  g.diagonal().array() += gamma;
  return g;
}

}  // namespace

BufferSize BufferSize::of(std::size_t frames) {
  if (frames == 0) throw std::invalid_argument("buffer length must be positive");
  BufferSize b;
  b.frames_ = frames;
  return b;
}

BufferSize BufferSize::parse(const std::string& text) {
  if (text == "full" || text == "FULL") return full();
  std::size_t used = 0;
  long long value = 0;
  try {
    value = std::stoll(text, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("buffer must be 'full' or a positive integer, got '" + text + "'");
  }
  if (used != text.size() || value <= 0)
    throw std::invalid_argument("buffer must be 'full' or a positive integer, got '" + text + "'");
  return of(static_cast<std::size_t>(value));
}

std::string BufferSize::to_string() const { return is_full() ? "full" : std::to_string(*frames_); }

void LsBatch::validate(Index n) const {
  if (a.cols() != n) throw std::invalid_argument("batch " + std::to_string(t) + ": A has wrong column count");
  if (a.rows() != y.size()) throw std::invalid_argument("batch " + std::to_string(t) + ": A and y disagree");
  if (t == 0) {
    if (b.size() != 0) throw std::invalid_argument("batch 0 must not carry a coupling matrix");
  } else if (b.rows() != y.size() || b.cols() != n) {
    throw std::invalid_argument("batch " + std::to_string(t) + ": B has wrong shape");
  }
}

StreamingLeastSquares::StreamingLeastSquares(Index n, double gamma, BufferSize buffer, StreamOptions options)
    : n_(n), gamma_(gamma), buffer_(buffer), options_(options), cache_(n, options.condition_cap) {
  if (gamma < 0.0) throw std::invalid_argument("gamma must be nonnegative");
}

BlockVector StreamingLeastSquares::estimates() const {
  BlockVector all = archive_;
  all.insert(all.end(), live_.begin(), live_.end());
  return all;
}

void StreamingLeastSquares::archive_frame(const Vector& estimate) {
  if (sink_) sink_(archive_.size(), estimate);
  archive_.push_back(estimate);
}

void StreamingLeastSquares::record(const BlockVector& previous_live, std::size_t previous_begin) {
  const std::size_t t = frames_ - 1;
  const std::size_t begin = live_begin();
  for (std::size_t k = 0; k < previous_live.size(); ++k) {
    const std::size_t frame = previous_begin + k;
    if (frame < begin) {
      archive_frame(previous_live[k]);
      continue;
    }
    const double magnitude = (live_[frame - begin] - previous_live[k]).norm();
    update_log_.push_back({t, (t - 1) - frame, magnitude});
  }
}

void StreamingLeastSquares::ingest(const LsBatch& batch) {
  if (batch.t != frames_)
    throw std::invalid_argument("out-of-order batch: expected frame " + std::to_string(frames_) + ", got " +
                                std::to_string(batch.t));
  batch.validate(n_);
  const std::uint64_t t64 = batch.t;
  mix(fingerprint_, &t64, sizeof(t64));
  mix_matrix(fingerprint_, batch.a);
  mix_matrix(fingerprint_, batch.b);
  mix(fingerprint_, batch.y.data(), sizeof(double) * static_cast<std::size_t>(batch.y.size()));

  const std::size_t t = batch.t;
  const Matrix h_new = gram_plus(batch.a, gamma_);
  const Vector g_new = batch.a.transpose() * batch.y;
  if (t == 0) {
    cache_.seed(h_new, 0);
    cache_.forward(g_new);
  } else {
    const Matrix btb = batch.b.transpose() * batch.b;
    cache_.amend_last_pivot(btb);
    final_diag_.push_back(provisional_h_ + btb);
    const Vector g_prev = provisional_g_ + batch.b.transpose() * batch.y;
    max_rhs_norm_ = std::max(max_rhs_norm_, g_prev.norm());
    cache_.forward_at(t - 1, g_prev, t - 1 == cache_.chain_start() ? nullptr : &last_e_);
    Matrix e = batch.a.transpose() * batch.b;
    cache_.append(h_new, e);
    cache_.forward(g_new, e);
    couplings_.push_back(e);
    last_e_ = std::move(e);
  }
  provisional_h_ = h_new;
  provisional_g_ = g_new;
  max_rhs_norm_ = std::max(max_rhs_norm_, g_new.norm());

  const std::size_t depth = std::min(buffer_.frames(), t + 1);
  BlockVector previous = std::move(live_);
  const std::size_t previous_begin = frames_ - previous.size();
  live_ = cache_.backward_sweep(depth);
  frames_ = t + 1;
  peak_live_ = std::max(peak_live_, live_.size());
  record(previous, previous_begin);
  if (!buffer_.is_full()) cache_.retain_last(std::max<std::size_t>(buffer_.frames(), 2));
  if (options_.record_history) history_.push_back(estimates());
}

BlockTridiagSystem normal_equations(std::span<const LsBatch> batches, double gamma) {
  if (batches.empty()) throw std::invalid_argument("normal equations need at least one batch");
  BlockTridiagSystem system;
  system.n = batches.front().a.cols();
  for (std::size_t t = 0; t < batches.size(); ++t) {
    const LsBatch& cur = batches[t];
    if (cur.t != t) throw std::invalid_argument("batches must be numbered 0..T");
    cur.validate(system.n);
    Matrix h = gram_plus(cur.a, gamma);
    Vector g = cur.a.transpose() * cur.y;
    if (t + 1 < batches.size()) {
      const LsBatch& next = batches[t + 1];
      next.validate(system.n);
      h += next.b.transpose() * next.b;
      g += next.b.transpose() * next.y;
      system.offdiag.push_back(next.a.transpose() * next.b);
    }
    system.diag.push_back(std::move(h));
    system.rhs.push_back(std::move(g));
  }
  return system;
}

ConditioningReport stream_conditioning(std::span<const LsBatch> batches, double gamma) {
  const BlockTridiagSystem system = normal_equations(batches, gamma);
  std::vector<Matrix> diag = system.diag;
  for (const auto& batch : batches) diag.push_back(gram_plus(batch.a, gamma));
  return conditioning_from_blocks(diag, system.offdiag);
}

double stream_rhs_bound(std::span<const LsBatch> batches) {
  if (batches.empty()) return 0.0;
  const BlockTridiagSystem system = normal_equations(batches, 0.0);
  double m = 0.0;
  for (const auto& g : system.rhs) m = std::max(m, g.norm());
  for (const auto& batch : batches) m = std::max(m, (batch.a.transpose() * batch.y).norm());
  return m;
}

DecayFit fit_decay(std::span<const UpdateRecord> log, double bound_ratio, double floor) {
  std::map<std::size_t, std::vector<double>> by_lag;
  for (const auto& r : log) by_lag[r.lag].push_back(r.magnitude);
  DecayFit fit;
  fit.bound_ratio = bound_ratio;
  for (auto& [lag, values] : by_lag) {
    fit.lags.push_back(lag);
    fit.magnitudes.push_back(median(values));
  }
  if (fit.magnitudes.empty()) return fit;
  const double peak = *std::max_element(fit.magnitudes.begin(), fit.magnitudes.end());
  std::vector<double> x;
  std::vector<double> v;
  for (std::size_t i = 0; i < fit.lags.size(); ++i) {
    if (fit.lags[i] != i || !(fit.magnitudes[i] > floor * peak)) break;
    x.push_back(static_cast<double>(fit.lags[i]));
    v.push_back(fit.magnitudes[i]);
  }
  if (x.size() >= 2) {
    fit.fitted_ratio = std::exp(log_linear_slope(x, v).slope);
  } else if (x.size() == 1 && fit.magnitudes.size() >= 2 && fit.lags[1] == 1) {
    fit.fitted_ratio = fit.magnitudes[1] / fit.magnitudes[0];
  }
  return fit;
}

DecayFit decay_profile(const StreamingLeastSquares& state, const ConditioningReport& report) {
  if (!state.buffer().is_full()) throw std::invalid_argument("decay profile requires a FULL-buffer run");
  if (state.frames() < 11) throw std::invalid_argument("decay profile requires at least 10 appends");
  return fit_decay(state.update_log(), report.rho.value_or(std::numeric_limits<double>::infinity()));
}

TruncationError truncation_error(const StreamingLeastSquares& reference, const StreamingLeastSquares& truncated) {
  if (reference.fingerprint() != truncated.fingerprint() || reference.frames() != truncated.frames())
    throw std::invalid_argument("truncation error: runs consumed different streams");
  if (!reference.buffer().is_full()) throw std::invalid_argument("truncation error: reference must be FULL");
  const BlockVector x = reference.estimates();
  const BlockVector z = truncated.estimates();
  TruncationError out;
  out.per_frame.reserve(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    out.per_frame.push_back((x[t] - z[t]).norm());
    out.max = std::max(out.max, out.per_frame.back());
  }
  return out;
}

SlopeFit log_linear_slope(std::span<const double> x, std::span<const double> values, double floor) {
  if (x.size() != values.size()) throw std::invalid_argument("slope fit: length mismatch");
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (values[i] > floor) {
      xs.push_back(x[i]);
      ys.push_back(std::log(values[i]));
    }
  }
  SlopeFit fit;
  fit.points = xs.size();
  if (xs.size() < 2) return fit;
  const auto line = linear_regression(xs, ys);
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  return fit;
}

double truncation_constant(const ConditioningReport& report, double max_rhs_norm) {
  if (!report.eps_star || !report.rho || *report.rho >= 1.0 || report.kappa <= 0.0)
    return std::numeric_limits<double>::infinity();
  const double eps = *report.eps_star;
  const double rho = *report.rho;
  const double m_hat = max_rhs_norm * (2.0 + rho) / (report.kappa * (1.0 - eps) * (1.0 - rho));
  return m_hat * (1.0 - eps) / (1.0 - eps - report.theta);
}

LagTable lag_table(const std::vector<BlockVector>& history) {
  if (history.empty()) throw std::invalid_argument("lag table needs a recorded FULL-buffer history");
  const BlockVector& reference = history.back();
  LagTable table;
  for (std::size_t k = 0; k < history.size(); ++k) {
    if (history[k].size() != k + 1) throw std::invalid_argument("history row has the wrong length");
    std::vector<double> row(history.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t j = 0; j <= k; ++j) {
      const double scale = reference[j].norm();
      const double err = (history[k][j] - reference[j]).norm();
      row[j] = std::log10(scale > 0.0 ? err / scale : err);
    }
    table.entries.push_back(std::move(row));
  }
  return table;
}

std::vector<double> lag_medians(const LagTable& table, std::size_t last_row) {
  std::vector<std::vector<double>> pooled;
  for (std::size_t k = 0; k < table.entries.size() && k <= last_row; ++k)
    for (std::size_t j = 0; j <= k; ++j) {
      const std::size_t lag = k - j;
      if (pooled.size() <= lag) pooled.resize(lag + 1);
      pooled[lag].push_back(table.entries[k][j]);
    }
  std::vector<double> out;
  for (auto& values : pooled) out.push_back(median(values));
  return out;
}

void write_lag_table_csv(std::ostream& out, const LagTable& table) {
  out << "k";
  for (std::size_t j = 0; j < table.entries.size(); ++j) out << ",j" << j;
  out << '\n';
  for (std::size_t k = 0; k < table.entries.size(); ++k) {
    out << k;
    for (std::size_t j = 0; j < table.entries.size(); ++j)
      out << ',' << (j > k ? std::string("-") : format_double(table.entries[k][j]));
    out << '\n';
  }
}

void write_lag_table_text(std::ostream& out, const LagTable& table) {
  char buf[32];
  out << "  k\\j";
  for (std::size_t j = 0; j < table.entries.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%8zu", j);
    out << buf;
  }
  out << '\n';
  for (std::size_t k = 0; k < table.entries.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%5zu", k);
    out << buf;
    for (std::size_t j = 0; j < table.entries.size(); ++j) {
      if (j > k)
        std::snprintf(buf, sizeof(buf), "%8s", "-");
      else
        std::snprintf(buf, sizeof(buf), "%8.2f", table.entries[k][j]);
      out << buf;
    }
    out << '\n';
  }
}

void write_archive_csv(std::ostream& out, const BlockVector& estimates, std::size_t first_frame) {
  CsvWriter csv(out, {"frame", "component", "value"});
  for (std::size_t t = 0; t < estimates.size(); ++t)
    for (Index i = 0; i < estimates[t].size(); ++i)
      csv.row(first_frame + t, static_cast<std::size_t>(i), estimates[t](i));
}

void write_decay_log_csv(std::ostream& out, std::span<const UpdateRecord> log) {
  CsvWriter csv(out, {"append_T", "lag", "magnitude"});
  for (const auto& r : log) csv.row(r.append, r.lag, r.magnitude);
}

}  // namespace streamopt
