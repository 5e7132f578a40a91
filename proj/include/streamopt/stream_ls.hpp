#pragma once

#include "streamopt/blocktridiag.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>

namespace streamopt {

// Buffer length B or FULL (never truncate).
class BufferSize {
 public:
  static BufferSize full() { return BufferSize(); }
  static BufferSize of(std::size_t frames);
  // Parses "full" or a positive integer.
  static BufferSize parse(const std::string& text);

  bool is_full() const { return !frames_; }
  std::size_t frames() const { return frames_.value_or(std::numeric_limits<std::size_t>::max()); }
  std::string to_string() const;
  bool operator==(const BufferSize&) const = default;

 private:
  BufferSize() = default;
  std::optional<std::size_t> frames_;
};

// One frame of measurements y_t ≈ B_t x_{t−1} + A_t x_t. B is empty at t = 0.
struct LsBatch {
  std::size_t t = 0;
  Vector y;
  Matrix a;
  Matrix b;

  void validate(Index n) const;
};

struct UpdateRecord {
  std::size_t append = 0;
  std::size_t lag = 0;
  double magnitude = 0.0;
};

struct StreamOptions {
  // Keep the full estimate trajectory after every append (diagnostics only).
  bool record_history = false;
  double condition_cap = kDefaultConditionCap;
};

class StreamingLeastSquares {
 public:
  using ArchiveSink = std::function<void(std::size_t frame, const Vector& estimate)>;

  StreamingLeastSquares(Index n, double gamma, BufferSize buffer, StreamOptions options = {});

  void ingest(const LsBatch& batch);

  Index block_size() const { return n_; }
  double gamma() const { return gamma_; }
  BufferSize buffer() const { return buffer_; }
  std::size_t frames() const { return frames_; }
  std::size_t live_begin() const { return frames_ - live_.size(); }
  const BlockVector& live() const { return live_; }
  const BlockVector& archive() const { return archive_; }
  // Archive followed by the live estimates.
  BlockVector estimates() const;
  const std::vector<UpdateRecord>& update_log() const { return update_log_; }
  // history()[T][t] = x̂_{t|T}; populated only with record_history.
  const std::vector<BlockVector>& history() const { return history_; }
  std::uint64_t fingerprint() const { return fingerprint_; }
  std::size_t peak_live_frames() const { return peak_live_; }
  std::size_t cached_frames() const { return cache_.size(); }
  const LuStreamCache& cache() const { return cache_; }
  // Final diagonal blocks and couplings seen so far, plus the provisional last block.
  const std::vector<Matrix>& final_diagonal_blocks() const { return final_diag_; }
  const std::vector<Matrix>& coupling_blocks() const { return couplings_; }
  const Matrix& provisional_block() const { return provisional_h_; }
  double max_rhs_norm() const { return max_rhs_norm_; }

  void set_archive_sink(ArchiveSink sink) { sink_ = std::move(sink); }

 private:
  void record(const BlockVector& previous_live, std::size_t previous_begin);
  void archive_frame(const Vector& estimate);

  Index n_;
  double gamma_;
  BufferSize buffer_;
  StreamOptions options_;
  LuStreamCache cache_;
  std::size_t frames_ = 0;
  Vector provisional_g_;
  Matrix provisional_h_;
  Matrix last_e_;
  BlockVector live_;
  BlockVector archive_;
  std::vector<UpdateRecord> update_log_;
  std::vector<BlockVector> history_;
  std::vector<Matrix> final_diag_;
  std::vector<Matrix> couplings_;
  double max_rhs_norm_ = 0.0;
  std::uint64_t fingerprint_ = 0xcbf29ce484222325ULL;
  std::size_t peak_live_ = 0;
  ArchiveSink sink_;
};

// Normal equations of the regularized least-squares problem over all batches.
BlockTridiagSystem normal_equations(std::span<const LsBatch> batches, double gamma);

// Conditioning over the final blocks and every provisional last block
// A_tᵀA_t + γI seen during streaming.
ConditioningReport stream_conditioning(std::span<const LsBatch> batches, double gamma);

// max over T of ‖g_T‖ for the final and provisional right-hand sides.
double stream_rhs_bound(std::span<const LsBatch> batches);

struct DecayFit {
  std::vector<std::size_t> lags;
  std::vector<double> magnitudes;
  double fitted_ratio = 0.0;
  double bound_ratio = 0.0;
};

// Log-linear fit of per-lag medians; lags below floor·(largest median) or
// after the first such lag are excluded.
DecayFit fit_decay(std::span<const UpdateRecord> log, double bound_ratio, double floor = 1e-10);
DecayFit decay_profile(const StreamingLeastSquares& state, const ConditioningReport& report);

struct TruncationError {
  std::vector<double> per_frame;
  double max = 0.0;
};

TruncationError truncation_error(const StreamingLeastSquares& reference, const StreamingLeastSquares& truncated);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
};

// Least-squares slope of log(value) against x over entries above floor.
SlopeFit log_linear_slope(std::span<const double> x, std::span<const double> values, double floor = 1e-300);

// Implemented constant C with ‖x★_t − z★_t‖ ≤ C·ρ^{B−1}:
// M_x̂(1−ε★)/(1−ε★−θ), M_x̂ = M(2+ρ)/(κ(1−ε★)(1−ρ)).
double truncation_constant(const ConditioningReport& report, double max_rhs_norm);

// entries[k][j] = log10(‖x̂_{j|k} − x★_j‖/‖x★_j‖) for j ≤ k with x★ the last
// row of the history; NaN above the diagonal.
struct LagTable {
  std::vector<std::vector<double>> entries;
};

LagTable lag_table(const std::vector<BlockVector>& history);
// Per-lag medians of entries with row k ≤ last_row; index = lag k − j.
std::vector<double> lag_medians(const LagTable& table, std::size_t last_row);
void write_lag_table_csv(std::ostream& out, const LagTable& table);
void write_lag_table_text(std::ostream& out, const LagTable& table);

void write_archive_csv(std::ostream& out, const BlockVector& estimates, std::size_t first_frame = 0);
void write_decay_log_csv(std::ostream& out, std::span<const UpdateRecord> log);

}  // namespace streamopt
