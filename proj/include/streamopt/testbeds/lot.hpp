#pragma once

#include "streamopt/convex_frames.hpp"
#include "streamopt/stream_ls.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace streamopt::lot {

struct LotConfig {
  Index basis_per_frame = 75;
  double eta = 0.25;
  std::size_t frames = 16;
  double sample_begin = -0.25;
  double sample_end = 16.25;
  std::vector<double> levels = default_levels();
  std::uint64_t signal_seed = 1;
  double sinc_spacing = 1.0 / 64.0;
  double sinc_begin = -5.0;
  double sinc_end = 21.0;
  double grid_spacing = 1e-3;
  double bisection_tolerance = 1e-10;
  // Ridge weight; the provisional first pivot sees only part of frame 0's support.
  double gamma = 1e-6;

  double frame_length() const { return (sample_end - sample_begin) / static_cast<double>(frames); }
  double frame_start(std::size_t k) const { return sample_begin + static_cast<double>(k) * frame_length(); }
  void validate() const;

  // 16 levels −2.5 + j·5/16.
  static std::vector<double> default_levels();
};

// Σ hᵢ sinc((t − tᵢ)/spacing) with standard-normal heights on a uniform grid.
class SincSignal {
 public:
  SincSignal(std::vector<double> heights, double first_knot, double spacing);
  static SincSignal random(const LotConfig& config);

  double operator()(double t) const;
  const std::vector<double>& heights() const { return heights_; }

 private:
  std::vector<double> heights_;
  double first_;
  double spacing_;
};

// Windowed cosine-IV bundles; frame k spans [a_k, a_{k+1}] with transitions of
// half-width η around each a_k.
class LotBasis {
 public:
  explicit LotBasis(const LotConfig& config);

  Index size() const { return n_; }
  std::size_t frames() const { return frames_; }
  double frame_start(std::size_t k) const;
  double support_begin(std::size_t k) const { return frame_start(k) - eta_; }
  double support_end(std::size_t k) const { return frame_start(k + 1) + eta_; }
  double window(std::size_t k, double t) const;
  double value(std::size_t k, Index i, double t) const;
  // Row of all N functions of frame k at t.
  void evaluate(std::size_t k, double t, double* out) const;
  Vector evaluate(std::size_t k, double t) const;
  double frame_length() const { return length_; }
  double eta() const { return eta_; }

 private:
  Index n_;
  std::size_t frames_;
  double origin_;
  double length_;
  double eta_;
};

// Smooth rising cut: 0 below −1, 1 above 1, r(u)² + r(−u)² = 1.
double rising_cut(double u);

struct Crossing {
  double time = 0.0;
  double level = 0.0;
};

struct CrossingScan {
  std::vector<Crossing> crossings;
  std::size_t tangencies = 0;
};

// Sign changes of signal − level on a uniform grid refined by bisection.
CrossingScan find_crossings(const std::function<double(double)>& signal, double begin, double end,
                            const std::vector<double>& levels, double grid_spacing, double tolerance,
                            Execution exec = Execution::Parallel);

// Batch k holds crossings in [a_k − η, a_{k+1} − η) (the first from the
// sample start, the last through the sample end).
std::vector<LsBatch> pack_batches(const LotConfig& config, const LotBasis& basis,
                                  const std::vector<Crossing>& crossings, Execution exec = Execution::Parallel);

struct LotStream {
  LotConfig config;
  SincSignal signal;
  CrossingScan scan;
  std::vector<LsBatch> batches;
};

LotStream generate_lot_stream(const LotConfig& config, Execution exec = Execution::Parallel);

struct OrthonormalityCheck {
  double max_deviation = 0.0;
  double max_self_deviation = 0.0;
  double max_cross_magnitude = 0.0;
};

// Composite Gauss–Legendre with panels aligned to the transition points.
OrthonormalityCheck lot_basis_orthonormality(const LotConfig& config, std::size_t points_per_frame = 10000);
double inner_product(const LotBasis& basis, std::size_t k1, Index i1, std::size_t k2, Index i2,
                     std::size_t points_per_frame = 10000);

}  // namespace streamopt::lot
