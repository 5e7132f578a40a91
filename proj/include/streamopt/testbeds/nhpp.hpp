#pragma once

#include "streamopt/convex_frames.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace streamopt::nhpp {

struct SplineNhppConfig {
  int spline_order = 2;
  Index basis_per_frame = 8;
  double frame_length = 1.0;
  // Number of losses T; coefficients span frames 0..T.
  std::size_t frames = 40;
  std::uint64_t rate_seed = 1;
  std::uint64_t event_seed = 2;
  double rate_floor = 60.0;
  int bumps_min = 3;
  int bumps_max = 6;
  double amplitude_min = 20.0;
  double amplitude_max = 120.0;
  double width_min = 0.5;
  double width_max = 3.0;
  // Declared coefficient box, as multiples of the floor and of the rate bound.
  double box_lo_factor = 0.25;
  double box_hi_factor = 2.0;

  double knot_spacing() const { return frame_length / static_cast<double>(basis_per_frame); }
  // Events are observed on [0, horizon()].
  double horizon() const;
  void validate() const;
};

// λ(t) = floor + Σ A_j exp(−(t − c_j)²/(2 w_j²)).
class GaussianBumpIntensity {
 public:
  struct Bump {
    double amplitude;
    double center;
    double width;
  };

  GaussianBumpIntensity(double floor, std::vector<Bump> bumps);
  static GaussianBumpIntensity random(const SplineNhppConfig& config);

  double operator()(double t) const;
  double upper_bound() const;
  double floor() const { return floor_; }
  const std::vector<Bump>& bumps() const { return bumps_; }

 private:
  double floor_;
  std::vector<Bump> bumps_;
};

class BoundViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Lewis–Shedler thinning on [begin, end).
std::vector<double> simulate_nhpp(const std::function<double(double)>& rate, double rate_bound, double begin,
                                  double end, std::mt19937_64& rng);

// Order-2 B-spline (hat) centred at g·h.
double hat(std::size_t g, double h, double t);
// ∫_lo^hi hat_g(t) dt in closed form.
double hat_integral(std::size_t g, double h, double lo, double hi);

struct EventBatch {
  std::size_t k = 0;
  double begin = 0.0;
  double end = 0.0;
  std::vector<double> events;
  Vector a;
  Vector b;
  Matrix c;
  Matrix d;
};

// Batches k = 1..T. Batch k covers [c_{kN−1}, c_{(k+1)N−1}); batch 1 also
// covers [0, c_{N−1}) for frame 0.
std::vector<EventBatch> build_event_batches(const SplineNhppConfig& config, const std::vector<double>& events);

// ⟨x_k, a⟩ + ⟨x_{k−1}, b⟩ − Σ_m log(⟨x_k, c_m⟩ + ⟨x_{k−1}, d_m⟩).
class NhppFrameLoss final : public FrameLoss {
 public:
  NhppFrameLoss(EventBatch batch, bool owns_prev, DomainBox box);

  Index dim() const override { return batch_.a.size(); }
  double value(const Vector& prev, const Vector& cur) const override;
  Vector gradient(const Vector& prev, const Vector& cur) const override;
  HessianBlocks hessian(const Vector& prev, const Vector& cur) const override;
  CurvatureBounds curvature() const override { return curvature_; }
  bool owns_prev() const override { return owns_prev_; }
  bool in_domain(const Vector& prev, const Vector& cur) const override;
  std::optional<DomainBox> domain_box() const override { return box_; }
  Vector interior_point() const override;

  const EventBatch& batch() const { return batch_; }

 private:
  Vector rates(const Vector& prev, const Vector& cur) const;

  EventBatch batch_;
  bool owns_prev_;
  DomainBox box_;
  CurvatureBounds curvature_;
};

std::vector<FrameLossPtr> build_nhpp_losses(const SplineNhppConfig& config, const std::vector<double>& events);

struct NhppInstance {
  SplineNhppConfig config;
  GaussianBumpIntensity intensity;
  std::vector<double> events;
  std::vector<FrameLossPtr> losses;
};

NhppInstance make_instance(const SplineNhppConfig& config);

// λ̂(t) = Σ_g x_g hat_g(t) for coefficients stored frame by frame.
double intensity_estimate(const BlockVector& coefficients, double h, double t);

// ‖λ̂₁ − λ̂₂‖ / ‖λ̂₂‖ in L² over [begin, end], exact for piecewise-linear λ̂.
double relative_l2_distance(const BlockVector& estimate, const BlockVector& reference, double h, double begin,
                            double end);

}  // namespace streamopt::nhpp
