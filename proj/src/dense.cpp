#include "streamopt/dense.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace streamopt {

double spectral_norm(const Matrix& a, PowerIterationOptions options) {
  if (a.size() == 0 || a.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  Vector x(a.cols());
  for (Index i = 0; i < x.size(); ++i) x(i) = unif(rng);
  x.normalize();
  double estimate = 0.0;
  for (int it = 0; it < options.max_iterations; ++it) {
    Vector y = a.transpose() * (a * x);
    const double next = y.norm();
    if (next == 0.0) return 0.0;
    x = y / next;
    if (std::abs(next - estimate) <= options.tolerance * next) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  return std::sqrt(estimate);
}

EigenRange symmetric_eigen_range(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(s, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  return {ev.minCoeff(), ev.maxCoeff()};
}

double relative_asymmetry(const Matrix& s) {
  const double scale = s.norm();
  if (scale == 0.0) return 0.0;
  return (s - s.transpose()).norm() / scale;
}

Matrix trailing_schur_complement(const Matrix& s, Index k) {
  const Index m = s.rows() - k;
  if (k == 0) return s;
  const Matrix lead = s.topLeftCorner(k, k);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(lead);
  const auto& ev = solver.eigenvalues();
  const double cutoff = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  Vector inv = Vector::Zero(k);
  for (Index i = 0; i < k; ++i)
    if (ev(i) > cutoff) inv(i) = 1.0 / ev(i);
  const Matrix& basis = solver.eigenvectors();
  const Matrix pinv = basis * inv.asDiagonal() * basis.transpose();
  const Matrix cross = s.bottomLeftCorner(m, k);
  Matrix schur = s.bottomRightCorner(m, m) - cross * pinv * cross.transpose();
  return 0.5 * (schur + schur.transpose());
}

Vector stack(const BlockVector& blocks) {
  Index total = 0;
  for (const auto& b : blocks) total += b.size();
  Vector flat(total);
  Index offset = 0;
  for (const auto& b : blocks) {
    flat.segment(offset, b.size()) = b;
    offset += b.size();
  }
  return flat;
}

BlockVector unstack(const Vector& flat, Index n) {
  if (n <= 0 || flat.size() % n != 0)
    throw std::invalid_argument("unstack: length is not a multiple of the block size");
  BlockVector blocks;
  blocks.reserve(static_cast<std::size_t>(flat.size() / n));
  for (Index offset = 0; offset < flat.size(); offset += n) blocks.emplace_back(flat.segment(offset, n));
  return blocks;
}

double norm(const BlockVector& blocks) {
  double sum = 0.0;
  for (const auto& b : blocks) sum += b.squaredNorm();
  return std::sqrt(sum);
}

double max_block_norm(const BlockVector& blocks) {
  double m = 0.0;
  for (const auto& b : blocks) m = std::max(m, b.norm());
  return m;
}

double max_relative_block_error(const BlockVector& a, const BlockVector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("block count mismatch");
  const double scale = std::max(max_block_norm(b), 1e-300);
  double worst = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t].size() != b[t].size()) throw std::invalid_argument("block size mismatch");
    worst = std::max(worst, (a[t] - b[t]).norm() / scale);
  }
  return worst;
}

}  // namespace streamopt
