#pragma once

#include "streamopt/blocktridiag.hpp"
#include "streamopt/convex_frames.hpp"

#include <random>

namespace streamopt::testing {

// Symmetric block-tridiagonal system with H_t = κ(I + D_t), ‖D_t‖ = δ and
// ‖E_t‖ = κθ exactly.
inline BlockTridiagSystem random_system(Index n, std::size_t frames, double kappa, double delta, double theta,
                                        std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  auto random_matrix = [&] {
    Matrix m(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) m(i, j) = gauss(rng);
    return m;
  };
  BlockTridiagSystem s;
  s.n = n;
  for (std::size_t t = 0; t < frames; ++t) {
    Matrix d = random_matrix();
    d = 0.5 * (d + d.transpose()).eval();
    const double dn = d.jacobiSvd().singularValues()(0);
    if (dn > 0.0) d *= delta / dn;
    s.diag.push_back(kappa * (Matrix::Identity(n, n) + d));
    Vector g(n);
    for (Index i = 0; i < n; ++i) g(i) = gauss(rng);
    s.rhs.push_back(g);
    if (t + 1 < frames) {
      Matrix e = random_matrix();
      e *= kappa * theta / e.jacobiSvd().singularValues()(0);
      s.offdiag.push_back(e);
    }
  }
  return s;
}

inline Vector random_vector(Index n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

inline double relative_error(const Vector& a, const Vector& b) {
  const double scale = std::max(b.norm(), 1e-300);
  return (a - b).norm() / scale;
}

// Central differences of the stacked gradient and of the joint Hessian.
struct DerivativeErrors {
  double gradient = 0.0;
  double hessian = 0.0;
};

inline DerivativeErrors finite_difference_errors(const FrameLoss& f, const Vector& prev, const Vector& cur,
                                                 double step = 1e-6) {
  const Index n = f.dim();
  Vector z(2 * n);
  z << prev, cur;
  auto value = [&](const Vector& w) { return f.value(w.head(n), w.tail(n)); };
  auto grad = [&](const Vector& w) { return f.gradient(w.head(n), w.tail(n)); };
  Vector fd_grad(2 * n);
  Matrix fd_hess(2 * n, 2 * n);
  for (Index i = 0; i < 2 * n; ++i) {
    const double h = step * std::max(1.0, std::abs(z(i)));
    Vector zp = z;
    Vector zm = z;
    zp(i) += h;
    zm(i) -= h;
    fd_grad(i) = (value(zp) - value(zm)) / (2.0 * h);
    fd_hess.col(i) = (grad(zp) - grad(zm)) / (2.0 * h);
  }
  const Vector g = grad(z);
  const Matrix hess = f.hessian(prev, cur).joint();
  DerivativeErrors out;
  out.gradient = (fd_grad - g).norm() / std::max(g.norm(), 1e-12);
  out.hessian = (fd_hess - hess).norm() / std::max(hess.norm(), 1e-12);
  return out;
}

}  // namespace streamopt::testing
