#pragma once

#include "streamopt/convex_frames.hpp"

#include <functional>
#include <optional>

namespace streamopt {

// Armijo backtracking from τ = 1. The comparison allows for rounding in φ so
// that steps taken at the noise floor are not rejected. Returns nullopt when
// no acceptable step is found.
std::optional<double> armijo_search(const std::function<double(double tau)>& phi_at,
                                    const std::function<bool(double tau)>& feasible_at, double phi0,
                                    double slope, const ArmijoOptions& options);

struct NewtonProblem {
  std::function<double(const Vector&)> value;
  std::function<bool(const Vector&)> in_domain;
  std::function<Vector(const Vector&)> gradient;
  // Returns s solving (approximately) ∇²φ(z) s = −g.
  std::function<Vector(const Vector& z, const Vector& g)> direction;
};

struct NewtonOutcome {
  Vector z;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::vector<double> gradient_norms;
};

// Throws ConvergenceError carrying the gradient-norm trace on failure.
NewtonOutcome damped_newton(const NewtonProblem& problem, Vector z, const NewtonOptions& options,
                            const std::string& label);

}  // namespace streamopt
