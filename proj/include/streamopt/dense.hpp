#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <utility>
#include <vector>

namespace streamopt {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using BlockVector = std::vector<Vector>;

struct PowerIterationOptions {
  double tolerance = 1e-10;
  int max_iterations = 10000;
};

// Largest singular value by power iteration on AᵀA.
double spectral_norm(const Matrix& a, PowerIterationOptions options = {});

struct EigenRange {
  double min;
  double max;
};

EigenRange symmetric_eigen_range(const Matrix& s);

// ‖S − Sᵀ‖_F / ‖S‖_F, zero for the zero matrix.
double relative_asymmetry(const Matrix& s);

// Schur complement of the leading k×k block of a symmetric matrix, using a
// pseudo-inverse so that structurally zero directions are tolerated.
Matrix trailing_schur_complement(const Matrix& s, Index k);

Vector stack(const BlockVector& blocks);
BlockVector unstack(const Vector& flat, Index n);

double norm(const BlockVector& blocks);
double max_block_norm(const BlockVector& blocks);

// max_t ‖a_t − b_t‖ / max(‖b‖_∞-block, tiny)
double max_relative_block_error(const BlockVector& a, const BlockVector& b);

}  // namespace streamopt
