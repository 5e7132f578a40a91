#include "streamopt/synthetic.hpp"

#include <cmath>
#include <stdexcept>

namespace streamopt {

Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

Vector gaussian_vector(Index size, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vector v(size);
  for (Index i = 0; i < size; ++i) v(i) = normal(rng);
  return v;
}

namespace {

Matrix orthonormal_columns(Index m, Index n, std::mt19937_64& rng) {
  const Matrix g = gaussian_matrix(m, n, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(m, n);
}

}  // namespace

std::vector<LsBatch> make_synthetic_stream(const SyntheticStreamConfig& config) {
  if (config.n <= 0 || config.m_min < config.n || config.m_max < config.m_min)
    throw std::invalid_argument("synthetic stream needs n ≥ 1 and n ≤ m_min ≤ m_max");
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<Index> rows(config.m_min, config.m_max);
  std::vector<LsBatch> batches;
  batches.reserve(config.frames);
  Vector previous;
  for (std::size_t t = 0; t < config.frames; ++t) {
    const Index m = rows(rng);
    LsBatch batch;
    batch.t = t;
    batch.a = orthonormal_columns(m, config.n, rng);
    const Vector x = gaussian_vector(config.n, rng);
    batch.y = batch.a * x + config.noise * gaussian_vector(m, rng);
    if (t > 0) {
      batch.b = config.coupling / std::sqrt(static_cast<double>(m)) * gaussian_matrix(m, config.n, rng);
      batch.y += batch.b * previous;
    }
    previous = x;
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::vector<LsBatch> make_decoupled_stream(Index n, Index m, std::size_t frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<LsBatch> batches;
  for (std::size_t t = 0; t < frames; ++t) {
    LsBatch batch;
    batch.t = t;
    batch.a = orthonormal_columns(m, n, rng);
    batch.y = gaussian_vector(m, rng);
    if (t > 0) batch.b = Matrix::Zero(m, n);
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace streamopt
