#pragma once

#include "streamopt/stream_ls.hpp"

#include <cstdint>
#include <random>

namespace streamopt {

struct SyntheticStreamConfig {
  Index n = 4;
  Index m_min = 12;
  Index m_max = 12;
  std::size_t frames = 21;
  // Scale of B_t relative to A_t; small values give diagonally dominant systems.
  double coupling = 0.15;
  double noise = 0.1;
  std::uint64_t seed = 1;
};

// Random stream with y_t = B_t x_{t−1} + A_t x_t + noise for a random
// trajectory x. A_t has orthonormal-ish columns scaled to unit norm.
std::vector<LsBatch> make_synthetic_stream(const SyntheticStreamConfig& config);

// Batches with B_t = 0 and A_t with orthonormal columns.
std::vector<LsBatch> make_decoupled_stream(Index n, Index m, std::size_t frames, std::uint64_t seed);

Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng);
Vector gaussian_vector(Index size, std::mt19937_64& rng);

}  // namespace streamopt
