#pragma once

#include "optrot/tensor/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <random>

namespace optrot {

using Rng = std::mt19937_64;

// Generator seeded from (seed, stream) so that independent streams can be
// derived from one user seed (e.g. one per matrix row).
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng, double stddev = 1.0);

// Q factor of a seeded Gaussian matrix, with column signs chosen so that
// diag(R) > 0.
Matrix random_orthogonal(std::size_t n, std::uint64_t seed);

}  // namespace optrot
