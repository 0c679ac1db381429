#pragma once

#include "optrot/tensor/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace optrot {

constexpr bool is_power_of_two(std::size_t n) noexcept { return n > 0 && (n & (n - 1)) == 0; }

// Sylvester Hadamard matrix scaled by 1/sqrt(n). Throws InvalidArgument
// unless n is a power of two.
Matrix hadamard_orthonormal(std::size_t n);

// The +-1 sign pattern used by randomized_hadamard for (n, seed).
std::vector<double> random_signs(std::size_t n, std::uint64_t seed);

// diag(s) * hadamard_orthonormal(n) with s = random_signs(n, seed).
Matrix randomized_hadamard(std::size_t n, std::uint64_t seed);

// In-place fast Walsh-Hadamard transform (Sylvester ordering). With
// normalize set the result equals hadamard_orthonormal(n) * v.
void fwht_in_place(std::span<double> v, bool normalize = true);

// Applies the transform to every row of m.
void fwht_rows(Matrix& m, bool normalize = true);

}  // namespace optrot
