#include "optrot/tensor/hadamard.hpp"

#include "optrot/error.hpp"
#include "optrot/tensor/random.hpp"

#include <bit>
#include <cmath>
#include <string>

namespace optrot {
namespace {

void require_power_of_two(std::size_t n, const char* what) {
  if (!is_power_of_two(n)) {
    throw InvalidArgument(std::string(what) + ": size " + std::to_string(n) +
                          " is not a power of two");
  }
}

}  // namespace

Matrix hadamard_orthonormal(std::size_t n) {
  require_power_of_two(n, "hadamard_orthonormal");
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  Matrix h(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      h(i, j) = (std::popcount(i & j) & 1U) ? -scale : scale;
    }
  }
  return h;
}

std::vector<double> random_signs(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x5157u);
  std::vector<double> signs(n);
  for (auto& s : signs) s = (rng() >> 63) ? -1.0 : 1.0;
  return signs;
}

Matrix randomized_hadamard(std::size_t n, std::uint64_t seed) {
  Matrix h = hadamard_orthonormal(n);
  const auto signs = random_signs(n, seed);
  for (std::size_t i = 0; i < n; ++i) h.row(i) *= signs[i];
  return h;
}

void fwht_in_place(std::span<double> v, bool normalize) {
  const std::size_t n = v.size();
  require_power_of_two(n, "fwht_in_place");
  for (std::size_t half = 1; half < n; half *= 2) {
    for (std::size_t i = 0; i < n; i += 2 * half) {
      for (std::size_t j = i; j < i + half; ++j) {
        const double x = v[j];
        const double y = v[j + half];
        v[j] = x + y;
        v[j + half] = x - y;
      }
    }
  }
  if (normalize) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& x : v) x *= scale;
  }
}

void fwht_rows(Matrix& m, bool normalize) {
  const auto cols = static_cast<std::size_t>(m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    fwht_in_place(std::span<double>(m.row(r).data(), cols), normalize);
  }
}

}  // namespace optrot
