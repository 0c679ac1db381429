#pragma once

#include "optrot/tensor/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <string>

namespace optrot {

enum class Rounding { kNearest, kStochastic };

// kStandard: g(x; s) = (2^b - 1)/2 (x/s + 1), codes 0..2^b-1.
// kShrunk:   g(x; s) = (2^b - 3)/2 (x/s + 1) + 1, which maps [-s, s] onto
//            [1, 2^b - 2] and leaves one spare code on each side. The two
//            outer codes dequantize to +-s (1 + 2/(2^b - 3)).
enum class Grid { kStandard, kShrunk };

const char* rounding_name(Rounding r);
const char* grid_name(Grid g);
Rounding parse_rounding(const std::string& name);
Grid parse_grid(const std::string& name);

struct QuantConfig {
  static constexpr double kScaleFloor = 1e-12;

  int bits = 4;
  // Contiguous input-dimension weights sharing one scale; 0 means one
  // scale per row.
  std::size_t group_size = 0;
  Rounding rounding = Rounding::kNearest;
  Grid grid = Grid::kStandard;
  std::uint64_t seed = 0;

  int max_code() const { return (1 << bits) - 1; }
  std::size_t effective_group(std::size_t row_length) const {
    return group_size == 0 ? row_length : group_size;
  }
  // Throws InvalidArgument for bits outside [2, 8], the shrunk grid below
  // 3 bits, or a group size that does not divide the row length.
  void validate(std::size_t row_length) const;
};

// Affine map into code space and its inverse.
double to_code_space(double x, double scale, int bits, Grid grid);
double from_code_space(double code, double scale, int bits, Grid grid);

using CodeMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct QuantizedWeight {
  CodeMatrix codes;
  Matrix scales;  // rows x (cols / group)
  Matrix dequantized;
  QuantConfig config;
};

// Per-row, per-group max |w| with the all-zero floor applied.
Matrix group_scales(const Matrix& w, const QuantConfig& cfg);

}  // namespace optrot
