#include "optrot/quant/quant_config.hpp"

#include "optrot/error.hpp"

#include <algorithm>
#include <cmath>

namespace optrot {

const char* rounding_name(Rounding r) {
  return r == Rounding::kNearest ? "nearest" : "stochastic";
}

const char* grid_name(Grid g) { return g == Grid::kStandard ? "standard" : "shrunk"; }

Rounding parse_rounding(const std::string& name) {
  if (name == "nearest") return Rounding::kNearest;
  if (name == "stochastic") return Rounding::kStochastic;
  throw InvalidArgument("unknown rounding mode '" + name + "'");
}

Grid parse_grid(const std::string& name) {
  if (name == "standard") return Grid::kStandard;
  if (name == "shrunk") return Grid::kShrunk;
  throw InvalidArgument("unknown grid '" + name + "'");
}

void QuantConfig::validate(std::size_t row_length) const {
  if (bits < 2 || bits > 8) {
    throw InvalidArgument("bits must be in [2, 8], got " + std::to_string(bits));
  }
  if (grid == Grid::kShrunk && bits < 3) {
    throw InvalidArgument("the shrunk grid needs at least 3 bits");
  }
  if (row_length == 0) throw InvalidArgument("cannot quantize an empty row");
  if (group_size != 0 && row_length % group_size != 0) {
    throw InvalidArgument("group size " + std::to_string(group_size) +
                          " does not divide row length " + std::to_string(row_length));
  }
}

double to_code_space(double x, double scale, int bits, Grid grid) {
  const double levels = static_cast<double>((1 << bits) - 1);
  if (grid == Grid::kStandard) return levels / 2.0 * (x / scale + 1.0);
  return (levels - 2.0) / 2.0 * (x / scale + 1.0) + 1.0;
}

double from_code_space(double code, double scale, int bits, Grid grid) {
  const double levels = static_cast<double>((1 << bits) - 1);
  if (grid == Grid::kStandard) return scale * (2.0 * code / levels - 1.0);
  return scale * (2.0 * (code - 1.0) / (levels - 2.0) - 1.0);
}

Matrix group_scales(const Matrix& w, const QuantConfig& cfg) {
  const std::size_t cols = static_cast<std::size_t>(w.cols());
  cfg.validate(cols);
  const std::size_t group = cfg.effective_group(cols);
  const Eigen::Index groups = static_cast<Eigen::Index>(cols / group);
  Matrix scales(w.rows(), groups);
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index g = 0; g < groups; ++g) {
      const double s = w.row(i)
                           .segment(g * static_cast<Eigen::Index>(group),
                                    static_cast<Eigen::Index>(group))
                           .cwiseAbs()
                           .maxCoeff();
      scales(i, g) = std::max(s, QuantConfig::kScaleFloor);
    }
  }
  return scales;
}

}  // namespace optrot
