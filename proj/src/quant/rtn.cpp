#include "optrot/quant/rtn.hpp"

#include "optrot/error.hpp"

#include <algorithm>
#include <cmath>

namespace optrot {

QuantizedWeight rtn_quantize(const Matrix& w, const QuantConfig& cfg) {
  if (cfg.rounding != Rounding::kNearest) {
    throw InvalidArgument("rtn_quantize only supports nearest rounding");
  }
  require_finite(w, "rtn_quantize weights");
  QuantizedWeight out;
  out.config = cfg;
  out.scales = group_scales(w, cfg);
  const Eigen::Index group = static_cast<Eigen::Index>(cfg.effective_group(w.cols()));
  const double max_code = cfg.max_code();
  out.codes.resize(w.rows(), w.cols());
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      const double t = to_code_space(w(i, j), out.scales(i, j / group), cfg.bits, cfg.grid);
      out.codes(i, j) = static_cast<std::int32_t>(std::clamp(std::nearbyint(t), 0.0, max_code));
    }
  }
  out.dequantized = dequantize(out.codes, out.scales, cfg);
  return out;
}

Matrix dequantize(const CodeMatrix& codes, const Matrix& scales, const QuantConfig& cfg) {
  cfg.validate(static_cast<std::size_t>(codes.cols()));
  const Eigen::Index group = static_cast<Eigen::Index>(cfg.effective_group(codes.cols()));
  if (scales.rows() != codes.rows() || scales.cols() * group != codes.cols()) {
    throw InvalidArgument("scale matrix shape does not match codes and group size");
  }
  Matrix out(codes.rows(), codes.cols());
  for (Eigen::Index i = 0; i < codes.rows(); ++i) {
    for (Eigen::Index j = 0; j < codes.cols(); ++j) {
      out(i, j) = from_code_space(codes(i, j), scales(i, j / group), cfg.bits, cfg.grid);
    }
  }
  return out;
}

}  // namespace optrot
