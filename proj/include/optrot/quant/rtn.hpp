#pragma once

#include "optrot/quant/quant_config.hpp"

namespace optrot {

// Round-to-nearest: every element is mapped to the closest code of its
// group's grid and dequantized. Requires cfg.rounding == kNearest.
QuantizedWeight rtn_quantize(const Matrix& w, const QuantConfig& cfg);

// Dequantizes codes with the given scales (inverse of the grid map).
Matrix dequantize(const CodeMatrix& codes, const Matrix& scales, const QuantConfig& cfg);

}  // namespace optrot
