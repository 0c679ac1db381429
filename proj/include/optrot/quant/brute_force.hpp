#pragma once

#include "optrot/quant/quant_config.hpp"

#include <vector>

namespace optrot {

struct BruteForceResult {
  std::vector<int> codes;
  double error = 0.0;  // (w_hat - w) H (w_hat - w)^T
};

// Exhaustive search over every code assignment of one row with the scale
// fixed at max |w|. Rejects instances with (2^b)^n > 2^20.
BruteForceResult brute_force_optimal(const Vector& w_row, const SymmetricPsd& h,
                                     const QuantConfig& cfg);

}  // namespace optrot
