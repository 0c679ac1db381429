#include "optrot/quant/brute_force.hpp"

#include "optrot/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace optrot {

BruteForceResult brute_force_optimal(const Vector& w_row, const SymmetricPsd& h,
                                     const QuantConfig& cfg) {
  const std::size_t n = static_cast<std::size_t>(w_row.size());
  cfg.validate(n);
  if (h.dim() != n) throw InvalidArgument("Hessian dimension does not match row length");
  if (static_cast<double>(cfg.bits) * static_cast<double>(n) > 20.0) {
    throw InvalidArgument("search space (2^b)^n exceeds 2^20");
  }
  require_finite(w_row, "brute_force_optimal row");
  const double s = std::max(w_row.cwiseAbs().maxCoeff(), QuantConfig::kScaleFloor);
  const int levels = cfg.max_code() + 1;
  std::vector<double> value(static_cast<std::size_t>(levels));
  for (int q = 0; q < levels; ++q) value[q] = from_code_space(q, s, cfg.bits, cfg.grid);

  const Matrix& hm = h.matrix();
  std::vector<int> codes(n, 0);
  BruteForceResult best;
  best.error = std::numeric_limits<double>::infinity();
  Vector e(static_cast<Eigen::Index>(n));
  while (true) {
    for (std::size_t j = 0; j < n; ++j) e(j) = value[codes[j]] - w_row(j);
    const double err = e.dot(hm * e);
    if (err < best.error) {
      best.error = err;
      best.codes = codes;
    }
    std::size_t k = 0;
    while (k < n && ++codes[k] == levels) codes[k++] = 0;
    if (k == n) break;
  }
  return best;
}

}  // namespace optrot
