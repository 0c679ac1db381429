#include "optrot/quant/gptq.hpp"

#include "optrot/error.hpp"
#include "optrot/parallel.hpp"
#include "optrot/quant/rtn.hpp"
#include "optrot/tensor/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace optrot {

namespace {

constexpr std::uint64_t kRowStreamBase = 0x6A09E667ULL;

void check_shapes(const Matrix& w, Eigen::Index n) {
  if (w.cols() != n) {
    throw InvalidArgument("weight input dimension " + std::to_string(w.cols()) +
                          " does not match Hessian dimension " + std::to_string(n));
  }
}

}  // namespace

QuantizedWeight error_feedback_quantize(const Matrix& w, const Matrix& correction,
                                        const QuantConfig& cfg, int threads) {
  require_finite(w, "quantizer weights");
  const Eigen::Index n = w.cols();
  if (correction.rows() != n || correction.cols() != n) {
    throw InvalidArgument("correction matrix must be n x n with n = weight input dimension");
  }
  QuantizedWeight out;
  out.config = cfg;
  out.scales = group_scales(w, cfg);
  out.codes.resize(w.rows(), n);
  const Eigen::Index group = static_cast<Eigen::Index>(cfg.effective_group(n));
  const double max_code = cfg.max_code();

  parallel_for(static_cast<std::size_t>(w.rows()), threads, [&](std::size_t row) {
    const Eigen::Index i = static_cast<Eigen::Index>(row);
    Rng rng = make_rng(cfg.seed, kRowStreamBase + row);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    // acc(j) = sum_{k<j} e_k C(k, j), updated as each column is finalized.
    Vector acc = Vector::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double s = out.scales(i, j / group);
      const double t =
          std::clamp(to_code_space(w(i, j) + acc(j), s, cfg.bits, cfg.grid), 0.0, max_code);
      double code;
      if (cfg.rounding == Rounding::kNearest) {
        code = std::nearbyint(t);
      } else {
        const double lo = std::floor(t);
        code = (lo < max_code && uniform(rng) < t - lo) ? lo + 1.0 : lo;
      }
      out.codes(i, j) = static_cast<std::int32_t>(code);
      const double e = w(i, j) - from_code_space(code, s, cfg.bits, cfg.grid);
      if (e != 0.0 && j + 1 < n) {
        acc.tail(n - j - 1) += e * correction.row(j).tail(n - j - 1).transpose();
      }
    }
  });
  out.dequantized = dequantize(out.codes, out.scales, cfg);
  return out;
}

QuantizedWeight gptq_quantize(const Matrix& w, const SymmetricPsd& h, const QuantConfig& cfg,
                              int threads) {
  if (cfg.rounding != Rounding::kNearest) {
    throw InvalidArgument("gptq_quantize requires nearest rounding");
  }
  check_shapes(w, static_cast<Eigen::Index>(h.dim()));
  const LdlFactors f = ldl_upper(h);
  return error_feedback_quantize(w, f.u, cfg, threads);
}

double gptqs_c(std::size_t rows, std::size_t cols, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  if (rows == 0 || cols == 0) throw InvalidArgument("empty weight matrix");
  return 2.0 / std::log(4.0 * static_cast<double>(rows) * static_cast<double>(cols) / delta);
}

QuantizedWeight gptqs_quantize(const Matrix& w, const SymmetricPsd& h, const QuantConfig& cfg,
                               double delta, int threads) {
  if (cfg.rounding != Rounding::kStochastic || cfg.grid != Grid::kShrunk) {
    throw InvalidArgument("gptqs_quantize requires stochastic rounding on the shrunk grid");
  }
  check_shapes(w, static_cast<Eigen::Index>(h.dim()));
  const double c = gptqs_c(static_cast<std::size_t>(w.rows()),
                           static_cast<std::size_t>(w.cols()), delta);
  return gptqs_quantize(w, constrained_ldl(h, c), cfg, threads);
}

QuantizedWeight gptqs_quantize(const Matrix& w, const ConstrainedLdl& factors,
                               const QuantConfig& cfg, int threads) {
  if (cfg.grid != Grid::kShrunk) throw InvalidArgument("GPTQS uses the shrunk grid");
  check_shapes(w, factors.l_inv.rows());
  Matrix correction = factors.l_inv;
  correction.diagonal().setZero();
  return error_feedback_quantize(w, correction, cfg, threads);
}

}  // namespace optrot
