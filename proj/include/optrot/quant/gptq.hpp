#pragma once

#include "optrot/quant/quant_config.hpp"
#include "optrot/tensor/ldl.hpp"

namespace optrot {

// Sequential error-feedback quantization of every row:
//   w_hat = Q(w + (w - w_hat) C)
// with C strictly upper triangular, processed in ascending column order.
// Corrected values are clamped to the code range [0, 2^b - 1] before
// rounding. Group scales are frozen from the input weights. Rows are
// independent and are spread over `threads` workers; stochastic rounding
// draws from a per-row stream derived from cfg.seed.
QuantizedWeight error_feedback_quantize(const Matrix& w, const Matrix& correction,
                                        const QuantConfig& cfg, int threads = 1);

// GPTQ with C = U from ldl_upper(h). Requires nearest rounding.
QuantizedWeight gptq_quantize(const Matrix& w, const SymmetricPsd& h, const QuantConfig& cfg,
                              int threads = 1);

// Constraint level c = 2 / log(4 m n / delta) used by GPTQS.
double gptqs_c(std::size_t rows, std::size_t cols, double delta);

// GPTQS: constrained LDL at gptqs_c(m, n, delta), C = L^{-1} - I, shrunk
// grid, stochastic rounding.
QuantizedWeight gptqs_quantize(const Matrix& w, const SymmetricPsd& h, const QuantConfig& cfg,
                               double delta, int threads = 1);

// GPTQS with precomputed factors. Nearest rounding is accepted here so
// the stochastic step can be switched off in tests.
QuantizedWeight gptqs_quantize(const Matrix& w, const ConstrainedLdl& factors,
                               const QuantConfig& cfg, int threads = 1);

}  // namespace optrot
