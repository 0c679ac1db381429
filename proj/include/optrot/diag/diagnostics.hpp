#pragma once

#include "optrot/tensor/ldl.hpp"
#include "optrot/tensor/matrix.hpp"
#include "optrot/tensor/symmetric_eigen.hpp"

#include <string>
#include <vector>

namespace optrot {

// mu_W = sqrt(mn) * max|w| / ||W||_F. Throws InvalidArgument for an
// all-zero matrix.
double weight_incoherence(const Matrix& w);

struct HessianIncoherence {
  double mu = 1.0;
  // Set when two sorted eigenvalues are closer than 1e-8 tr(H); the
  // eigenbasis (and so mu) is then not unique.
  bool degenerate = false;
};

HessianIncoherence hessian_incoherence(const SymmetricPsd& h);
HessianIncoherence hessian_incoherence(const EigenDecomposition& eig, double trace);

// tr((W_hat - W) H (W_hat - W)^T).
double layerwise_error(const Matrix& w, const Matrix& w_hat, const SymmetricPsd& h);

// UB = tr(H) - ||H||_off^2 / (2 tr H).
double ub_bound(const SymmetricPsd& h);

// sum_i sqrt(max(lambda_i, 0)).
double trace_sqrt(const EigenDecomposition& eig);

// mu_W^2 / (2^b - 1)^2 * lambda_max(H) * ||W||_F^2.
double rtn_error_bound(const Matrix& w, const SymmetricPsd& h, int bits);
double rtn_error_bound(const Matrix& w, double lambda_max, int bits);

struct GptqBounds {
  double trace_bound = 0.0;        // uses tr(H L^T L), (1/2) log(2mn/delta)
  double ub_bound = 0.0;           // tr(H L^T L) replaced by 2 UB
  double incoherence_bound = 0.0;  // mu_H^2 tr(H^{1/2})^2 / n form, log(4mn/delta)^2
};

// Requires bits >= 3 and delta in (0, 1). `l` should be the constrained
// LDL at c = 2 / log(4mn/delta).
GptqBounds gptq_error_bounds(const Matrix& w, const SymmetricPsd& h, const ConstrainedLdl& l,
                             int bits, double delta);
GptqBounds gptq_error_bounds(const Matrix& w, const SymmetricPsd& h, const ConstrainedLdl& l,
                             const EigenDecomposition& eig, int bits, double delta);

// max_i ||L e_i||^2.
double correction_max(const ConstrainedLdl& l);
double correction_max(const LdlFactors& f);

struct Snr {
  double db = 0.0;
  bool exact = false;  // zero error; db is left at 0 and must be ignored

  std::string to_string() const;
};

// 10 log10(tr(W H W^T) / layerwise_error). Throws InvalidArgument when
// the signal is zero.
Snr snr_db(const Matrix& w, const Matrix& w_hat, const SymmetricPsd& h);

struct LayerError {
  const Matrix* w;
  const Matrix* w_hat;
  const SymmetricPsd* h;
};

// Sum of layerwise errors.
double kl_proxy(const std::vector<LayerError>& layers);

struct BoundReport {
  std::string layer;
  double mu_w = 0.0;
  double mu_h = 0.0;
  bool mu_h_degenerate = false;
  double w_max = 0.0;
  double frob_sq = 0.0;
  double tr_h = 0.0;
  double tr_d = 0.0;
  double ub = 0.0;
  double off_diag_sq = 0.0;
  double rtn_bound = 0.0;
  double gptq_trace_bound = 0.0;
  double gptq_ub_bound = 0.0;
  double gptq_incoherence_bound = 0.0;
  double actual_error = 0.0;
  Snr snr;
};

// Fills every field of a report for one quantized layer. The GPTQ bounds
// use bits (>= 3) and delta; for bits = 2 they are reported as NaN.
BoundReport make_bound_report(const std::string& layer, const Matrix& w, const Matrix& w_hat,
                              const SymmetricPsd& h, int bits, double delta);

// Column order of the CSV form, fixed.
const std::vector<std::string>& bound_report_columns();
std::string bound_reports_csv(const std::vector<BoundReport>& reports);
std::string bound_reports_json(const std::vector<BoundReport>& reports);

// Shortest round-trip decimal form of a double ("nan", "inf", "-inf" for
// non-finite values).
std::string format_double(double v);

}  // namespace optrot
