#pragma once

#include "optrot/tensor/matrix.hpp"

namespace optrot {

// H = (U + I) diag(d) (U + I)^T with U strictly upper triangular.
struct LdlFactors {
  Matrix u;
  Vector d;

  // L = (U + I)^{-1}, unit upper triangular.
  Matrix l() const;
  Matrix reconstruct() const;
  double trace_d() const { return d.sum(); }
};

// Upper-convention LDL of a PSD matrix. Computed by reversing the index
// order, running a square-root-free Cholesky, and reversing back. Pivots
// within tolerance of zero are clamped to zero (their column is dropped);
// a pivot below -1e-8 * tr(H) throws FactorizationError carrying the
// pivot's index in the original ordering.
LdlFactors ldl_upper(const SymmetricPsd& h);

// Solution of
//   minimize tr(H L^T L) over unit upper triangular L
//   subject to ||L e_i||^2 <= 1 + c for every column i.
struct ConstrainedLdl {
  Matrix l;
  Matrix l_inv;  // L^{-1}; exactly U + I when the true LDL was feasible
  double c = 0.0;
  double objective = 0.0;
  bool is_true_ldl = false;
  int passes = 0;
};

// tr(H L^T L).
double ldl_objective(const Matrix& h, const Matrix& l);

// The feasible starting point L = I - (alpha / tr H) * strict_upper(H),
// alpha = min(1, sqrt(c)).
Matrix constrained_ldl_candidate(const SymmetricPsd& h, double c);

// Returns the true LDL inverse when it satisfies the column caps. Otherwise
// starts from constrained_ldl_candidate and runs cyclic block coordinate
// descent over columns; each column update is an exact projection onto the
// norm ball. Stops when the relative objective change drops below 1e-9 or
// after 200 passes.
ConstrainedLdl constrained_ldl(const SymmetricPsd& h, double c);

}  // namespace optrot
