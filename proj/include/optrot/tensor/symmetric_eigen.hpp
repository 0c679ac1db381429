#pragma once

#include "optrot/tensor/matrix.hpp"

namespace optrot {

struct EigenDecomposition {
  Matrix q;        // orthogonal, column j is the eigenvector of lambdas(j)
  Vector lambdas;  // sorted descending
  int sweeps = 0;

  Matrix reconstruct() const;
};

// Cyclic Jacobi eigensolver. Sweeps until the off-diagonal Frobenius norm
// is at most 1e-12 * ||H||_F; throws ConvergenceError after 100 sweeps.
EigenDecomposition jacobi_eigh(const Matrix& h);
EigenDecomposition jacobi_eigh(const SymmetricPsd& h);

}  // namespace optrot
