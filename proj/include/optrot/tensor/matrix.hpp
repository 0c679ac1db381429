#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace optrot {

// Dense real matrix with row-major storage. Weights are stored as
// (out_features x in_features) so that a layer computes y = W x.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

bool all_finite(const Matrix& m);

// Throws InvalidArgument if any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);

double max_abs(const Matrix& m);

// Sum of squared off-diagonal entries.
double off_diagonal_sq(const Matrix& m);

// Frobenius distance of Q^T Q from the identity.
double orthogonality_defect(const Matrix& q);

// Symmetric positive semidefinite matrix (a Hessian H = E[x x^T]).
//
// Construction checks squareness, finiteness and symmetry within 1e-10
// relative, and stores the exactly symmetrized matrix. Positive
// semidefiniteness is checked on demand by verify_psd().
class SymmetricPsd {
 public:
  static constexpr double kSymmetryTolerance = 1e-10;
  static constexpr double kPsdTolerance = 1e-8;

  SymmetricPsd() = default;
  explicit SymmetricPsd(Matrix m);

  const Matrix& matrix() const noexcept { return m_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  double trace() const { return m_.trace(); }
  double symmetry_defect() const noexcept { return symmetry_defect_; }

  // Throws InvalidArgument if the smallest eigenvalue is below
  // -kPsdTolerance * trace.
  void verify_psd() const;

 private:
  Matrix m_;
  double symmetry_defect_ = 0.0;
};

}  // namespace optrot
