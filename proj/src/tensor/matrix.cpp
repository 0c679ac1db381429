#include "optrot/tensor/matrix.hpp"

#include "optrot/error.hpp"
#include "optrot/tensor/symmetric_eigen.hpp"

#include <cmath>
#include <string>

namespace optrot {

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw InvalidArgument(std::string(what) + ": matrix contains non-finite values");
  }
}

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double off_diagonal_sq(const Matrix& m) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (i != j) sum += m(i, j) * m(i, j);
    }
  }
  return sum;
}

double orthogonality_defect(const Matrix& q) {
  const Matrix gram = q.transpose() * q;
  return (gram - Matrix::Identity(q.cols(), q.cols())).norm();
}

SymmetricPsd::SymmetricPsd(Matrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) {
    throw InvalidArgument("SymmetricPsd: matrix is " + std::to_string(m_.rows()) + "x" +
                          std::to_string(m_.cols()) + ", expected square");
  }
  require_finite(m_, "SymmetricPsd");
  const double scale = m_.norm();
  symmetry_defect_ = (m_ - m_.transpose()).norm();
  if (symmetry_defect_ > kSymmetryTolerance * scale) {
    throw InvalidArgument("SymmetricPsd: asymmetry " + std::to_string(symmetry_defect_) +
                          " exceeds tolerance");
  }
  Matrix sym = 0.5 * (m_ + m_.transpose());
  m_ = std::move(sym);
}

void SymmetricPsd::verify_psd() const {
  if (m_.size() == 0) return;
  const EigenDecomposition eig = jacobi_eigh(m_);
  const double lowest = eig.lambdas(eig.lambdas.size() - 1);
  const double floor = -kPsdTolerance * std::abs(trace());
  if (lowest < floor) {
    throw InvalidArgument("SymmetricPsd: smallest eigenvalue " + std::to_string(lowest) +
                          " is below -1e-8 * trace");
  }
}

}  // namespace optrot
