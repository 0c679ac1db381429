#include "optrot/tensor/ldl.hpp"

#include "optrot/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace optrot {
namespace {

Matrix unit_upper_inverse(const Matrix& unit_upper) {
  const auto n = unit_upper.rows();
  Matrix inv = Matrix::Identity(n, n);
  unit_upper.triangularView<Eigen::UnitUpper>().solveInPlace(inv);
  return inv;
}

double max_column_sq(const Matrix& l) { return l.colwise().squaredNorm().maxCoeff(); }

}  // namespace

Matrix LdlFactors::l() const {
  return unit_upper_inverse(u + Matrix::Identity(u.rows(), u.cols()));
}

Matrix LdlFactors::reconstruct() const {
  const Matrix upi = u + Matrix::Identity(u.rows(), u.cols());
  return upi * d.asDiagonal() * upi.transpose();
}

LdlFactors ldl_upper(const SymmetricPsd& h) {
  const auto n = static_cast<Eigen::Index>(h.dim());
  const Matrix& hm = h.matrix();
  // Index-reversed copy: the lower LDL^T of the reversed matrix is the
  // upper (U+I) D (U+I)^T of the original after reversing back.
  Matrix a = hm.reverse();

  const double trace = std::abs(h.trace());
  const double negative_tol = SymmetricPsd::kPsdTolerance * trace;
  const double max_diag = n > 0 ? a.diagonal().cwiseAbs().maxCoeff() : 0.0;
  const double zero_tol = static_cast<double>(n) * 1e-14 * max_diag;

  Matrix low = Matrix::Identity(n, n);
  Vector d = Vector::Zero(n);
  Vector scaled(n);  // low(j, k) * d(k) for k < j

  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < j; ++k) scaled(k) = low(j, k) * d(k);
    const double pivot = a(j, j) - low.row(j).head(j).dot(scaled.head(j));
    if (pivot < -negative_tol) {
      throw FactorizationError(static_cast<std::size_t>(n - 1 - j), pivot);
    }
    if (pivot <= zero_tol) continue;  // zero pivot: column stays zero
    d(j) = pivot;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      low(i, j) = (a(i, j) - low.row(i).head(j).dot(scaled.head(j))) / pivot;
    }
  }

  LdlFactors out;
  out.u = low.reverse();
  out.u.diagonal().setZero();
  out.d = d.reverse();
  return out;
}

double ldl_objective(const Matrix& h, const Matrix& l) {
  return (l * h).cwiseProduct(l).sum();
}

Matrix constrained_ldl_candidate(const SymmetricPsd& h, double c) {
  const double trace = h.trace();
  if (!(trace > 0.0)) throw InvalidArgument("constrained_ldl: trace must be positive");
  const double alpha = std::min(1.0, std::sqrt(c));
  const Matrix upper = h.matrix().triangularView<Eigen::StrictlyUpper>();
  return Matrix::Identity(h.dim(), h.dim()) - (alpha / trace) * upper;
}

ConstrainedLdl constrained_ldl(const SymmetricPsd& h, double c) {
  if (!(c > 0.0)) throw InvalidArgument("constrained_ldl: c must be positive");
  if (!(h.trace() > 0.0)) throw InvalidArgument("constrained_ldl: trace must be positive");
  const Matrix& hm = h.matrix();
  const auto n = hm.rows();
  const double cap = 1.0 + c;

  const LdlFactors factors = ldl_upper(h);
  Matrix l_true = factors.l();
  if (max_column_sq(l_true) <= cap) {
    ConstrainedLdl out;
    out.objective = ldl_objective(hm, l_true);
    out.l = std::move(l_true);
    out.l_inv = factors.u + Matrix::Identity(n, n);
    out.c = c;
    out.is_true_ldl = true;
    return out;
  }

  constexpr int kMaxPasses = 200;
  constexpr double kRelTol = 1e-9;
  const double radius_sq = c;
  const double radius = std::sqrt(c);

  Matrix l = constrained_ldl_candidate(h, c);
  Matrix lh = l * hm;
  double objective = lh.cwiseProduct(l).sum();
  int passes = 0;
  Vector delta(n);

  while (passes < kMaxPasses) {
    ++passes;
    for (Eigen::Index i = 1; i < n; ++i) {
      const double hii = hm(i, i);
      // Column i enters the objective as hii * ||x||^2 + 2 x . g with
      // g = sum_{j != i} H_ij L e_j restricted to the free entries.
      Vector x = Vector::Zero(i);
      if (hii > 0.0) {
        x = -(lh.col(i).head(i) - hii * l.col(i).head(i)) / hii;
        const double norm_sq = x.squaredNorm();
        if (norm_sq > radius_sq) x *= radius / std::sqrt(norm_sq);
      }
      delta.head(i) = x - l.col(i).head(i);
      if (delta.head(i).squaredNorm() == 0.0) continue;
      l.col(i).head(i) = x;
      lh.topRows(i).noalias() += delta.head(i) * hm.row(i);
    }
    const double next = lh.cwiseProduct(l).sum();
    const double change = std::abs(objective - next);
    objective = next;
    if (change <= kRelTol * std::abs(objective)) break;
  }

  ConstrainedLdl out;
  out.l_inv = unit_upper_inverse(l);
  out.objective = ldl_objective(hm, l);
  out.l = std::move(l);
  out.c = c;
  out.passes = passes;
  return out;
}

}  // namespace optrot
