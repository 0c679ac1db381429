#include "optrot/tensor/symmetric_eigen.hpp"

#include "optrot/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace optrot {

Matrix EigenDecomposition::reconstruct() const {
  return q * lambdas.asDiagonal() * q.transpose();
}

EigenDecomposition jacobi_eigh(const SymmetricPsd& h) { return jacobi_eigh(h.matrix()); }

EigenDecomposition jacobi_eigh(const Matrix& h) {
  if (h.rows() != h.cols()) throw InvalidArgument("jacobi_eigh: matrix must be square");
  require_finite(h, "jacobi_eigh");
  constexpr int kMaxSweeps = 100;
  constexpr double kRelTol = 1e-12;

  const auto n = h.rows();
  Matrix a = 0.5 * (h + h.transpose());
  // Rows of vt are eigenvectors; keeping them as rows makes every update
  // touch contiguous memory.
  Matrix vt = Matrix::Identity(n, n);
  const double target = kRelTol * a.norm();

  auto off_norm = [&] { return std::sqrt(std::max(0.0, off_diagonal_sq(a))); };

  int sweeps = 0;
  double off = off_norm();
  while (off > target) {
    if (sweeps == kMaxSweeps) {
      throw ConvergenceError("jacobi_eigh: no convergence after 100 sweeps", off);
    }
    ++sweeps;
    // Entries below `skip` cannot keep the iteration above the target. The
    // first sweeps also skip entries that are small relative to the mean.
    double skip = target / static_cast<double>(n);
    if (sweeps < 4) skip = std::max(skip, 0.2 * off / static_cast<double>(n * n));
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= skip) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        double* rp = a.row(p).data();
        double* rq = a.row(q).data();
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = rp[k];
          const double akq = rq[k];
          rp[k] = c * akp - s * akq;
          rq[k] = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          a(k, p) = rp[k];
          a(k, q) = rq[k];
        }
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;

        double* vp = vt.row(p).data();
        double* vq = vt.row(q).data();
        for (Eigen::Index k = 0; k < n; ++k) {
          const double x = vp[k];
          const double y = vq[k];
          vp[k] = c * x - s * y;
          vq[k] = s * x + c * y;
        }
      }
    }
    off = off_norm();
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });

  EigenDecomposition out;
  out.q.resize(n, n);
  out.lambdas.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto src = order[static_cast<std::size_t>(j)];
    out.lambdas(j) = a(src, src);
    out.q.col(j) = vt.row(src).transpose();
  }
  out.sweeps = sweeps;
  return out;
}

}  // namespace optrot
