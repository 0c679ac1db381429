#include "optrot/tensor/random.hpp"

#include "optrot/error.hpp"

namespace optrot {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix random_orthogonal(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("random_orthogonal: n must be at least 1");
  Rng rng = make_rng(seed, 0x0127u);
  const Matrix g = gaussian_matrix(n, n, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const auto& r = qr.matrixQR();
  for (std::size_t j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

}  // namespace optrot
