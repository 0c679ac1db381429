#pragma once

#include "optrot/tensor/matrix.hpp"
#include "optrot/tensor/random.hpp"

#include <cstdint>

namespace optrot::testing {

// Empirical second moment of 2n (or `samples`) standard Gaussian rows.
inline SymmetricPsd random_psd(std::size_t n, std::uint64_t seed, std::size_t samples = 0) {
  Rng rng = make_rng(seed, 99);
  const std::size_t rows = samples == 0 ? 2 * n : samples;
  const Matrix x = gaussian_matrix(rows, n, rng);
  return SymmetricPsd(x.transpose() * x / static_cast<double>(rows));
}

// Second moment of inputs with strongly correlated features, plus damping.
inline SymmetricPsd correlated_psd(std::size_t n, std::uint64_t seed, double damping = 1e-2) {
  Rng rng = make_rng(seed, 7);
  const std::size_t samples = 4 * n;
  const Matrix latent = gaussian_matrix(samples, n, rng);
  Matrix mix = Matrix::Identity(n, n);
  mix += gaussian_matrix(n, n, rng, 1.0);
  Matrix x = latent * mix;
  Matrix h = x.transpose() * x / static_cast<double>(samples);
  h.diagonal().array() += damping * h.diagonal().mean();
  return SymmetricPsd(h);
}

// tr((What - W) H (What - W)^T), written out independently of the library.
inline double layer_error(const Matrix& w_hat, const Matrix& w, const Matrix& h) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index a = 0; a < w.cols(); ++a) {
      for (Eigen::Index b = 0; b < w.cols(); ++b) {
        total += (w_hat(i, a) - w(i, a)) * h(a, b) * (w_hat(i, b) - w(i, b));
      }
    }
  }
  return total;
}

}  // namespace optrot::testing
