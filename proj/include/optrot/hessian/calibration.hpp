#pragma once

#include "optrot/tensor/archive.hpp"
#include "optrot/tensor/matrix.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace optrot {

struct CalibrationSet {
  std::vector<Matrix> batches;  // samples x dim each
  std::string source;
  std::vector<std::size_t> outlier_channels;  // synthetic sets only

  std::size_t dim() const;
  std::size_t samples() const;
  // Throws InvalidArgument on an empty set, mismatched widths or
  // non-finite values.
  void validate() const;
  // Concatenated samples.
  Matrix stacked() const;
};

// Streaming accumulation of E[x x^T]. Memory is one n x n matrix
// regardless of the number of batches.
class HessianAccumulator {
 public:
  explicit HessianAccumulator(std::size_t dim);

  void add(const Matrix& batch);
  std::size_t samples() const { return samples_; }
  // (1/N) sum x x^T.
  SymmetricPsd result() const;

 private:
  Matrix sum_;
  std::size_t samples_ = 0;
};

SymmetricPsd accumulate_hessian(const CalibrationSet& calib);

// H + fraction * mean(diag H) * I.
SymmetricPsd damp(const SymmetricPsd& h, double fraction);

// Standard Gaussian activations in batches of at most `batch_rows` rows.
// `outlier_channels` distinct channels, chosen from the seed, are scaled by
// outlier_scale; their indices are recorded on the set.
CalibrationSet synthetic_calibration(std::size_t n, std::size_t samples,
                                     std::size_t outlier_channels, double outlier_scale,
                                     std::uint64_t seed, std::size_t batch_rows = 256);

// Stores batches as <prefix>.<i>; read back in index order.
void store_calibration(TensorArchive& archive, const CalibrationSet& calib,
                       const std::string& prefix = "calib");
CalibrationSet load_calibration(const TensorArchive& archive, const std::string& prefix = "calib");

}  // namespace optrot
