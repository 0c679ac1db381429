#include "optrot/hessian/calibration.hpp"

#include "optrot/error.hpp"
#include "optrot/tensor/random.hpp"

#include <algorithm>
#include <numeric>

namespace optrot {

std::size_t CalibrationSet::dim() const {
  return batches.empty() ? 0 : static_cast<std::size_t>(batches.front().cols());
}

std::size_t CalibrationSet::samples() const {
  std::size_t total = 0;
  for (const Matrix& b : batches) total += static_cast<std::size_t>(b.rows());
  return total;
}

void CalibrationSet::validate() const {
  if (batches.empty() || samples() == 0) throw InvalidArgument("calibration set is empty");
  for (std::size_t i = 0; i < batches.size(); ++i) {
    if (static_cast<std::size_t>(batches[i].cols()) != dim()) {
      throw InvalidArgument("calibration batch " + std::to_string(i) + " has width " +
                            std::to_string(batches[i].cols()) + ", expected " +
                            std::to_string(dim()));
    }
    require_finite(batches[i], "calibration batch");
  }
}

Matrix CalibrationSet::stacked() const {
  Matrix out(static_cast<Eigen::Index>(samples()), static_cast<Eigen::Index>(dim()));
  Eigen::Index row = 0;
  for (const Matrix& b : batches) {
    out.middleRows(row, b.rows()) = b;
    row += b.rows();
  }
  return out;
}

HessianAccumulator::HessianAccumulator(std::size_t dim) : sum_(Matrix::Zero(dim, dim)) {
  if (dim == 0) throw InvalidArgument("Hessian dimension must be positive");
}

void HessianAccumulator::add(const Matrix& batch) {
  if (batch.cols() != sum_.cols()) {
    throw InvalidArgument("batch width " + std::to_string(batch.cols()) +
                          " does not match Hessian dimension " + std::to_string(sum_.cols()));
  }
  require_finite(batch, "Hessian batch");
  sum_.noalias() += batch.transpose() * batch;
  samples_ += static_cast<std::size_t>(batch.rows());
}

SymmetricPsd HessianAccumulator::result() const {
  if (samples_ == 0) throw InvalidArgument("no samples accumulated");
  Matrix h = sum_ / static_cast<double>(samples_);
  h = 0.5 * (h + h.transpose()).eval();
  return SymmetricPsd(std::move(h));
}

SymmetricPsd accumulate_hessian(const CalibrationSet& calib) {
  calib.validate();
  HessianAccumulator acc(calib.dim());
  for (const Matrix& b : calib.batches) acc.add(b);
  return acc.result();
}

SymmetricPsd damp(const SymmetricPsd& h, double fraction) {
  if (!(fraction >= 0.0)) throw InvalidArgument("damping fraction must be nonnegative");
  Matrix out = h.matrix();
  const double shift = fraction * out.diagonal().mean();
  out.diagonal().array() += shift;
  return SymmetricPsd(std::move(out));
}

CalibrationSet synthetic_calibration(std::size_t n, std::size_t samples,
                                     std::size_t outlier_channels, double outlier_scale,
                                     std::uint64_t seed, std::size_t batch_rows) {
  if (n == 0 || samples == 0 || batch_rows == 0) {
    throw InvalidArgument("synthetic calibration needs positive n, samples and batch size");
  }
  if (outlier_channels > n) throw InvalidArgument("more outlier channels than dimensions");
  CalibrationSet set;
  set.source = "synthetic";
  Rng pick = make_rng(seed, 0x0C7);
  std::vector<std::size_t> channels(n);
  std::iota(channels.begin(), channels.end(), std::size_t{0});
  std::shuffle(channels.begin(), channels.end(), pick);
  channels.resize(outlier_channels);
  std::sort(channels.begin(), channels.end());
  set.outlier_channels = channels;

  Rng rng = make_rng(seed, 0xCA1);
  for (std::size_t done = 0; done < samples; done += batch_rows) {
    Matrix b = gaussian_matrix(std::min(batch_rows, samples - done), n, rng);
    for (std::size_t c : channels) b.col(static_cast<Eigen::Index>(c)) *= outlier_scale;
    set.batches.push_back(std::move(b));
  }
  return set;
}

void store_calibration(TensorArchive& archive, const CalibrationSet& calib,
                       const std::string& prefix) {
  for (std::size_t i = 0; i < calib.batches.size(); ++i) {
    archive.add(prefix + "." + std::to_string(i), calib.batches[i]);
  }
}

CalibrationSet load_calibration(const TensorArchive& archive, const std::string& prefix) {
  CalibrationSet set;
  set.source = "archive";
  for (std::size_t i = 0; archive.contains(prefix + "." + std::to_string(i)); ++i) {
    set.batches.push_back(archive.get(prefix + "." + std::to_string(i)));
  }
  set.validate();
  return set;
}

}  // namespace optrot
