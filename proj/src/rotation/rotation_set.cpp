#include "optrot/rotation/rotation_set.hpp"

#include "optrot/error.hpp"
#include "optrot/tensor/hadamard.hpp"

namespace optrot {

std::size_t RotationSet::d_head_block() const {
  return r2.empty() ? 0 : static_cast<std::size_t>(r2.front().rows());
}

Matrix RotationSet::r2_full(std::size_t layer) const {
  if (layer >= r2.size()) {
    throw InvalidArgument("no R2 rotation for block " + std::to_string(layer));
  }
  const Eigen::Index d = r1.rows();
  const Eigen::Index b = r2[layer].rows();
  Matrix full = Matrix::Zero(d, d);
  for (Eigen::Index h = 0; h < d / b; ++h) full.block(h * b, h * b, b, b) = r2[layer];
  return full;
}

void RotationSet::validate() const {
  auto check = [](const Matrix& m, const std::string& what) {
    if (m.rows() == 0 || m.rows() != m.cols()) {
      throw InvalidArgument(what + " must be a nonempty square matrix");
    }
    require_finite(m, "rotation");
    const double defect = orthogonality_defect(m);
    if (defect > kOrthogonalityTolerance) {
      throw InvalidArgument(what + " is not orthogonal (defect " + std::to_string(defect) + ")");
    }
  };
  check(r1, "r1");
  check(r4, "r4");
  for (std::size_t l = 0; l < r2.size(); ++l) {
    check(r2[l], "r2." + std::to_string(l));
    if (r2[l].rows() != r2.front().rows() || r1.rows() % r2[l].rows() != 0) {
      throw InvalidArgument("r2 blocks must share one size dividing d_model");
    }
  }
}

RotationSet RotationSet::identity(std::size_t n_layers, std::size_t d_model,
                                  std::size_t d_head_block, std::size_t d_ff) {
  if (d_head_block == 0 || d_model % d_head_block != 0) {
    throw InvalidArgument("d_head_block must divide d_model");
  }
  RotationSet r;
  r.r1 = Matrix::Identity(d_model, d_model);
  r.r2.assign(n_layers, Matrix::Identity(d_head_block, d_head_block));
  r.r4 = Matrix::Identity(d_ff, d_ff);
  return r;
}

RotationSet RotationSet::hadamard_init(std::size_t n_layers, std::size_t d_model,
                                       std::size_t d_head_block, std::size_t d_ff,
                                       std::uint64_t seed) {
  RotationSet r = identity(n_layers, d_model, d_head_block, d_ff);
  r.r1 = randomized_hadamard(d_model, seed);
  r.r4 = hadamard_orthonormal(d_ff);
  return r;
}

void store_rotations(TensorArchive& archive, const RotationSet& r) {
  archive.add("r1", r.r1);
  for (std::size_t l = 0; l < r.r2.size(); ++l) archive.add("r2." + std::to_string(l), r.r2[l]);
  archive.add("r4", r.r4);
}

RotationSet load_rotations(const TensorArchive& archive) {
  RotationSet r;
  r.r1 = archive.get("r1");
  for (std::size_t l = 0; archive.contains("r2." + std::to_string(l)); ++l) {
    r.r2.push_back(archive.get("r2." + std::to_string(l)));
  }
  r.r4 = archive.get("r4");
  r.validate();
  return r;
}

}  // namespace optrot
