#pragma once

#include "optrot/tensor/archive.hpp"
#include "optrot/tensor/matrix.hpp"

#include <cstdint>
#include <vector>

namespace optrot {

// r1 acts on the residual stream (d_model), r2[l] on each head block of
// the v -> o channel of block l, r4 on the down-projection input (d_ff).
struct RotationSet {
  static constexpr double kOrthogonalityTolerance = 1e-6;

  Matrix r1;
  std::vector<Matrix> r2;
  Matrix r4;

  std::size_t d_model() const { return static_cast<std::size_t>(r1.rows()); }
  std::size_t d_head_block() const;
  std::size_t d_ff() const { return static_cast<std::size_t>(r4.rows()); }
  std::size_t n_layers() const { return r2.size(); }

  // blockdiag(r2[layer], ..., r2[layer]) over d_model / d_head_block heads.
  Matrix r2_full(std::size_t layer) const;

  // Throws InvalidArgument on inconsistent shapes or a member whose
  // orthogonality defect exceeds the tolerance.
  void validate() const;

  static RotationSet identity(std::size_t n_layers, std::size_t d_model,
                              std::size_t d_head_block, std::size_t d_ff);
  // Training start: r1 randomized Hadamard, r2 identity, r4 Hadamard.
  static RotationSet hadamard_init(std::size_t n_layers, std::size_t d_model,
                                   std::size_t d_head_block, std::size_t d_ff,
                                   std::uint64_t seed);
};

// Entries r1, r2.<layer>, r4.
void store_rotations(TensorArchive& archive, const RotationSet& r);
RotationSet load_rotations(const TensorArchive& archive);

}  // namespace optrot
