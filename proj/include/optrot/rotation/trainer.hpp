#pragma once

#include "optrot/rotation/objective.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace optrot {

struct CayleyState {
  Matrix momentum;  // heavy-ball buffer on the skew direction; lazily sized
};

struct CayleyOptions {
  double learning_rate = 1.0;
  double momentum = 0.0;
  // Caps the step at 1 / ||A||_1 (maximum absolute column sum of the skew
  // direction), as in the reference Cayley SGD optimizer. Keeps very large
  // nominal learning rates stable.
  bool clip_step = true;
};

// One Cayley step on the orthogonal group:
//   A = G r^T - r G^T,  M <- momentum M + A,
//   r <- (I + a/2 M)^{-1} (I - a/2 M) r,  a = step size.
Matrix cayley_sgd_step(const Matrix& r, const Matrix& grad, const CayleyOptions& opts,
                       CayleyState& state);

struct TrainConfig {
  double learning_rate = 1.0;
  std::size_t steps = 1000;
  double momentum = 0.0;
  bool clip_step = true;
  std::size_t top_k = 0;  // 0: all layers
  int threads = 1;

  void validate() const;
};

// Indices of the k layers with the largest initial l_rot; ties keep the
// (block, role) order. Throws InvalidArgument when k is 0 or too large.
std::vector<std::size_t> select_top_k(const std::vector<LayerRecord>& layers,
                                      const ObjectiveSpec& spec, const RotationSet& r_init,
                                      std::size_t k);

struct TrainResult {
  RotationSet rotations;
  ObjectiveSpec spec;  // with the loss scale actually used
  std::vector<double> loss_history;  // loss before each step, then the final loss
  std::vector<std::size_t> selected;  // indices into the input layers
};

// Minimizes the objective over r1 and every r2, starting at `init`.
// Data-dependent kinds first rescale so the initial loss equals the
// initial OptRot loss of the same selection.
TrainResult learn_rotations(const ObjectiveSpec& spec, const std::vector<LayerRecord>& layers,
                            const TrainConfig& cfg, const RotationSet& init);

std::string loss_history_csv(const std::vector<double>& history);

}  // namespace optrot
