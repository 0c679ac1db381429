#pragma once

#include "optrot/model/layer.hpp"
#include "optrot/rotation/rotation_set.hpp"

#include <string>
#include <vector>

namespace optrot {

// Per-matrix losses, with S = sum_ij |w~_ij|^p:
//   kOptRot        S                    (||vec W~||_4^4 at p = 4)
//   kOptRotV2      S^{2/p}              (||vec W~||_4^2)
//   kOptRotPlus    UB(H~) S^{1/p}       (UB * ||vec W~||_4)
//   kOptRotPlusV2  UB(H~) S^{2/p}       (UB * ||vec W~||_4^2)
enum class ObjectiveKind { kOptRot, kOptRotV2, kOptRotPlus, kOptRotPlusV2 };

const char* objective_name(ObjectiveKind k);
ObjectiveKind parse_objective(const std::string& name);

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::kOptRot;
  int p = 4;
  double loss_scale = 1.0;

  bool uses_hessian() const {
    return kind == ObjectiveKind::kOptRotPlus || kind == ObjectiveKind::kOptRotPlusV2;
  }
  // Throws InvalidArgument unless p is even and >= 4 and loss_scale > 0.
  void validate() const;
};

// Role-specific rewrite:
//   q, k, gate, up:  W R1
//   v:               R2f^T W R1
//   o:               R1^T W R2f
//   down:            R1^T W R4
// where R2f = r.r2_full(layer.layer).
Matrix rotated_weight(const LayerRecord& layer, const RotationSet& r);

// Rotation acting on the layer's input side (R1, R2f or R4), so that the
// rotated Hessian is B^T H B.
Matrix input_rotation(const LayerRecord& layer, const RotationSet& r);

// Unscaled l_rot of one layer. Layers need a Hessian (original
// coordinates) for the data-dependent kinds.
double layer_objective(const ObjectiveSpec& spec, const LayerRecord& layer,
                       const RotationSet& r);

// loss_scale * sum of layer_objective.
double objective_value(const ObjectiveSpec& spec, const std::vector<LayerRecord>& layers,
                       const RotationSet& r);

struct RotationGradient {
  Matrix r1;
  std::vector<Matrix> r2;
};

// Exact Euclidean gradient of objective_value with respect to the entries
// of r1 and of every r2 (r4 is fixed). Per-layer terms are computed on up
// to `threads` workers and reduced in layer order. When `value` is given it
// receives objective_value at the same point.
RotationGradient objective_gradient(const ObjectiveSpec& spec,
                                    const std::vector<LayerRecord>& layers, const RotationSet& r,
                                    int threads = 1, double* value = nullptr);

}  // namespace optrot
