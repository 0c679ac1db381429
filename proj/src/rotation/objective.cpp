#include "optrot/rotation/objective.hpp"

#include "optrot/error.hpp"
#include "optrot/parallel.hpp"

#include <cmath>

namespace optrot {

namespace {

double power_sum(const Matrix& w, int p) {
  if (p == 4) return w.array().square().square().sum();
  return w.array().abs().pow(p).sum();
}

// w^{p-1} elementwise with sign (p is even, so this is w * |w|^{p-2}).
Matrix odd_power(const Matrix& w, int p) {
  if (p == 4) return w.array().cube().matrix();
  return (w.array() * w.array().abs().pow(p - 2)).matrix();
}

double exponent(const ObjectiveSpec& spec) {
  switch (spec.kind) {
    case ObjectiveKind::kOptRot: return 1.0;
    case ObjectiveKind::kOptRotV2: return 2.0 / spec.p;
    case ObjectiveKind::kOptRotPlus: return 1.0 / spec.p;
    case ObjectiveKind::kOptRotPlusV2: return 2.0 / spec.p;
  }
  return 1.0;
}

const SymmetricPsd& require_hessian(const LayerRecord& layer) {
  if (!layer.hessian) {
    throw InvalidArgument("objective needs a Hessian for layer " + layer.id());
  }
  if (static_cast<Eigen::Index>(layer.hessian->dim()) != layer.weight.cols()) {
    throw InvalidArgument("Hessian of " + layer.id() + " does not match its input dimension");
  }
  return *layer.hessian;
}

double ub_of(const Matrix& h) {
  const double tr = h.trace();
  if (!(tr > 0.0)) throw InvalidArgument("UB needs a Hessian with positive trace");
  return tr - off_diagonal_sq(h) / (2.0 * tr);
}

// dUB/dH over all (not only symmetric-trace-preserving) perturbations.
Matrix ub_gradient(const Matrix& h) {
  const double tr = h.trace();
  const double off = off_diagonal_sq(h);
  Matrix g = -h / tr;
  g.diagonal().setConstant(1.0 + off / (2.0 * tr * tr));
  return g;
}

void check_role_shape(const LayerRecord& layer, const RotationSet& r) {
  const Eigen::Index d = r.r1.rows();
  const Eigen::Index f = r.r4.rows();
  Eigen::Index rows = 0, cols = 0;
  switch (layer.role) {
    case Role::kQ:
    case Role::kK:
    case Role::kV:
    case Role::kO: rows = d; cols = d; break;
    case Role::kGate:
    case Role::kUp: rows = f; cols = d; break;
    case Role::kDown: rows = d; cols = f; break;
  }
  if (layer.weight.rows() != rows || layer.weight.cols() != cols) {
    throw InvalidArgument(layer.id() + " has shape " + std::to_string(layer.weight.rows()) + "x" +
                          std::to_string(layer.weight.cols()) + ", expected " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
  if ((layer.role == Role::kV || layer.role == Role::kO) && layer.layer >= r.r2.size()) {
    throw InvalidArgument("no R2 rotation for " + layer.id());
  }
}

struct LayerGradient {
  Matrix r1;
  Matrix r2_full;  // empty unless v or o
  double value = 0.0;  // unscaled l_rot
};

LayerGradient layer_gradient(const ObjectiveSpec& spec, const LayerRecord& layer,
                             const RotationSet& r) {
  check_role_shape(layer, r);
  const Matrix& w = layer.weight;
  const bool uses_r2 = layer.role == Role::kV || layer.role == Role::kO;
  const Matrix r2f = uses_r2 ? r.r2_full(layer.layer) : Matrix();
  const Matrix wt = rotated_weight(layer, r);

  // G = dl/dW~ for l = [UB] * S^e.
  const double e = exponent(spec);
  const double s = power_sum(wt, spec.p);
  double ub = 1.0;
  Matrix h_rot;
  Matrix b;
  if (spec.uses_hessian()) {
    b = input_rotation(layer, r);
    h_rot = b.transpose() * require_hessian(layer).matrix() * b;
    ub = ub_of(h_rot);
  }
  Matrix g;
  if (s > 0.0) {
    g = (spec.loss_scale * ub * e * spec.p * std::pow(s, e - 1.0)) * odd_power(wt, spec.p);
  } else {
    g = Matrix::Zero(wt.rows(), wt.cols());
  }

  LayerGradient out;
  out.value = ub * std::pow(s, e);
  switch (layer.role) {
    case Role::kQ:
    case Role::kK:
    case Role::kGate:
    case Role::kUp: out.r1 = w.transpose() * g; break;
    case Role::kV:
      out.r1 = w.transpose() * (r2f * g);
      out.r2_full = (w * r.r1) * g.transpose();
      break;
    case Role::kO:
      out.r1 = (w * r2f) * g.transpose();
      out.r2_full = w.transpose() * (r.r1 * g);
      break;
    case Role::kDown: out.r1 = (w * r.r4) * g.transpose(); break;
  }

  if (spec.uses_hessian() && s > 0.0 && layer.role != Role::kDown) {
    // d(UB(B^T H B))/dB = 2 H B K with K = dUB/dH~, times the other factor.
    const Matrix db = (2.0 * spec.loss_scale * std::pow(s, e)) *
                      (require_hessian(layer).matrix() * b * ub_gradient(h_rot));
    if (layer.role == Role::kO) {
      out.r2_full += db;
    } else {
      out.r1 += db;
    }
  }
  return out;
}

}  // namespace

const char* objective_name(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::kOptRot: return "optrot";
    case ObjectiveKind::kOptRotV2: return "optrot-v2";
    case ObjectiveKind::kOptRotPlus: return "optrot+";
    case ObjectiveKind::kOptRotPlusV2: return "optrot+-v2";
  }
  return "?";
}

ObjectiveKind parse_objective(const std::string& name) {
  for (ObjectiveKind k : {ObjectiveKind::kOptRot, ObjectiveKind::kOptRotV2,
                          ObjectiveKind::kOptRotPlus, ObjectiveKind::kOptRotPlusV2}) {
    if (name == objective_name(k)) return k;
  }
  throw InvalidArgument("unknown objective '" + name + "'");
}

void ObjectiveSpec::validate() const {
  if (p < 4 || p % 2 != 0) throw InvalidArgument("objective norm order p must be even and >= 4");
  if (!(loss_scale > 0.0) || !std::isfinite(loss_scale)) {
    throw InvalidArgument("loss scale must be positive and finite");
  }
}

Matrix rotated_weight(const LayerRecord& layer, const RotationSet& r) {
  check_role_shape(layer, r);
  const Matrix& w = layer.weight;
  switch (layer.role) {
    case Role::kQ:
    case Role::kK:
    case Role::kGate:
    case Role::kUp: return w * r.r1;
    case Role::kV: return r.r2_full(layer.layer).transpose() * w * r.r1;
    case Role::kO: return r.r1.transpose() * w * r.r2_full(layer.layer);
    case Role::kDown: return r.r1.transpose() * w * r.r4;
  }
  return w;
}

Matrix input_rotation(const LayerRecord& layer, const RotationSet& r) {
  switch (layer.role) {
    case Role::kO: return r.r2_full(layer.layer);
    case Role::kDown: return r.r4;
    default: return r.r1;
  }
}

double layer_objective(const ObjectiveSpec& spec, const LayerRecord& layer,
                       const RotationSet& r) {
  spec.validate();
  const double s = power_sum(rotated_weight(layer, r), spec.p);
  const double f = std::pow(s, exponent(spec));
  if (!spec.uses_hessian()) return f;
  const Matrix b = input_rotation(layer, r);
  return ub_of(b.transpose() * require_hessian(layer).matrix() * b) * f;
}

double objective_value(const ObjectiveSpec& spec, const std::vector<LayerRecord>& layers,
                       const RotationSet& r) {
  double total = 0.0;
  for (const LayerRecord& layer : layers) total += layer_objective(spec, layer, r);
  return spec.loss_scale * total;
}

RotationGradient objective_gradient(const ObjectiveSpec& spec,
                                    const std::vector<LayerRecord>& layers, const RotationSet& r,
                                    int threads, double* value) {
  spec.validate();
  std::vector<LayerGradient> parts(layers.size());
  parallel_for(layers.size(), threads,
               [&](std::size_t i) { parts[i] = layer_gradient(spec, layers[i], r); });
  RotationGradient out;
  out.r1 = Matrix::Zero(r.r1.rows(), r.r1.cols());
  out.r2.assign(r.r2.size(), Matrix::Zero(r.d_head_block(), r.d_head_block()));
  const Eigen::Index b = static_cast<Eigen::Index>(r.d_head_block());
  double total = 0.0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    total += parts[i].value;
    out.r1 += parts[i].r1;
    if (parts[i].r2_full.size() == 0) continue;
    Matrix& g2 = out.r2[layers[i].layer];
    for (Eigen::Index h = 0; h < r.r1.rows() / b; ++h) {
      g2 += parts[i].r2_full.block(h * b, h * b, b, b);
    }
  }
  if (value) *value = spec.loss_scale * total;
  return out;
}

}  // namespace optrot
