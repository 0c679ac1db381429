#include "optrot/rotation/trainer.hpp"

#include "optrot/diag/diagnostics.hpp"
#include "optrot/error.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace optrot {

Matrix cayley_sgd_step(const Matrix& r, const Matrix& grad, const CayleyOptions& opts,
                       CayleyState& state) {
  if (r.rows() != r.cols() || grad.rows() != r.rows() || grad.cols() != r.cols()) {
    throw InvalidArgument("Cayley step needs square r and a gradient of the same shape");
  }
  if (!(opts.learning_rate >= 0.0) || !(opts.momentum >= 0.0 && opts.momentum < 1.0)) {
    throw InvalidArgument("Cayley step needs lr >= 0 and momentum in [0, 1)");
  }
  require_finite(grad, "Cayley gradient");
  const Eigen::Index n = r.rows();
  const Matrix a = grad * r.transpose() - r * grad.transpose();
  if (state.momentum.rows() != n) state.momentum = Matrix::Zero(n, n);
  state.momentum = opts.momentum * state.momentum + a;
  const Matrix& m = state.momentum;

  double step = opts.learning_rate;
  if (opts.clip_step) {
    const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
    step = std::min(step, 1.0 / (norm1 + 1e-12));
  }
  if (step == 0.0 || m.cwiseAbs().maxCoeff() == 0.0) return r;
  const Matrix half = (0.5 * step) * m;
  const Matrix lhs = Matrix::Identity(n, n) + half;
  Eigen::PartialPivLU<Matrix> lu(lhs);
  Matrix out = lu.solve((Matrix::Identity(n, n) - half) * r);
  if (!all_finite(out)) throw NumericalError("Cayley transform produced non-finite values");
  return out;
}

void TrainConfig::validate() const {
  if (steps < 1) throw InvalidArgument("training needs at least one step");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning rate must be nonnegative and finite");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must be in [0, 1)");
}

std::vector<std::size_t> select_top_k(const std::vector<LayerRecord>& layers,
                                      const ObjectiveSpec& spec, const RotationSet& r_init,
                                      std::size_t k) {
  if (k == 0) throw InvalidArgument("top-k selection needs k >= 1");
  if (k > layers.size()) {
    throw InvalidArgument("top-k of " + std::to_string(k) + " exceeds " +
                          std::to_string(layers.size()) + " candidate matrices");
  }
  std::vector<double> loss(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) loss[i] = layer_objective(spec, layers[i], r_init);
  std::vector<std::size_t> order(layers.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (layers[a].layer != layers[b].layer) return layers[a].layer < layers[b].layer;
    return static_cast<int>(layers[a].role) < static_cast<int>(layers[b].role);
  });
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return loss[a] > loss[b]; });
  order.resize(k);
  return order;
}

TrainResult learn_rotations(const ObjectiveSpec& spec, const std::vector<LayerRecord>& layers,
                            const TrainConfig& cfg, const RotationSet& init) {
  spec.validate();
  cfg.validate();
  init.validate();
  if (layers.empty()) throw InvalidArgument("no layers to train rotations on");

  TrainResult result;
  result.rotations = init;
  result.spec = spec;
  if (cfg.top_k > 0) {
    result.selected = select_top_k(layers, spec, init, cfg.top_k);
  } else {
    result.selected.resize(layers.size());
    std::iota(result.selected.begin(), result.selected.end(), std::size_t{0});
  }
  std::vector<LayerRecord> active;
  active.reserve(result.selected.size());
  for (std::size_t i : result.selected) active.push_back(layers[i]);

  if (spec.uses_hessian()) {
    ObjectiveSpec base;
    base.p = spec.p;
    ObjectiveSpec unscaled = spec;
    unscaled.loss_scale = 1.0;
    const double target = objective_value(base, active, init);
    const double current = objective_value(unscaled, active, init);
    if (current > 0.0 && target > 0.0) result.spec.loss_scale = target / current;
  }

  CayleyOptions opts;
  opts.learning_rate = cfg.learning_rate;
  opts.momentum = cfg.momentum;
  opts.clip_step = cfg.clip_step;
  CayleyState r1_state;
  std::vector<CayleyState> r2_state(init.r2.size());
  RotationSet& r = result.rotations;
  result.loss_history.reserve(cfg.steps + 1);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    double loss = 0.0;
    const RotationGradient g = objective_gradient(result.spec, active, r, cfg.threads, &loss);
    result.loss_history.push_back(loss);
    r.r1 = cayley_sgd_step(r.r1, g.r1, opts, r1_state);
    for (std::size_t l = 0; l < r.r2.size(); ++l) {
      if (g.r2[l].cwiseAbs().maxCoeff() > 0.0) {
        r.r2[l] = cayley_sgd_step(r.r2[l], g.r2[l], opts, r2_state[l]);
      }
    }
  }
  result.loss_history.push_back(objective_value(result.spec, active, r));
  return result;
}

std::string loss_history_csv(const std::vector<double>& history) {
  std::ostringstream out;
  out << "step,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    out << i << ',' << format_double(history[i]) << '\n';
  }
  return out.str();
}

}  // namespace optrot
