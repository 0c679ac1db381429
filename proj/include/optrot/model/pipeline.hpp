#pragma once

#include "optrot/diag/diagnostics.hpp"
#include "optrot/hessian/calibration.hpp"
#include "optrot/model/toy_model.hpp"
#include "optrot/quant/quant_config.hpp"

#include <string>
#include <vector>

namespace optrot {

enum class QuantMethod { kRtn, kGptq, kGptqs };

const char* quant_method_name(QuantMethod m);
QuantMethod parse_quant_method(const std::string& name);

struct PipelineOptions {
  QuantMethod method = QuantMethod::kGptq;
  double damping = 0.01;
  // Hessians from the rotated full-precision model instead of the
  // partially quantized one.
  bool clean_activations = false;
  double delta = 0.1;  // GPTQS and the GPTQ bounds in reports
  int threads = 1;
};

struct QuantizeResult {
  ToyModel model;  // rotated, with dequantized weights
  std::vector<LayerRecord> layers;  // rotated weights, calibration Hessians, quantized weights
  std::vector<BoundReport> reports;  // against held-out Hessians
  double kl_proxy = 0.0;
};

// Rotates the model, then per block in order accumulates each layer's
// Hessian on `calib`, damps it and quantizes (q, k, v; o; gate, up; down).
// The KL proxy and reports use Hessians of the rotated full-precision model
// on `heldout`.
QuantizeResult quantize_model(const ToyModel& model, const RotationSet& r,
                              const CalibrationSet& calib, const CalibrationSet& heldout,
                              const QuantConfig& qcfg, const PipelineOptions& opts = {});

// Per-layer input Hessians E[x x^T] of a model on a calibration set, in
// layers() order (not damped).
std::vector<SymmetricPsd> layer_hessians(const ToyModel& model, const CalibrationSet& calib);

}  // namespace optrot
