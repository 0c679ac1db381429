#include "optrot/model/pipeline.hpp"

#include "optrot/error.hpp"
#include "optrot/quant/gptq.hpp"
#include "optrot/quant/rtn.hpp"

namespace optrot {

namespace {

SymmetricPsd hessian_of(const Matrix& inputs) {
  HessianAccumulator acc(static_cast<std::size_t>(inputs.cols()));
  acc.add(inputs);
  return acc.result();
}

QuantizedWeight quantize_layer(const Matrix& w, const SymmetricPsd& h, const QuantConfig& qcfg,
                               const PipelineOptions& opts, std::size_t index) {
  switch (opts.method) {
    case QuantMethod::kRtn: return rtn_quantize(w, qcfg);
    case QuantMethod::kGptq: return gptq_quantize(w, h, qcfg, opts.threads);
    case QuantMethod::kGptqs: {
      QuantConfig cfg = qcfg;
      cfg.rounding = Rounding::kStochastic;
      cfg.grid = Grid::kShrunk;
      cfg.seed = qcfg.seed * 1000003ULL + index;
      return gptqs_quantize(w, h, cfg, opts.delta, opts.threads);
    }
  }
  throw InvalidArgument("unknown quantization method");
}

}  // namespace

const char* quant_method_name(QuantMethod m) {
  switch (m) {
    case QuantMethod::kRtn: return "rtn";
    case QuantMethod::kGptq: return "gptq";
    case QuantMethod::kGptqs: return "gptqs";
  }
  return "?";
}

QuantMethod parse_quant_method(const std::string& name) {
  for (QuantMethod m : {QuantMethod::kRtn, QuantMethod::kGptq, QuantMethod::kGptqs}) {
    if (name == quant_method_name(m)) return m;
  }
  throw InvalidArgument("unknown quantization method '" + name + "'");
}

std::vector<SymmetricPsd> layer_hessians(const ToyModel& model, const CalibrationSet& calib) {
  calib.validate();
  std::vector<BlockCapture> caps;
  forward(model, calib.stacked(), &caps);
  std::vector<SymmetricPsd> out;
  for (std::size_t l = 0; l < caps.size(); ++l) {
    for (Role role : kAllRoles) out.push_back(hessian_of(caps[l].input_of(role)));
  }
  return out;
}

QuantizeResult quantize_model(const ToyModel& model, const RotationSet& r,
                              const CalibrationSet& calib, const CalibrationSet& heldout,
                              const QuantConfig& qcfg, const PipelineOptions& opts) {
  calib.validate();
  heldout.validate();
  if (calib.dim() != model.spec.d_model || heldout.dim() != model.spec.d_model) {
    throw InvalidArgument("calibration width does not match d_model");
  }
  const ToyModel rotated = apply_fused_rotations(model, r);
  QuantizeResult result;
  result.model = rotated;
  ToyModel& current = result.model;

  std::vector<BlockCapture> clean;
  if (opts.clean_activations) forward(rotated, calib.stacked(), &clean);

  Matrix stream = calib.stacked() * current.embed.transpose();
  auto quantize_roles = [&](std::size_t l, std::initializer_list<Role> roles,
                            const Matrix& inputs) {
    const SymmetricPsd h = damp(hessian_of(inputs), opts.damping);
    for (Role role : roles) {
      LayerRecord rec;
      rec.layer = l;
      rec.role = role;
      rec.weight = rotated.blocks[l].weight(role);
      rec.hessian = h;
      rec.quantized = quantize_layer(rec.weight, h, qcfg, opts, result.layers.size());
      current.set_weight(l, role, rec.quantized->dequantized);
      result.layers.push_back(std::move(rec));
    }
  };
  for (std::size_t l = 0; l < current.blocks.size(); ++l) {
    const Matrix a = rms_normalize(stream);
    quantize_roles(l, {Role::kQ, Role::kK, Role::kV}, opts.clean_activations ? clean[l].attn_in : a);
    const Matrix z = attention_mix(current, current.blocks[l], a);
    quantize_roles(l, {Role::kO}, opts.clean_activations ? clean[l].o_in : z);
    stream += z * current.blocks[l].o.transpose();
    const Matrix m = rms_normalize(stream);
    quantize_roles(l, {Role::kGate, Role::kUp}, opts.clean_activations ? clean[l].mlp_in : m);
    const Matrix down_in = mlp_hidden(current, current.blocks[l], m);
    quantize_roles(l, {Role::kDown}, opts.clean_activations ? clean[l].down_in : down_in);
    stream += down_in * current.blocks[l].down.transpose();
  }

  const std::vector<SymmetricPsd> eval = layer_hessians(rotated, heldout);
  std::vector<LayerError> terms;
  for (std::size_t i = 0; i < result.layers.size(); ++i) {
    const LayerRecord& rec = result.layers[i];
    terms.push_back({&rec.weight, &rec.quantized->dequantized, &eval[i]});
    result.reports.push_back(make_bound_report(rec.id(), rec.weight, rec.quantized->dequantized,
                                               eval[i], qcfg.bits, opts.delta));
  }
  result.kl_proxy = kl_proxy(terms);
  return result;
}

}  // namespace optrot
