#include "optrot/quant/serialize.hpp"

#include "optrot/error.hpp"
#include "optrot/quant/rtn.hpp"

namespace optrot {

void store_quantized(TensorArchive& archive, const std::string& name, const QuantizedWeight& q) {
  archive.add(name + ".codes", q.codes.cast<double>(), Dtype::kF32);
  archive.add(name + ".scales", q.scales);
  archive.add(name + ".dequant", q.dequantized);
}

QuantizedWeight load_quantized(const TensorArchive& archive, const std::string& name,
                               const QuantConfig& cfg) {
  QuantizedWeight q;
  q.config = cfg;
  const Matrix& codes = archive.get(name + ".codes");
  q.codes = codes.array().round().cast<std::int32_t>().matrix();
  if ((q.codes.cast<double>() - codes).cwiseAbs().maxCoeff() != 0.0 ||
      q.codes.minCoeff() < 0 || q.codes.maxCoeff() > cfg.max_code()) {
    throw IoError("entry '" + name + ".codes' does not hold valid integer codes");
  }
  q.scales = archive.get(name + ".scales");
  q.dequantized = archive.get(name + ".dequant");
  if ((dequantize(q.codes, q.scales, cfg) - q.dequantized).cwiseAbs().maxCoeff() > 0.0) {
    throw IoError("entry '" + name + ".dequant' is inconsistent with its codes");
  }
  return q;
}

}  // namespace optrot
