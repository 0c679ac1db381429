#pragma once

#include "optrot/quant/quant_config.hpp"
#include "optrot/tensor/archive.hpp"

#include <string>

namespace optrot {

// Writes <name>.codes (integers stored as f32), <name>.scales and
// <name>.dequant (f64).
void store_quantized(TensorArchive& archive, const std::string& name, const QuantizedWeight& q);

// Reads the three entries back; cfg supplies the metadata that is not
// stored in the archive.
QuantizedWeight load_quantized(const TensorArchive& archive, const std::string& name,
                               const QuantConfig& cfg);

}  // namespace optrot
