#pragma once

#include "optrot/quant/quant_config.hpp"
#include "optrot/tensor/matrix.hpp"

#include <array>
#include <optional>
#include <string>

namespace optrot {

// Linear maps of one block, in forward order. Weights are stored
// out x in and act as y = W x.
enum class Role { kQ, kK, kV, kO, kGate, kUp, kDown };

inline constexpr std::array<Role, 7> kAllRoles = {Role::kQ,    Role::kK,  Role::kV,   Role::kO,
                                                  Role::kGate, Role::kUp, Role::kDown};

const char* role_name(Role role);
Role parse_role(const std::string& name);

struct LayerRecord {
  std::size_t layer = 0;  // block index
  Role role = Role::kQ;
  Matrix weight;
  std::optional<SymmetricPsd> hessian;  // over the weight's input dimension
  std::optional<QuantizedWeight> quantized;

  // "blocks.<layer>.<role>"
  std::string id() const;
};

}  // namespace optrot
