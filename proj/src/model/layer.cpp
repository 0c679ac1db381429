#include "optrot/model/layer.hpp"

#include "optrot/error.hpp"

namespace optrot {

const char* role_name(Role role) {
  switch (role) {
    case Role::kQ: return "q";
    case Role::kK: return "k";
    case Role::kV: return "v";
    case Role::kO: return "o";
    case Role::kGate: return "gate";
    case Role::kUp: return "up";
    case Role::kDown: return "down";
  }
  return "?";
}

Role parse_role(const std::string& name) {
  for (Role r : kAllRoles) {
    if (name == role_name(r)) return r;
  }
  throw InvalidArgument("unknown layer role '" + name + "'");
}

std::string LayerRecord::id() const {
  return "blocks." + std::to_string(layer) + "." + role_name(role);
}

}  // namespace optrot
