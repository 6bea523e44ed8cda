#pragma once

#include <string>

#include "kolmo/group.hpp"

namespace kolmo {

/// Parses {"N", "m", "A", "B", "blocks"}; matrices are row-major nested arrays.
OperatorSpec parse_spec(const std::string& json_text, const std::string& name = "");
OperatorSpec load_spec(const std::string& path);
std::string spec_to_json(const OperatorSpec& spec);

/// Built-in operators: kolmogorov, ex41, ex42, heat1d, laplace2d, kappa2.
OperatorSpec named_spec(const std::string& name);
bool is_named_spec(const std::string& name);

}  // namespace kolmo
