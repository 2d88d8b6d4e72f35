#pragma once

#include <string>

#include "harness/config.hpp"

namespace rareebm::harness {

// Serialises with every floating-point value printed to 17 significant
// digits; non-finite numbers become null.
std::string dump_json(const Json& j, int indent = 2);

}  // namespace rareebm::harness
