#pragma once

#include "anchorquad/weights.hpp"

#include <string>

#include "json.hpp"

namespace anchorquad {

/// Builds a weight family from its JSON description (the format written by WeightFamily::to_json).
WeightFamily weights_from_json(const nlohmann::json& j);

/// Parses the compact command-line form, e.g.
///   prod:pow:1:3            product, gamma_j = 1 * j^-3
///   prod:list:1,0.5,0.25    product with an explicit generator
///   fprod:pow:1:3:2         finite-product of order 2
///   pod:pow:1:3:2,6         POD with Gamma_2 = 2, Gamma_3 = 6
///   lex:pow:1:2:3           lexicographically ordered, omega = 3 ("inf" allowed)
///   fi:blocks:1:3:2         finite-intersection block rule with block size 2
///   explicit:{}=1|1=2|1,2=0.125
/// A trailing "@sigma" applies a cut-off. Anything else is read as a path to a JSON file.
WeightFamily parse_weights(const std::string& text);

/// "inf" / "infinity" or a positive integer.
int parse_order(const std::string& text);

}  // namespace anchorquad
