#pragma once

#include <string>

#include "msbasis/fem_core.hpp"

namespace msbasis {

/// Compiles a small arithmetic expression over x1 and x2 into an evaluator.
/// Grammar: numbers, x1, x2, + - * / ^ (right-associative), unary minus,
/// sin(...), cos(...), parentheses. Throws ConfigError on malformed input.
RhsEvaluator parse_expression(const std::string& text);

/// Right-hand-side descriptor as it appears in experiment configs.
struct RhsSpec {
  std::string kind = "const_minus_one";  // const_minus_one | poly_x1p4_x2p3 | expression
  std::string expression;                // used when kind == "expression"
};

/// Resolves a descriptor to an evaluator; preset kinds are hard-wired,
/// expression kind goes through parse_expression.
RhsEvaluator make_rhs(const RhsSpec& spec);

}  // namespace msbasis
