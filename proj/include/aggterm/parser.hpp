#pragma once

#include <string>
#include <string_view>

#include "aggterm/registry.hpp"
#include "aggterm/term.hpp"

namespace aggterm {

struct ParseOptions {
  /// Reject variables that no aggregator binds.
  bool closed = false;
};

/// Grammar:
///   term := number | `[` number {`,` number} `]` | `H(` var `)` | `rw(` var `,` int `)`
///         | ident [`(` [term {`,` term}] `)`]
///         | `wmean[` var [`in N(` var `)`] `](` term `,` posfn [`,` term] `)`
///         | `mean[` var [`in N(` var `)`] `](` term `)`
///         | `gcn[` var `in N(` var `)](` term `)`
/// `#` starts a comment running to the end of the line. Throws ParseError.
TermPtr parse_term(std::string_view text, const FunctionRegistry& registry,
                   ParseOptions options = {});

std::string print_term(const Term& t);

/// Shortest text that reads back to exactly `x`.
std::string format_number(double x);

}  // namespace aggterm
