#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "chansel/types.hpp"

// Plain-text serialization of protocol types, s-expression style.
// There is exactly one canonical printing per type and parse(print(t))
// reproduces t.
//
// Grammar (whitespace-separated tokens, `(` and `)` self-delimiting):
//
//   T ::= unit | bool | string | int | top | bot | nil
//       | (chan CAP T)              CAP ::= i | o | io
//       | (label NAME T)
//       | (union T T*)
//       | (tuple T*)
//       | (out REF T T)
//       | (in REF T NAME T)
//       | (branch (REF REF*) (case NAME T T) (case NAME T T)*)
//       | (timeout T T)
//       | (par T T)
//       | (rec NAME T)
//       | (var NAME)
//   REF ::= NAME | (chan CAP T)
//
// NAME is a non-empty identifier: [A-Za-z_][A-Za-z0-9_.-]*.

namespace chansel {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string print_type(const TypePtr& t);
TypePtr parse_type(std::string_view text);  // throws ParseError

}  // namespace chansel
