#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <vector>

#include "chansel/process.hpp"
#include "chansel/types.hpp"

// Conformance checking: does a process AST implement a protocol type?
//
// The check is a structural co-walk. Suspended continuations are explored
// by feeding them canonical synthetic values of the expected payload type
// — one value per member when the payload is a union, so every declared
// alternative is visited. Recursion converges coinductively: a process
// rec variable is paired with the type rec variable it meets, and meeting
// the same pair again counts as success.

namespace chansel {

struct ConformanceEnv {
  // Symbolic channel name -> channel type (ChanT).
  TypeEnv channel_bindings;
  // Payload types for channels created at runtime through a typed
  // allocator. The checker also records the synthetic channels it makes
  // up while exploring continuations.
  std::shared_ptr<std::map<ChannelId, TypePtr>> chan_types;
};

// Empty result = p conforms to t (warnings, e.g. dead branch cases, are
// non-empty but carry Severity::Warning).
std::vector<Diagnostic> check(const ProcPtr& p, const TypePtr& t,
                              const ConformanceEnv& env);

struct UninhabitableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Canonical inhabitant of a first-order payload type. Throws
// UninhabitableError for bot (and for process-shaped types, which have no
// values).
Value synth_value(const TypePtr& t);

// One canonical value per union alternative (unions distribute through
// labels; tuple members collapse to their canonical value).
std::vector<Value> synth_values(const TypePtr& t);

}  // namespace chansel
