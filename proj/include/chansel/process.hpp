#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "chansel/types.hpp"
#include "chansel/value.hpp"

// The runnable process AST. Continuations are suspended functions rather
// than pre-expanded trees, because recursion makes the tree infinite;
// forcing a continuation builds AST and must not perform communication
// itself. Engines interleave forcing and interpreting.

namespace chansel {

struct ProcNode;
using ProcPtr = std::shared_ptr<const ProcNode>;

using Thunk = std::function<ProcPtr()>;
using RecvCont = std::function<ProcPtr(const Value&)>;

using Duration = std::chrono::milliseconds;  // one virtual tick = 1 ms

// A channel position in a process: a concrete channel reference or the
// name of a parameter bound at spawn time.
using ChanExprRef = std::variant<ChanRefV, std::string>;

std::string to_string(const ChanExprRef& r);

struct MatchCase {
  Label label;
  TypePtr arg_descriptor;  // runtime tag test for the payload
  RecvCont continuation;   // receives the unwrapped payload
};

struct EndP {};
struct SendP {
  ChanExprRef chan;
  Value value;
  Thunk cont;
};
struct RecvP {
  ChanExprRef chan;
  RecvCont cont;
  std::optional<Duration> timeout;
};
struct BranchP {
  std::vector<ChanExprRef> chans;
  std::vector<MatchCase> cases;
  std::optional<Duration> timeout;
};
struct CatchTimeoutP {
  Thunk inner;       // must force to a Recv or Branch carrying a timeout
  Thunk on_timeout;
};
struct ParP {
  ProcPtr left;
  ProcPtr right;
};
struct RecP {
  std::string var;
  Thunk body;
};
struct LoopP { std::string var; };

struct ProcNode {
  std::variant<EndP, SendP, RecvP, BranchP, CatchTimeoutP, ParP, RecP, LoopP>
      node;
};

// ---------------------------------------------------------------------------
// Construction

struct ConstructionError : std::runtime_error {
  enum class Kind {
    EmptyChannels,
    EmptyCases,
    NotInputChannel,
    UncoveredLabel,
  };
  Kind kind;
  ConstructionError(Kind k, const std::string& msg)
      : std::runtime_error(msg), kind(k) {}
};

ProcPtr end_p();
ProcPtr send_p(ChanExprRef chan, Value value, Thunk cont);
ProcPtr recv_p(ChanExprRef chan, RecvCont cont,
               std::optional<Duration> timeout = std::nullopt);
ProcPtr par_p(ProcPtr left, ProcPtr right);
ProcPtr rec_p(std::string var, Thunk body);
ProcPtr loop_p(std::string var);

// Builds a branch node, validating what can be validated at construction:
// channel and case lists are non-empty, concrete channel refs are
// input-capable, and — when the channels' payload types are declared —
// the cases cover every incoming label. Case order is meaningful: the
// first matching case wins, so duplicate labels are legal here; a case
// that can never fire is reported through `warnings`.
ProcPtr mk_branch(std::vector<ChanExprRef> chans, std::vector<MatchCase> cases,
                  std::optional<Duration> timeout = std::nullopt,
                  const std::vector<TypePtr>& declared_payloads = {},
                  std::vector<Diagnostic>* warnings = nullptr);

// Wraps a suspended input or branch with a timeout handler. The wrapped
// process supplies the timeout duration itself; whether it really is an
// input/branch is only known once forced, so that check happens in the
// engines.
ProcPtr mk_catch_timeout(Thunk inner, Thunk on_timeout);

// ---------------------------------------------------------------------------
// Unfolding

struct UnboundLoopVar : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using LoopEnv = std::map<std::string, Thunk>;

// One unfolding step: rec binds its body and forces it, loop re-forces the
// bound body, anything else is returned unchanged. Throws UnboundLoopVar.
ProcPtr unfold(const ProcPtr& p, LoopEnv& env);

// First case accepting a labelled value, with the unwrapped payload.
struct CaseSelection {
  std::size_t index;
  Value payload;
};
std::optional<CaseSelection> pick_case(const std::vector<MatchCase>& cases,
                                       const Value& v);

}  // namespace chansel
