#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

// Protocol types: the behavioural-type AST describing the communication
// structure of a process, plus the validity checks for branching and
// timeout types.
//
// A type is an immutable tree shared via TypePtr; all construction goes
// through the factory functions at the bottom of this header.

namespace chansel {

using Label = std::string;

enum class Capability { Input, Output, InputOutput };

// io refs can be used wherever a plain input or output ref is expected.
bool capability_le(Capability sub, Capability sup);
std::string to_string(Capability c);

struct TypeExpr;
using TypePtr = std::shared_ptr<const TypeExpr>;

// A channel position in a protocol type: either the name of a channel
// bound in the environment, or an inline channel type (matched
// structurally, not by identity).
using TypeRef = std::variant<std::string, TypePtr>;

enum class BaseKind { Unit, Bool, String, Int };

struct BaseT { BaseKind kind; };
struct TopT {};
struct BottomT {};
struct ChanT {
  Capability cap;
  TypePtr payload;
};
struct LabelledT {
  Label label;
  TypePtr inner;
};
struct UnionT { std::vector<TypePtr> members; };   // non-empty
struct TupleT { std::vector<TypePtr> members; };
struct NilT {};
struct OutT {
  TypeRef chan;
  TypePtr payload;
  TypePtr cont;
};
struct InT {
  TypeRef chan;
  TypePtr payload;
  std::string var;   // binder for the received value (informational)
  TypePtr cont;
};
struct BranchCaseT {
  Label label;
  TypePtr arg;       // payload type, without the label wrapper
  TypePtr cont;
};
struct BranchT {
  std::vector<TypeRef> chans;        // non-empty
  std::vector<BranchCaseT> cases;    // non-empty, ordered
};
struct TimeoutT {
  TypePtr inner;     // must resolve to an input or branch type
  TypePtr handler;
};
struct ParT {
  TypePtr left;
  TypePtr right;
};
struct RecT {
  std::string var;
  TypePtr body;
};
struct VarT { std::string var; };

struct TypeExpr {
  std::variant<BaseT, TopT, BottomT, ChanT, LabelledT, UnionT, TupleT, NilT,
               OutT, InT, BranchT, TimeoutT, ParT, RecT, VarT>
      node;
};

// ---------------------------------------------------------------------------
// Diagnostics

enum class DiagKind {
  EmptyIndexSet,
  UnboundVar,
  BadTimeoutInner,
  BadCapability,
  UnlabelledPayload,
  DuplicateLabel,
  UncoveredLabel,
  PayloadMismatch,
  UnresolvedChannel,
  ShapeMismatch,
  ChannelMismatch,
  ChannelSetMismatch,
  MissingCase,
  ShadowedCase,
  LoopMismatch,
  Uninhabitable,
};

enum class Severity { Error, Warning };

std::string to_string(DiagKind k);

struct Diagnostic {
  DiagKind kind;
  Severity severity = Severity::Error;
  std::string path;        // position in the checked artifact
  std::string type_path;   // position in the type, when distinct
  std::string message;
};

bool has_errors(const std::vector<Diagnostic>& diags);

// ---------------------------------------------------------------------------
// Operations

// Channel environment: channel name -> ChanT type.
using TypeEnv = std::map<std::string, TypePtr>;

// Structural well-formedness: non-empty index sets, closed recursion
// variables, timeout bodies that can actually time out, and capability
// sanity for inline channel refs. Returns one diagnostic per violation.
std::vector<Diagnostic> well_formed(const TypePtr& t);

// The non-union leaves of t, left to right. A non-union type is its own
// single leaf.
std::vector<TypePtr> flatten_union(const TypePtr& t);

// Checks the three branching conditions against the channels' declared
// payload types: case labels are distinct, every possible incoming label
// has a case, and each covered payload fits the case's argument type.
std::vector<Diagnostic> branch_type_valid(const BranchT& b, const TypeEnv& env);

// Structural subtyping on the fragment used by branch checking:
// reflexive, Top above everything, Bottom below everything, unions by
// member inclusion, labels by name, channels invariant in payload with
// io usable as i or o. Recursive types are unfolded at most once per
// pair along a path.
bool subsumes(const TypePtr& sub, const TypePtr& sup);

bool type_equal(const TypePtr& a, const TypePtr& b);

// One-step unfolding of rec x.T: substitutes the whole rec type for x in
// the body. Non-rec types are returned unchanged.
TypePtr unfold_rec(const TypePtr& t);

// ---------------------------------------------------------------------------
// Factories

TypePtr unit_t();
TypePtr bool_t();
TypePtr string_t();
TypePtr int_t();
TypePtr top_t();
TypePtr bottom_t();
TypePtr nil_t();
TypePtr chan_t(Capability cap, TypePtr payload);
TypePtr labelled_t(Label label, TypePtr inner);
TypePtr union_t(std::vector<TypePtr> members);
TypePtr tuple_t(std::vector<TypePtr> members);
TypePtr out_t(TypeRef chan, TypePtr payload, TypePtr cont);
TypePtr in_t(TypeRef chan, TypePtr payload, std::string var, TypePtr cont);
TypePtr branch_t(std::vector<TypeRef> chans, std::vector<BranchCaseT> cases);
TypePtr timeout_t(TypePtr inner, TypePtr handler);
TypePtr par_t(TypePtr left, TypePtr right);
TypePtr rec_t(std::string var, TypePtr body);
TypePtr var_t(std::string var);

}  // namespace chansel
