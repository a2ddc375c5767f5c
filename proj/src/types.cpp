#include "chansel/types.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "chansel/sexpr.hpp"

namespace chansel {

bool capability_le(Capability sub, Capability sup) {
  return sub == sup || sub == Capability::InputOutput;
}

std::string to_string(Capability c) {
  switch (c) {
    case Capability::Input: return "i";
    case Capability::Output: return "o";
    case Capability::InputOutput: return "io";
  }
  return "?";
}

std::string to_string(DiagKind k) {
  switch (k) {
    case DiagKind::EmptyIndexSet: return "EmptyIndexSet";
    case DiagKind::UnboundVar: return "UnboundVar";
    case DiagKind::BadTimeoutInner: return "BadTimeoutInner";
    case DiagKind::BadCapability: return "BadCapability";
    case DiagKind::UnlabelledPayload: return "UnlabelledPayload";
    case DiagKind::DuplicateLabel: return "DuplicateLabel";
    case DiagKind::UncoveredLabel: return "UncoveredLabel";
    case DiagKind::PayloadMismatch: return "PayloadMismatch";
    case DiagKind::UnresolvedChannel: return "UnresolvedChannel";
    case DiagKind::ShapeMismatch: return "ShapeMismatch";
    case DiagKind::ChannelMismatch: return "ChannelMismatch";
    case DiagKind::ChannelSetMismatch: return "ChannelSetMismatch";
    case DiagKind::MissingCase: return "MissingCase";
    case DiagKind::ShadowedCase: return "ShadowedCase";
    case DiagKind::LoopMismatch: return "LoopMismatch";
    case DiagKind::Uninhabitable: return "Uninhabitable";
  }
  return "Unknown";
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) {
    return d.severity == Severity::Error;
  });
}

// ---------------------------------------------------------------------------
// Factories

namespace {
TypePtr mk(TypeExpr e) { return std::make_shared<const TypeExpr>(std::move(e)); }
}  // namespace

TypePtr unit_t() { static TypePtr t = mk({BaseT{BaseKind::Unit}}); return t; }
TypePtr bool_t() { static TypePtr t = mk({BaseT{BaseKind::Bool}}); return t; }
TypePtr string_t() { static TypePtr t = mk({BaseT{BaseKind::String}}); return t; }
TypePtr int_t() { static TypePtr t = mk({BaseT{BaseKind::Int}}); return t; }
TypePtr top_t() { static TypePtr t = mk({TopT{}}); return t; }
TypePtr bottom_t() { static TypePtr t = mk({BottomT{}}); return t; }
TypePtr nil_t() { static TypePtr t = mk({NilT{}}); return t; }

TypePtr chan_t(Capability cap, TypePtr payload) {
  return mk({ChanT{cap, std::move(payload)}});
}
TypePtr labelled_t(Label label, TypePtr inner) {
  return mk({LabelledT{std::move(label), std::move(inner)}});
}
TypePtr union_t(std::vector<TypePtr> members) {
  return mk({UnionT{std::move(members)}});
}
TypePtr tuple_t(std::vector<TypePtr> members) {
  return mk({TupleT{std::move(members)}});
}
TypePtr out_t(TypeRef chan, TypePtr payload, TypePtr cont) {
  return mk({OutT{std::move(chan), std::move(payload), std::move(cont)}});
}
TypePtr in_t(TypeRef chan, TypePtr payload, std::string var, TypePtr cont) {
  return mk({InT{std::move(chan), std::move(payload), std::move(var),
                 std::move(cont)}});
}
TypePtr branch_t(std::vector<TypeRef> chans, std::vector<BranchCaseT> cases) {
  return mk({BranchT{std::move(chans), std::move(cases)}});
}
TypePtr timeout_t(TypePtr inner, TypePtr handler) {
  return mk({TimeoutT{std::move(inner), std::move(handler)}});
}
TypePtr par_t(TypePtr left, TypePtr right) {
  return mk({ParT{std::move(left), std::move(right)}});
}
TypePtr rec_t(std::string var, TypePtr body) {
  return mk({RecT{std::move(var), std::move(body)}});
}
TypePtr var_t(std::string var) { return mk({VarT{std::move(var)}}); }

// ---------------------------------------------------------------------------
// well_formed

namespace {

struct WfWalk {
  std::vector<Diagnostic> diags;
  std::vector<std::string> bound;

  void fail(DiagKind k, const std::string& path, std::string msg) {
    diags.push_back({k, Severity::Error, path, "", std::move(msg)});
  }

  void ref(const TypeRef& r, const std::string& path, bool want_input) {
    if (const auto* inl = std::get_if<TypePtr>(&r)) {
      if (const auto* c = std::get_if<ChanT>(&(*inl)->node)) {
        bool ok = want_input ? c->cap != Capability::Output
                             : c->cap != Capability::Input;
        if (!ok) {
          fail(DiagKind::BadCapability, path,
               want_input ? "output-only channel in a listen position"
                          : "input-only channel in a send position");
        }
        walk(c->payload, path + "/payload");
      } else {
        fail(DiagKind::BadCapability, path, "inline ref is not a channel type");
      }
    }
    // Named refs are resolved later, against an environment.
  }

  // A timeout body must be able to receive: an input, a branch, or a
  // recursion unfolding to one.
  bool timeoutable(const TypePtr& t, int depth = 0) {
    if (depth > 64) return false;
    if (std::holds_alternative<InT>(t->node)) return true;
    if (std::holds_alternative<BranchT>(t->node)) return true;
    if (std::holds_alternative<VarT>(t->node)) return true;  // checked at its binder
    if (const auto* r = std::get_if<RecT>(&t->node))
      return timeoutable(r->body, depth + 1);
    return false;
  }

  void walk(const TypePtr& t, const std::string& path) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, ChanT>) {
            walk(n.payload, path + "/payload");
          } else if constexpr (std::is_same_v<T, LabelledT>) {
            if (n.label.empty())
              fail(DiagKind::UnlabelledPayload, path, "empty label");
            walk(n.inner, path + "/inner");
          } else if constexpr (std::is_same_v<T, UnionT>) {
            if (n.members.empty())
              fail(DiagKind::EmptyIndexSet, path, "union with no members");
            for (std::size_t i = 0; i < n.members.size(); ++i)
              walk(n.members[i], path + "/union[" + std::to_string(i) + "]");
          } else if constexpr (std::is_same_v<T, TupleT>) {
            for (std::size_t i = 0; i < n.members.size(); ++i)
              walk(n.members[i], path + "/tuple[" + std::to_string(i) + "]");
          } else if constexpr (std::is_same_v<T, OutT>) {
            ref(n.chan, path + "/chan", /*want_input=*/false);
            walk(n.payload, path + "/payload");
            walk(n.cont, path + "/cont");
          } else if constexpr (std::is_same_v<T, InT>) {
            ref(n.chan, path + "/chan", /*want_input=*/true);
            walk(n.payload, path + "/payload");
            walk(n.cont, path + "/cont");
          } else if constexpr (std::is_same_v<T, BranchT>) {
            if (n.chans.empty())
              fail(DiagKind::EmptyIndexSet, path, "branch with no channels");
            if (n.cases.empty())
              fail(DiagKind::EmptyIndexSet, path, "branch with no cases");
            for (std::size_t i = 0; i < n.chans.size(); ++i)
              ref(n.chans[i], path + "/chan[" + std::to_string(i) + "]",
                  /*want_input=*/true);
            for (std::size_t i = 0; i < n.cases.size(); ++i) {
              const auto& c = n.cases[i];
              std::string p = path + "/case[" + std::to_string(i) + "]";
              if (c.label.empty()) fail(DiagKind::UnlabelledPayload, p, "empty label");
              walk(c.arg, p + "/arg");
              walk(c.cont, p + "/cont");
            }
          } else if constexpr (std::is_same_v<T, TimeoutT>) {
            if (!timeoutable(n.inner))
              fail(DiagKind::BadTimeoutInner, path + "/inner",
                   "timeout body is not an input or branch");
            walk(n.inner, path + "/inner");
            walk(n.handler, path + "/handler");
          } else if constexpr (std::is_same_v<T, ParT>) {
            walk(n.left, path + "/left");
            walk(n.right, path + "/right");
          } else if constexpr (std::is_same_v<T, RecT>) {
            bound.push_back(n.var);
            walk(n.body, path + "/body");
            bound.pop_back();
          } else if constexpr (std::is_same_v<T, VarT>) {
            if (std::find(bound.rbegin(), bound.rend(), n.var) == bound.rend())
              fail(DiagKind::UnboundVar, path, "unbound variable " + n.var);
          }
          // BaseT, TopT, BottomT, NilT: nothing to check.
        },
        t->node);
  }
};

}  // namespace

std::vector<Diagnostic> well_formed(const TypePtr& t) {
  WfWalk w;
  w.walk(t, "");
  return w.diags;
}

// ---------------------------------------------------------------------------
// flatten_union

namespace {
void flatten_into(const TypePtr& t, std::vector<TypePtr>& out) {
  if (const auto* u = std::get_if<UnionT>(&t->node)) {
    for (const auto& m : u->members) flatten_into(m, out);
  } else {
    out.push_back(t);
  }
}
}  // namespace

std::vector<TypePtr> flatten_union(const TypePtr& t) {
  std::vector<TypePtr> out;
  flatten_into(t, out);
  return out;
}

// ---------------------------------------------------------------------------
// Equality, substitution, subsumption

bool type_equal(const TypePtr& a, const TypePtr& b) {
  if (a == b) return true;
  return print_type(a) == print_type(b);
}

namespace {

TypePtr substitute(const TypePtr& t, const std::string& var, const TypePtr& rep) {
  return std::visit(
      [&](const auto& n) -> TypePtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, VarT>) {
          return n.var == var ? rep : t;
        } else if constexpr (std::is_same_v<T, RecT>) {
          if (n.var == var) return t;  // shadowed
          return rec_t(n.var, substitute(n.body, var, rep));
        } else if constexpr (std::is_same_v<T, ChanT>) {
          return chan_t(n.cap, substitute(n.payload, var, rep));
        } else if constexpr (std::is_same_v<T, LabelledT>) {
          return labelled_t(n.label, substitute(n.inner, var, rep));
        } else if constexpr (std::is_same_v<T, UnionT>) {
          std::vector<TypePtr> ms;
          for (const auto& m : n.members) ms.push_back(substitute(m, var, rep));
          return union_t(std::move(ms));
        } else if constexpr (std::is_same_v<T, TupleT>) {
          std::vector<TypePtr> ms;
          for (const auto& m : n.members) ms.push_back(substitute(m, var, rep));
          return tuple_t(std::move(ms));
        } else if constexpr (std::is_same_v<T, OutT>) {
          TypeRef r = n.chan;
          if (auto* inl = std::get_if<TypePtr>(&r)) *inl = substitute(*inl, var, rep);
          return out_t(std::move(r), substitute(n.payload, var, rep),
                       substitute(n.cont, var, rep));
        } else if constexpr (std::is_same_v<T, InT>) {
          TypeRef r = n.chan;
          if (auto* inl = std::get_if<TypePtr>(&r)) *inl = substitute(*inl, var, rep);
          return in_t(std::move(r), substitute(n.payload, var, rep), n.var,
                      substitute(n.cont, var, rep));
        } else if constexpr (std::is_same_v<T, BranchT>) {
          std::vector<TypeRef> chans;
          for (TypeRef r : n.chans) {
            if (auto* inl = std::get_if<TypePtr>(&r)) *inl = substitute(*inl, var, rep);
            chans.push_back(std::move(r));
          }
          std::vector<BranchCaseT> cases;
          for (const auto& c : n.cases)
            cases.push_back({c.label, substitute(c.arg, var, rep),
                             substitute(c.cont, var, rep)});
          return branch_t(std::move(chans), std::move(cases));
        } else if constexpr (std::is_same_v<T, TimeoutT>) {
          return timeout_t(substitute(n.inner, var, rep),
                           substitute(n.handler, var, rep));
        } else if constexpr (std::is_same_v<T, ParT>) {
          return par_t(substitute(n.left, var, rep), substitute(n.right, var, rep));
        } else {
          return t;
        }
      },
      t->node);
}

using SeenPairs = std::set<std::pair<std::string, std::string>>;

bool subsumes_impl(const TypePtr& sub, const TypePtr& sup, SeenPairs& seen);

bool mutual(const TypePtr& a, const TypePtr& b, SeenPairs& seen) {
  return subsumes_impl(a, b, seen) && subsumes_impl(b, a, seen);
}

bool subsumes_impl(const TypePtr& sub, const TypePtr& sup, SeenPairs& seen) {
  if (sub == sup) return true;
  if (std::holds_alternative<TopT>(sup->node)) return true;
  if (std::holds_alternative<BottomT>(sub->node)) return true;

  // Unfold recursion coinductively: assume the pair holds while checking.
  if (std::holds_alternative<RecT>(sub->node) ||
      std::holds_alternative<RecT>(sup->node)) {
    auto key = std::make_pair(print_type(sub), print_type(sup));
    if (!seen.insert(key).second) return true;
    return subsumes_impl(unfold_rec(sub), unfold_rec(sup), seen);
  }

  // A union on the left must subsume member-wise.
  if (const auto* u = std::get_if<UnionT>(&sub->node)) {
    return std::all_of(u->members.begin(), u->members.end(),
                       [&](const TypePtr& m) { return subsumes_impl(m, sup, seen); });
  }
  // A union on the right needs one witness member.
  if (const auto* u = std::get_if<UnionT>(&sup->node)) {
    return std::any_of(u->members.begin(), u->members.end(),
                       [&](const TypePtr& m) { return subsumes_impl(sub, m, seen); });
  }

  if (const auto* a = std::get_if<BaseT>(&sub->node)) {
    const auto* b = std::get_if<BaseT>(&sup->node);
    return b && a->kind == b->kind;
  }
  if (const auto* a = std::get_if<LabelledT>(&sub->node)) {
    const auto* b = std::get_if<LabelledT>(&sup->node);
    return b && a->label == b->label && subsumes_impl(a->inner, b->inner, seen);
  }
  if (const auto* a = std::get_if<TupleT>(&sub->node)) {
    const auto* b = std::get_if<TupleT>(&sup->node);
    if (!b || a->members.size() != b->members.size()) return false;
    for (std::size_t i = 0; i < a->members.size(); ++i)
      if (!subsumes_impl(a->members[i], b->members[i], seen)) return false;
    return true;
  }
  if (const auto* a = std::get_if<ChanT>(&sub->node)) {
    const auto* b = std::get_if<ChanT>(&sup->node);
    return b && capability_le(a->cap, b->cap) && mutual(a->payload, b->payload, seen);
  }
  if (std::holds_alternative<NilT>(sub->node))
    return std::holds_alternative<NilT>(sup->node);
  if (std::holds_alternative<TopT>(sub->node)) return false;
  // Process-shaped types (OutT/InT/BranchT/...) only subsume by equality.
  return type_equal(sub, sup);
}

}  // namespace

TypePtr unfold_rec(const TypePtr& t) {
  if (const auto* r = std::get_if<RecT>(&t->node))
    return substitute(r->body, r->var, t);
  return t;
}

bool subsumes(const TypePtr& sub, const TypePtr& sup) {
  SeenPairs seen;
  return subsumes_impl(sub, sup, seen);
}

// ---------------------------------------------------------------------------
// branch_type_valid

namespace {

// Resolve a type ref to its channel type, or null with a diagnostic.
TypePtr resolve_ref(const TypeRef& r, const TypeEnv& env, const std::string& path,
                    std::vector<Diagnostic>& diags) {
  if (const auto* name = std::get_if<std::string>(&r)) {
    auto it = env.find(*name);
    if (it == env.end()) {
      diags.push_back({DiagKind::UnresolvedChannel, Severity::Error, path, "",
                       "no binding for channel " + *name});
      return nullptr;
    }
    return it->second;
  }
  return std::get<TypePtr>(r);
}

}  // namespace

std::vector<Diagnostic> branch_type_valid(const BranchT& b, const TypeEnv& env) {
  std::vector<Diagnostic> diags;

  // Collect the labelled members of the channels' payload union.
  std::vector<std::pair<Label, TypePtr>> incoming;  // label -> payload
  for (std::size_t i = 0; i < b.chans.size(); ++i) {
    std::string path = "/chan[" + std::to_string(i) + "]";
    TypePtr ct = resolve_ref(b.chans[i], env, path, diags);
    if (!ct) continue;
    const auto* chan = std::get_if<ChanT>(&ct->node);
    if (!chan) {
      diags.push_back({DiagKind::UnresolvedChannel, Severity::Error, path, "",
                       "ref does not denote a channel type"});
      continue;
    }
    if (chan->cap == Capability::Output) {
      diags.push_back({DiagKind::BadCapability, Severity::Error, path, "",
                       "branch listens on an output-only channel"});
      continue;
    }
    for (const auto& leaf : flatten_union(chan->payload)) {
      if (const auto* lab = std::get_if<LabelledT>(&leaf->node)) {
        incoming.emplace_back(lab->label, lab->inner);
      } else {
        diags.push_back({DiagKind::UnlabelledPayload, Severity::Error, path, "",
                         "branch channel payload member has no label"});
      }
    }
  }

  // Label distinctness across the cases.
  std::set<Label> seen;
  for (std::size_t i = 0; i < b.cases.size(); ++i) {
    if (!seen.insert(b.cases[i].label).second)
      diags.push_back({DiagKind::DuplicateLabel, Severity::Error,
                       "/case[" + std::to_string(i) + "]", "",
                       "duplicate case label " + b.cases[i].label});
  }

  // Coverage and payload compatibility, first matching case wins.
  std::set<Label> missing_reported;
  for (const auto& [label, payload] : incoming) {
    auto it = std::find_if(b.cases.begin(), b.cases.end(),
                           [&](const BranchCaseT& c) { return c.label == label; });
    if (it == b.cases.end()) {
      if (missing_reported.insert(label).second)
        diags.push_back({DiagKind::UncoveredLabel, Severity::Error, "", "",
                         "no case for incoming label " + label});
      continue;
    }
    if (!subsumes(payload, it->arg)) {
      diags.push_back(
          {DiagKind::PayloadMismatch, Severity::Error,
           "/case[" + std::to_string(it - b.cases.begin()) + "]/arg", "",
           "payload of " + label + " does not fit the case argument type"});
    }
  }

  return diags;
}

}  // namespace chansel
