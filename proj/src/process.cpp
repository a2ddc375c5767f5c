#include "chansel/process.hpp"

#include <algorithm>
#include <set>

namespace chansel {

std::string to_string(const ChanExprRef& r) {
  if (const auto* name = std::get_if<std::string>(&r)) return *name;
  const auto& c = std::get<ChanRefV>(r);
  return "#chan" + std::to_string(c.id.value);
}

namespace {
ProcPtr mk(ProcNode n) { return std::make_shared<const ProcNode>(std::move(n)); }
}  // namespace

ProcPtr end_p() {
  static ProcPtr p = mk({EndP{}});
  return p;
}

ProcPtr send_p(ChanExprRef chan, Value value, Thunk cont) {
  return mk({SendP{std::move(chan), std::move(value), std::move(cont)}});
}

ProcPtr recv_p(ChanExprRef chan, RecvCont cont, std::optional<Duration> timeout) {
  return mk({RecvP{std::move(chan), std::move(cont), timeout}});
}

ProcPtr par_p(ProcPtr left, ProcPtr right) {
  return mk({ParP{std::move(left), std::move(right)}});
}

ProcPtr rec_p(std::string var, Thunk body) {
  return mk({RecP{std::move(var), std::move(body)}});
}

ProcPtr loop_p(std::string var) { return mk({LoopP{std::move(var)}}); }

ProcPtr mk_branch(std::vector<ChanExprRef> chans, std::vector<MatchCase> cases,
                  std::optional<Duration> timeout,
                  const std::vector<TypePtr>& declared_payloads,
                  std::vector<Diagnostic>* warnings) {
  if (chans.empty())
    throw ConstructionError(ConstructionError::Kind::EmptyChannels,
                            "branch needs at least one channel");
  if (cases.empty())
    throw ConstructionError(ConstructionError::Kind::EmptyCases,
                            "branch needs at least one case");
  for (const auto& c : chans) {
    if (const auto* ref = std::get_if<ChanRefV>(&c)) {
      if (ref->cap == Capability::Output)
        throw ConstructionError(ConstructionError::Kind::NotInputChannel,
                                "branch listens on output-only channel " +
                                    to_string(c));
    }
    // Named parameters are resolved at spawn; capability faults surface then.
  }

  if (!declared_payloads.empty()) {
    // Coverage against the declared incoming union, first-match semantics.
    std::set<Label> incoming;
    for (const auto& payload : declared_payloads) {
      for (const auto& leaf : flatten_union(payload)) {
        if (const auto* lab = std::get_if<LabelledT>(&leaf->node))
          incoming.insert(lab->label);
      }
    }
    for (const auto& label : incoming) {
      bool covered = std::any_of(cases.begin(), cases.end(), [&](const MatchCase& m) {
        return m.label == label;
      });
      if (!covered)
        throw ConstructionError(ConstructionError::Kind::UncoveredLabel,
                                "no case for incoming label " + label);
    }
    if (warnings) {
      // A case is dead if an earlier case has the same label.
      std::set<Label> seen;
      for (std::size_t i = 0; i < cases.size(); ++i) {
        if (!seen.insert(cases[i].label).second)
          warnings->push_back({DiagKind::ShadowedCase, Severity::Warning,
                               "/case[" + std::to_string(i) + "]", "",
                               "case " + cases[i].label +
                                   " is shadowed by an earlier case"});
      }
    }
  }

  return mk({BranchP{std::move(chans), std::move(cases), timeout}});
}

ProcPtr mk_catch_timeout(Thunk inner, Thunk on_timeout) {
  return mk({CatchTimeoutP{std::move(inner), std::move(on_timeout)}});
}

ProcPtr unfold(const ProcPtr& p, LoopEnv& env) {
  if (const auto* r = std::get_if<RecP>(&p->node)) {
    env[r->var] = r->body;
    return r->body();
  }
  if (const auto* l = std::get_if<LoopP>(&p->node)) {
    auto it = env.find(l->var);
    if (it == env.end()) throw UnboundLoopVar("unbound loop variable " + l->var);
    return it->second();
  }
  return p;
}

std::optional<CaseSelection> pick_case(const std::vector<MatchCase>& cases,
                                       const Value& v) {
  auto label = top_label(v);
  if (!label) return std::nullopt;
  const Value& payload = unwrap_labelled(v);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (cases[i].label == *label &&
        value_conforms(payload, cases[i].arg_descriptor)) {
      return CaseSelection{i, payload};
    }
  }
  return std::nullopt;
}

}  // namespace chansel
