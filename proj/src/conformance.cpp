#include "chansel/conformance.hpp"

#include <set>

#include "chansel/sexpr.hpp"

namespace chansel {

// ---------------------------------------------------------------------------
// Synthetic values

namespace {

// Synthetic channel ids live far above anything a registry hands out.
constexpr std::uint64_t kSyntheticBase = 1ull << 40;

struct Synth {
  std::uint64_t next = kSyntheticBase;
  std::map<ChannelId, TypePtr>* table = nullptr;

  Value value(const TypePtr& t, int depth = 0) {
    if (depth > 64) throw UninhabitableError("payload type too deep");
    if (const auto* b = std::get_if<BaseT>(&t->node)) {
      switch (b->kind) {
        case BaseKind::Unit: return v_unit();
        case BaseKind::Bool: return v_bool(true);
        case BaseKind::String: return v_str("");
        case BaseKind::Int: return v_int(0);
      }
    }
    if (std::holds_alternative<TopT>(t->node)) return v_unit();
    if (std::holds_alternative<BottomT>(t->node))
      throw UninhabitableError("bot has no values");
    if (const auto* l = std::get_if<LabelledT>(&t->node))
      return v_labelled(l->label, value(l->inner, depth + 1));
    if (const auto* u = std::get_if<UnionT>(&t->node)) {
      if (u->members.empty()) throw UninhabitableError("empty union");
      return value(u->members.front(), depth + 1);
    }
    if (const auto* tp = std::get_if<TupleT>(&t->node)) {
      std::vector<Value> items;
      items.reserve(tp->members.size());
      for (const auto& m : tp->members) items.push_back(value(m, depth + 1));
      return v_tuple(std::move(items));
    }
    if (const auto* c = std::get_if<ChanT>(&t->node)) {
      ChannelId id{next++};
      if (table) (*table)[id] = t;
      return v_chan(id, c->cap);
    }
    if (std::holds_alternative<RecT>(t->node))
      return value(unfold_rec(t), depth + 1);
    throw UninhabitableError("no canonical value for " + print_type(t));
  }

  // Union alternatives, distributed through labels.
  std::vector<Value> values(const TypePtr& t, int depth = 0) {
    if (depth > 64) throw UninhabitableError("payload type too deep");
    if (const auto* u = std::get_if<UnionT>(&t->node)) {
      std::vector<Value> out;
      for (const auto& m : u->members) {
        auto vs = values(m, depth + 1);
        out.insert(out.end(), vs.begin(), vs.end());
      }
      return out;
    }
    if (const auto* l = std::get_if<LabelledT>(&t->node)) {
      std::vector<Value> out;
      for (auto& inner : values(l->inner, depth + 1))
        out.push_back(v_labelled(l->label, std::move(inner)));
      return out;
    }
    if (std::holds_alternative<RecT>(t->node))
      return values(unfold_rec(t), depth + 1);
    return {value(t, depth)};
  }
};

}  // namespace

Value synth_value(const TypePtr& t) {
  Synth s;
  return s.value(t);
}

std::vector<Value> synth_values(const TypePtr& t) {
  Synth s;
  return s.values(t);
}

// ---------------------------------------------------------------------------
// The checker

namespace {

const char* proc_shape(const ProcPtr& p) {
  return std::visit(
      [](const auto& n) -> const char* {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, EndP>) return "end";
        else if constexpr (std::is_same_v<T, SendP>) return "send";
        else if constexpr (std::is_same_v<T, RecvP>) return "recv";
        else if constexpr (std::is_same_v<T, BranchP>) return "branch";
        else if constexpr (std::is_same_v<T, CatchTimeoutP>) return "catch-timeout";
        else if constexpr (std::is_same_v<T, ParP>) return "par";
        else if constexpr (std::is_same_v<T, RecP>) return "rec";
        else return "loop";
      },
      p->node);
}

struct Scope {
  std::map<std::string, std::string> proc2type;  // rec-var pairing
  std::map<std::string, std::string> type2proc;
  std::map<std::string, TypePtr> type_recs;      // type var -> its rec node
  std::set<const TypeExpr*> unfolding;           // rec nodes opened on this path
  bool allow_timed = false;                      // inside a timeout type

  bool paired(const std::string& pv, const std::string& tv) const {
    auto a = proc2type.find(pv);
    auto b = type2proc.find(tv);
    return a != proc2type.end() && b != type2proc.end() && a->second == tv &&
           b->second == pv;
  }
};

struct Checker {
  std::vector<Diagnostic> diags;
  std::map<ChannelId, TypePtr>* chan_types;
  const TypeEnv* bindings;
  Synth synth;

  void err(DiagKind k, const std::string& path, const std::string& tpath,
           std::string msg) {
    diags.push_back({k, Severity::Error, path, tpath, std::move(msg)});
  }
  void warn(DiagKind k, const std::string& path, const std::string& tpath,
            std::string msg) {
    diags.push_back({k, Severity::Warning, path, tpath, std::move(msg)});
  }

  bool errors_since(std::size_t mark) const {
    for (std::size_t i = mark; i < diags.size(); ++i)
      if (diags[i].severity == Severity::Error) return true;
    return false;
  }

  // Channel type the process-side ref denotes, if known.
  TypePtr proc_chan_type(const ChanExprRef& pc) const {
    if (const auto* name = std::get_if<std::string>(&pc)) {
      auto it = bindings->find(*name);
      return it == bindings->end() ? nullptr : it->second;
    }
    const auto& ref = std::get<ChanRefV>(pc);
    auto it = chan_types->find(ref.id);
    return it == chan_types->end() ? nullptr : it->second;
  }

  bool chan_matches(const ChanExprRef& pc, const TypeRef& tc) const {
    if (const auto* tname = std::get_if<std::string>(&tc)) {
      const auto* pname = std::get_if<std::string>(&pc);
      return pname && *pname == *tname;
    }
    // Inline channel type: match structurally against what we know about
    // the process channel.
    const TypePtr& want = std::get<TypePtr>(tc);
    const auto* wc = std::get_if<ChanT>(&want->node);
    TypePtr have = proc_chan_type(pc);
    if (!wc || !have) return false;
    const auto* hc = std::get_if<ChanT>(&have->node);
    if (!hc) return false;
    return capability_le(hc->cap, wc->cap) &&
           subsumes(hc->payload, wc->payload) &&
           subsumes(wc->payload, hc->payload);
  }

  ProcPtr force(const Thunk& th, const std::string& path) {
    try {
      return th();
    } catch (const std::exception& e) {
      err(DiagKind::ShapeMismatch, path, "",
          std::string("continuation raised: ") + e.what());
      return nullptr;
    }
  }

  void walk(const ProcPtr& p, const TypePtr& t, Scope scope, std::string path,
            std::string tpath) {
    if (!p) return;  // a force already failed here

    // Type-side recursion and unions first.
    if (const auto* v = std::get_if<VarT>(&t->node)) {
      if (const auto* lp = std::get_if<LoopP>(&p->node)) {
        if (!scope.paired(lp->var, v->var))
          err(DiagKind::LoopMismatch, path, tpath,
              "loop " + lp->var + " does not correspond to " + v->var);
        return;
      }
      auto it = scope.type_recs.find(v->var);
      if (it == scope.type_recs.end()) {
        err(DiagKind::UnboundVar, path, tpath, "unbound type variable " + v->var);
        return;
      }
      walk(p, it->second, scope, path, tpath);
      return;
    }
    if (const auto* r = std::get_if<RecT>(&t->node)) {
      if (const auto* pr = std::get_if<RecP>(&p->node)) {
        if (scope.paired(pr->var, r->var)) return;  // converged
        scope.proc2type[pr->var] = r->var;
        scope.type2proc[r->var] = pr->var;
        scope.type_recs[r->var] = t;
        walk(force(pr->body, path), r->body, scope, path + "/" + pr->var,
             tpath + "/" + r->var);
        return;
      }
      if (const auto* lp = std::get_if<LoopP>(&p->node)) {
        if (!scope.paired(lp->var, r->var))
          err(DiagKind::LoopMismatch, path, tpath,
              "loop " + lp->var + " does not correspond to rec " + r->var);
        return;
      }
      // The process does not recurse here; open the rec body once.
      if (!scope.unfolding.insert(t.get()).second) {
        err(DiagKind::LoopMismatch, path, tpath,
            "process does not recurse where the type does");
        return;
      }
      scope.type_recs[r->var] = t;
      walk(p, r->body, scope, path, tpath + "/" + r->var);
      return;
    }
    if (const auto* u = std::get_if<UnionT>(&t->node)) {
      // Internal choice: the process may take any alternative.
      std::size_t mark = diags.size();
      for (std::size_t i = 0; i < u->members.size(); ++i) {
        walk(p, u->members[i], scope, path,
             tpath + "/union[" + std::to_string(i) + "]");
        if (!errors_since(mark)) return;
        diags.resize(mark);
      }
      err(DiagKind::ShapeMismatch, path, tpath,
          std::string(proc_shape(p)) + " matches no member of the union type");
      return;
    }

    // Process-side rec with no rec in the type: step through it.
    if (const auto* pr = std::get_if<RecP>(&p->node)) {
      walk(force(pr->body, path), t, scope, path + "/" + pr->var, tpath);
      return;
    }
    if (std::holds_alternative<LoopP>(p->node)) {
      err(DiagKind::LoopMismatch, path, tpath,
          "process loops where the type does not");
      return;
    }

    if (std::holds_alternative<EndP>(p->node)) {
      if (!std::holds_alternative<NilT>(t->node))
        err(DiagKind::ShapeMismatch, path, tpath,
            "process ends but the type is " + print_type(t));
      return;
    }

    if (const auto* s = std::get_if<SendP>(&p->node)) {
      const auto* ot = std::get_if<OutT>(&t->node);
      if (!ot) {
        err(DiagKind::ShapeMismatch, path, tpath,
            "got send-shaped process, expected " + print_type(t));
        return;
      }
      if (!chan_matches(s->chan, ot->chan))
        err(DiagKind::ChannelMismatch, path, tpath,
            "send on " + to_string(s->chan) + " does not match the typed channel");
      TypePtr vt = type_of(s->value, chan_types);
      if (!subsumes(vt, ot->payload))
        err(DiagKind::PayloadMismatch, path, tpath,
            "sent value of type " + print_type(vt) + " does not fit " +
                print_type(ot->payload));
      scope.allow_timed = false;
      walk(force(s->cont, path), ot->cont, scope, path + "/cont", tpath + "/cont");
      return;
    }

    if (const auto* r = std::get_if<RecvP>(&p->node)) {
      const auto* it = std::get_if<InT>(&t->node);
      if (!it) {
        err(DiagKind::ShapeMismatch, path, tpath,
            "got recv-shaped process, expected " + print_type(t));
        return;
      }
      if (r->timeout && !scope.allow_timed)
        err(DiagKind::ShapeMismatch, path, tpath,
            "timed receive is not covered by a timeout type");
      if (!r->timeout && scope.allow_timed)
        err(DiagKind::ShapeMismatch, path, tpath,
            "receive under a timeout type carries no duration");
      if (!chan_matches(r->chan, it->chan))
        err(DiagKind::ChannelMismatch, path, tpath,
            "receive on " + to_string(r->chan) + " does not match the typed channel");
      explore_cont(
          it->payload, path,
          [&](const Value& v) { return r->cont(v); },
          it->cont, scope, path + "/cont", tpath + "/cont");
      return;
    }

    if (const auto* b = std::get_if<BranchP>(&p->node)) {
      const auto* bt = std::get_if<BranchT>(&t->node);
      if (!bt) {
        err(DiagKind::ShapeMismatch, path, tpath,
            "got branch-shaped process, expected " + print_type(t));
        return;
      }
      if (b->timeout && !scope.allow_timed)
        err(DiagKind::ShapeMismatch, path, tpath,
            "timed branch is not covered by a timeout type");
      if (!b->timeout && scope.allow_timed)
        err(DiagKind::ShapeMismatch, path, tpath,
            "branch under a timeout type carries no duration");
      match_channel_sets(*b, *bt, path, tpath);
      match_cases(*b, *bt, scope, path, tpath);
      return;
    }

    if (const auto* ct = std::get_if<CatchTimeoutP>(&p->node)) {
      const auto* tt = std::get_if<TimeoutT>(&t->node);
      if (!tt) {
        err(DiagKind::ShapeMismatch, path, tpath,
            "got catch-timeout process, expected " + print_type(t));
        return;
      }
      Scope inner_scope = scope;
      inner_scope.allow_timed = true;
      walk(force(ct->inner, path), tt->inner, inner_scope, path + "/inner",
           tpath + "/inner");
      scope.allow_timed = false;
      walk(force(ct->on_timeout, path), tt->handler, scope, path + "/handler",
           tpath + "/handler");
      return;
    }

    if (const auto* pp = std::get_if<ParP>(&p->node)) {
      const auto* pt = std::get_if<ParT>(&t->node);
      if (!pt) {
        err(DiagKind::ShapeMismatch, path, tpath,
            "got par-shaped process, expected " + print_type(t));
        return;
      }
      scope.allow_timed = false;
      walk(pp->left, pt->left, scope, path + "/left", tpath + "/left");
      walk(pp->right, pt->right, scope, path + "/right", tpath + "/right");
      return;
    }

    err(DiagKind::ShapeMismatch, path, tpath,
        std::string("unhandled process shape ") + proc_shape(p));
  }

  // Runs a value-consuming continuation against every alternative of the
  // payload type.
  void explore_cont(const TypePtr& payload, const std::string& at,
                    const std::function<ProcPtr(const Value&)>& cont,
                    const TypePtr& cont_type, Scope scope,
                    const std::string& path, const std::string& tpath) {
    scope.allow_timed = false;
    std::vector<Value> vals;
    try {
      vals = synth.values(payload);
    } catch (const UninhabitableError& e) {
      err(DiagKind::Uninhabitable, at, "", e.what());
      return;
    }
    for (const auto& v : vals) {
      ProcPtr next;
      try {
        next = cont(v);
      } catch (const std::exception& e) {
        err(DiagKind::ShapeMismatch, path, tpath,
            std::string("continuation raised on ") + to_string(v) + ": " +
                e.what());
        continue;
      }
      walk(next, cont_type, scope, path, tpath);
    }
  }

  void match_channel_sets(const BranchP& b, const BranchT& bt,
                          const std::string& path, const std::string& tpath) {
    std::vector<bool> used(b.chans.size(), false);
    for (std::size_t i = 0; i < bt.chans.size(); ++i) {
      bool found = false;
      for (std::size_t j = 0; j < b.chans.size(); ++j) {
        if (used[j]) continue;
        if (chan_matches(b.chans[j], bt.chans[i])) {
          used[j] = true;
          found = true;
          break;
        }
      }
      if (!found)
        err(DiagKind::ChannelSetMismatch, path,
            tpath + "/chan[" + std::to_string(i) + "]",
            "no process channel matches this typed channel");
    }
    for (std::size_t j = 0; j < b.chans.size(); ++j) {
      if (!used[j])
        err(DiagKind::ChannelSetMismatch, path + "/chan[" + std::to_string(j) + "]",
            tpath, "process listens on a channel the type does not mention");
    }
  }

  void match_cases(const BranchP& b, const BranchT& bt, const Scope& scope,
                   const std::string& path, const std::string& tpath) {
    std::vector<bool> matched(b.cases.size(), false);
    for (std::size_t i = 0; i < bt.cases.size(); ++i) {
      const auto& tc = bt.cases[i];
      std::string ctpath = tpath + "/case[" + std::to_string(i) + "]";
      std::size_t j = 0;
      for (; j < b.cases.size(); ++j)
        if (b.cases[j].label == tc.label) break;
      if (j == b.cases.size()) {
        err(DiagKind::MissingCase, path, ctpath,
            "no process case for label " + tc.label);
        continue;
      }
      matched[j] = true;
      std::string cpath = path + "/case[" + std::to_string(j) + "]";
      if (!subsumes(tc.arg, b.cases[j].arg_descriptor))
        err(DiagKind::PayloadMismatch, cpath + "/arg", ctpath + "/arg",
            "case " + tc.label + " accepts less than the type allows");
      const RecvCont& cont = b.cases[j].continuation;
      explore_cont(
          tc.arg, cpath, [&](const Value& v) { return cont(v); }, tc.cont,
          scope, cpath + "/cont", ctpath + "/cont");
    }
    for (std::size_t j = 0; j < b.cases.size(); ++j) {
      if (!matched[j])
        warn(DiagKind::ShadowedCase, path + "/case[" + std::to_string(j) + "]",
             tpath,
             "case " + b.cases[j].label +
                 " can never fire (shadowed or not in the type)");
    }
  }
};

}  // namespace

std::vector<Diagnostic> check(const ProcPtr& p, const TypePtr& t,
                              const ConformanceEnv& env) {
  auto wf = well_formed(t);
  if (has_errors(wf)) return wf;

  auto table = env.chan_types ? env.chan_types
                              : std::make_shared<std::map<ChannelId, TypePtr>>();
  Checker ck;
  ck.chan_types = table.get();
  ck.bindings = &env.channel_bindings;
  ck.synth.table = table.get();
  ck.walk(p, t, Scope{}, "", "");
  return ck.diags;
}

}  // namespace chansel
