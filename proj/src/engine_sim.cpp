#include <map>
#include <random>

#include "chansel/runtime.hpp"
#include "engine_util.hpp"

// Deterministic single-threaded engine. Work is a bag of runnable steps;
// at each turn a seeded RNG picks among the runnable steps and the
// deadlines that are due at the current virtual time. The clock advances
// only when nothing is runnable and nothing is due, jumping straight to
// the earliest pending deadline, so timeouts fire at exactly their
// deadline tick.

namespace chansel {

namespace {

using detail::ProcState;
using detail::ProcStatePtr;

class SimEngine {
 public:
  explicit SimEngine(const EngineConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

  RunResult go(const ProgramBuilder& builder) {
    spawn(builder(reg_), nullptr);
    loop();
    reg_.close_all();
    RunResult res;
    res.trace = sink_.take();
    res.leftovers = reg_.snapshot_queues();
    res.eligible_pending_at_end = reg_.eligible_pending_pair();
    res.waiters.reserve(waiters_.size());
    for (const auto& w : waiters_)
      res.waiters.push_back({w->id, w->state.load(), w->dispatch_count.load(),
                             w->failed_claims.load()});
    return res;
  }

 private:
  struct Task {
    ProcStatePtr proc;
    Thunk step;
  };

  void emit(EventKind k, std::optional<ChannelId> chan = {},
            std::optional<Label> label = {},
            std::optional<std::uint64_t> waiter = {},
            std::optional<std::uint32_t> ci = {}) {
    sink_.emit(TraceEvent{0, now_, k, chan, label, waiter, ci});
  }

  void fault(const char* kind) {
    emit(EventKind::Fault, {}, std::string(kind));
  }

  ProcStatePtr spawn(ProcPtr p, const ProcState* parent) {
    auto ps = std::make_shared<ProcState>();
    ps->pid = next_pid_++;
    if (parent) {
      ps->loop_env = parent->loop_env;
      ps->params = parent->params;
    }
    emit(EventKind::Spawn);
    runnable_.push_back({ps, [p] { return p; }});
    return ps;
  }

  void loop() {
    while (!stopped_) {
      for (auto it = deadlines_.begin(); it != deadlines_.end();) {
        it = it->second->state.load() == WaiterState::Resolved
                 ? deadlines_.erase(it)
                 : std::next(it);
      }
      std::size_t due = 0;
      for (const auto& [t, w] : deadlines_) {
        if (t > now_) break;
        ++due;
      }
      if (runnable_.empty() && due == 0) {
        if (deadlines_.empty()) break;
        std::uint64_t next = deadlines_.begin()->first;
        if (cfg_.max_ticks && next > *cfg_.max_ticks) break;
        now_ = next;
        continue;
      }
      std::size_t pick = rng_() % (runnable_.size() + due);
      if (pick < runnable_.size()) {
        Task t = std::move(runnable_[pick]);
        runnable_.erase(runnable_.begin() + static_cast<std::ptrdiff_t>(pick));
        exec(std::move(t));
      } else {
        auto it = deadlines_.begin();
        std::advance(it, pick - runnable_.size());
        WaiterPtr w = it->second;
        deadlines_.erase(it);
        fire_timeout(w);
      }
    }
  }

  bool consume_step() {
    if (++steps_ > cfg_.max_steps) {
      fault(fault::kStepBudget);
      stopped_ = true;
      return false;
    }
    return true;
  }

  void exec(Task t) {
    if (!consume_step()) return;
    ProcPtr node;
    try {
      node = t.step();
    } catch (const UnboundLoopVar&) {
      fault(fault::kUnboundLoopVar);
      return;
    } catch (const std::exception&) {
      fault(fault::kHostError);
      return;
    }
    interpret(t.proc, node, nullptr);
  }

  void fire_timeout(const WaiterPtr& w) {
    if (!consume_step()) return;
    if (w->try_claim() != ClaimOutcome::Claimed) return;
    reg_.complete_claimed(w);
    emit(EventKind::TimeoutFired, {}, {}, w->id);
    w->dispatch_count.fetch_add(1);
    auto proc = std::static_pointer_cast<ProcState>(w->owner);
    runnable_.push_back({proc, w->timeout_dispatch});
  }

  void dispatch_message(const WaiterPtr& w, ChannelId ch, const Value& v) {
    emit(EventKind::Deliver, ch, top_label(v), w->id);
    if (w->kind == Waiter::Kind::Branch) {
      emit(EventKind::BranchTaken, ch, top_label(v), w->id, w->select_index(v));
    } else {
      emit(EventKind::RecvDone, {}, {}, w->id);
    }
    w->dispatch_count.fetch_add(1);
    auto proc = std::static_pointer_cast<ProcState>(w->owner);
    runnable_.push_back(
        {proc, [w, ch, v] { return w->continuation_dispatch(ch, v); }});
  }

  void park(const ProcStatePtr& proc, const WaiterPtr& w,
            std::optional<Duration> timeout, const Thunk& handler) {
    w->owner = proc;
    if (timeout) {
      w->deadline = now_ + static_cast<std::uint64_t>(timeout->count());
      w->timeout_dispatch = handler;
    }
    waiters_.push_back(w);
    RegistrationOutcome out;
    try {
      out = reg_.register_waiter(w);
    } catch (const ChannelClosed&) {
      fault(fault::kChannelClosed);
      return;
    }
    if (out.kind == RegistrationOutcome::Kind::ImmediateResolve) {
      dispatch_message(w, out.chan, out.value);
      return;
    }
    if (w->deadline) deadlines_.insert({*w->deadline, w});
  }

  void interpret(const ProcStatePtr& proc, const ProcPtr& node, Thunk handler) {
    if (std::holds_alternative<EndP>(node->node)) {
      emit(EventKind::ProcEnd);
      return;
    }
    if (const auto* s = std::get_if<SendP>(&node->node)) {
      auto chan = detail::resolve_chan(s->chan, *proc);
      if (!chan) {
        fault(fault::kUnresolvedChannel);
        return;
      }
      if (chan->cap == Capability::Input) {
        fault(fault::kBadCapability);
        return;
      }
      DeliveryOutcome out;
      try {
        out = reg_.send_message(chan->id, s->value);
      } catch (const ChannelClosed&) {
        fault(fault::kChannelClosed);
        return;
      }
      emit(EventKind::Send, chan->id, top_label(s->value));
      if (out.kind == DeliveryOutcome::Kind::DeliveredTo)
        dispatch_message(out.waiter, chan->id, s->value);
      runnable_.push_back({proc, s->cont});
      return;
    }
    if (const auto* r = std::get_if<RecvP>(&node->node)) {
      if (r->timeout && !handler) {
        fault(fault::kUncaughtTimeout);
        return;
      }
      if (handler && !r->timeout) {
        fault(fault::kBadTimeoutDuration);
        return;
      }
      auto chan = detail::resolve_chan(r->chan, *proc);
      if (!chan) {
        fault(fault::kUnresolvedChannel);
        return;
      }
      if (chan->cap == Capability::Output) {
        fault(fault::kBadCapability);
        return;
      }
      park(proc, detail::make_recv_waiter(*proc, *r, *chan), r->timeout, handler);
      return;
    }
    if (const auto* b = std::get_if<BranchP>(&node->node)) {
      if (b->timeout && !handler) {
        fault(fault::kUncaughtTimeout);
        return;
      }
      if (handler && !b->timeout) {
        fault(fault::kBadTimeoutDuration);
        return;
      }
      std::vector<ChannelId> chans;
      for (const auto& cr : b->chans) {
        auto chan = detail::resolve_chan(cr, *proc);
        if (!chan) {
          fault(fault::kUnresolvedChannel);
          return;
        }
        if (chan->cap == Capability::Output) {
          fault(fault::kBadCapability);
          return;
        }
        chans.push_back(chan->id);
      }
      park(proc, detail::make_branch_waiter(*proc, *b, std::move(chans)),
           b->timeout, handler);
      return;
    }
    if (const auto* ct = std::get_if<CatchTimeoutP>(&node->node)) {
      ProcPtr inner;
      try {
        inner = ct->inner();
        for (int guard = 0; guard < 4096; ++guard) {
          if (!std::holds_alternative<RecP>(inner->node) &&
              !std::holds_alternative<LoopP>(inner->node))
            break;
          inner = unfold(inner, proc->loop_env);
        }
      } catch (const UnboundLoopVar&) {
        fault(fault::kUnboundLoopVar);
        return;
      } catch (const std::exception&) {
        fault(fault::kHostError);
        return;
      }
      if (std::holds_alternative<RecvP>(inner->node) ||
          std::holds_alternative<BranchP>(inner->node)) {
        interpret(proc, inner, ct->on_timeout);
      } else {
        fault(fault::kBadTimeoutInner);
      }
      return;
    }
    if (const auto* p = std::get_if<ParP>(&node->node)) {
      spawn(p->right, proc.get());
      ProcPtr left = p->left;
      runnable_.push_back({proc, [left] { return left; }});
      return;
    }
    // RecP / LoopP: unfolding is itself a step.
    ProcPtr self = node;
    ProcStatePtr owner = proc;
    runnable_.push_back(
        {proc, [self, owner] { return unfold(self, owner->loop_env); }});
  }

  EngineConfig cfg_;
  Registry reg_;
  TraceSink sink_;
  std::mt19937_64 rng_;
  std::uint64_t now_ = 0;
  std::uint64_t steps_ = 0;
  bool stopped_ = false;
  std::uint64_t next_pid_ = 0;
  std::vector<Task> runnable_;
  std::multimap<std::uint64_t, WaiterPtr> deadlines_;
  std::vector<WaiterPtr> waiters_;
};

}  // namespace

namespace detail {
RunResult run_sim_engine(const ProgramBuilder& builder, const EngineConfig& cfg) {
  return SimEngine(cfg).go(builder);
}
}  // namespace detail

}  // namespace chansel
