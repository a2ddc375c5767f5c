#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

#include "chansel/runtime.hpp"
#include "engine_util.hpp"

// Cooperative engine: a fixed pool of workers runs process chains up to
// their next park, and a timer service claims parked waiters whose
// deadlines pass. Claims race with senders through the waiters' atomic
// state; a timer that loses a claim retries after a short delay.

namespace chansel {

namespace {

using detail::ProcState;
using detail::ProcStatePtr;
using Clock = std::chrono::steady_clock;

class ExecutorEngine {
 public:
  explicit ExecutorEngine(const EngineConfig& cfg) : cfg_(cfg) {}

  RunResult go(const ProgramBuilder& builder) {
    t0_ = Clock::now();
    ProcPtr root = builder(reg_);
    spawn(root, nullptr);

    unsigned n = std::max(1u, cfg_.workers);
    std::vector<std::thread> workers;
    workers.reserve(n);
    for (unsigned i = 0; i < n; ++i)
      workers.emplace_back([this] { worker(); });
    std::thread timer([this] { timer_main(); });

    monitor();

    stopping_.store(true);
    qcv_.notify_all();
    {
      std::lock_guard lk(tmu_);
      timer_shutdown_ = true;
    }
    tcv_.notify_all();
    for (auto& w : workers) w.join();
    timer.join();

    RunResult res;
    res.trace = sink_.take();
    res.leftovers = reg_.snapshot_queues();
    res.eligible_pending_at_end = reg_.eligible_pending_pair();
    {
      std::lock_guard lk(wmu_);
      res.waiters.reserve(waiters_.size());
      for (const auto& w : waiters_)
        res.waiters.push_back({w->id, w->state.load(), w->dispatch_count.load(),
                               w->failed_claims.load()});
    }
    return res;
  }

 private:
  struct Task {
    ProcStatePtr proc;
    Thunk step;
  };

  std::uint64_t elapsed_ms() const {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0_)
            .count());
  }

  void emit(EventKind k, std::optional<ChannelId> chan = {},
            std::optional<Label> label = {},
            std::optional<std::uint64_t> waiter = {},
            std::optional<std::uint32_t> ci = {}) {
    sink_.emit(TraceEvent{0, elapsed_ms(), k, chan, label, waiter, ci});
  }

  void fault(const char* kind) { emit(EventKind::Fault, {}, std::string(kind)); }

  void enqueue(Task t) {
    {
      std::lock_guard lk(qmu_);
      queue_.push_back(std::move(t));
    }
    qcv_.notify_one();
  }

  ProcStatePtr spawn(ProcPtr p, const ProcState* parent) {
    auto ps = std::make_shared<ProcState>();
    ps->pid = next_pid_.fetch_add(1);
    if (parent) {
      ps->loop_env = parent->loop_env;
      ps->params = parent->params;
    }
    live_procs_.fetch_add(1);
    emit(EventKind::Spawn);
    enqueue({ps, [p] { return p; }});
    return ps;
  }

  bool consume_step() {
    if (steps_.fetch_add(1) + 1 > cfg_.max_steps) {
      bool expected = false;
      if (budget_faulted_.compare_exchange_strong(expected, true)) {
        fault(fault::kStepBudget);
        stopping_.store(true);
        qcv_.notify_all();
        tcv_.notify_all();
      }
      return false;
    }
    return true;
  }

  void worker() {
    for (;;) {
      Task t;
      {
        std::unique_lock lk(qmu_);
        qcv_.wait(lk, [&] { return stopping_.load() || !queue_.empty(); });
        if (stopping_.load()) return;
        t = std::move(queue_.front());
        queue_.pop_front();
        ++busy_;
      }
      run_chain(t.proc, std::move(t.step));
      {
        std::lock_guard lk(qmu_);
        --busy_;
      }
      qcv_.notify_all();
    }
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
    enqueue({proc, [w, ch, v] { return w->continuation_dispatch(ch, v); }});
  }

  // Interprets one process until it ends, parks, or the run is stopping.
  // `handler` carries a pending timeout continuation from an enclosing
  // catch-timeout down to the receive or branch it wraps.
  void run_chain(ProcStatePtr proc, Thunk step) {
    Thunk handler;
    for (;;) {
      if (stopping_.load()) return;
      if (!consume_step()) return;
      ProcPtr node;
      try {
        node = step();
      } catch (const UnboundLoopVar&) {
        fault(fault::kUnboundLoopVar);
        return;
      } catch (const std::exception&) {
        fault(fault::kHostError);
        return;
      }

      if (std::holds_alternative<EndP>(node->node)) {
        emit(EventKind::ProcEnd);
        live_procs_.fetch_sub(1);
        return;
      }
      if (const auto* s = std::get_if<SendP>(&node->node)) {
        if (handler) {
          fault(fault::kBadTimeoutInner);
          return;
        }
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
        step = s->cont;
        continue;
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
        auto w = detail::make_recv_waiter(*proc, *r, *chan);
        auto parked = park(proc, w, r->timeout, handler);
        if (!parked) return;  // parked or faulted: chain continues elsewhere
        step = *parked;
        handler = nullptr;
        continue;
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
        bool bad = false;
        for (const auto& cr : b->chans) {
          auto chan = detail::resolve_chan(cr, *proc);
          if (!chan) {
            fault(fault::kUnresolvedChannel);
            bad = true;
            break;
          }
          if (chan->cap == Capability::Output) {
            fault(fault::kBadCapability);
            bad = true;
            break;
          }
          chans.push_back(chan->id);
        }
        if (bad) return;
        auto w = detail::make_branch_waiter(*proc, *b, std::move(chans));
        auto parked = park(proc, w, b->timeout, handler);
        if (!parked) return;
        step = *parked;
        handler = nullptr;
        continue;
      }
      if (const auto* ct = std::get_if<CatchTimeoutP>(&node->node)) {
        if (handler) {
          fault(fault::kBadTimeoutInner);
          return;
        }
        handler = ct->on_timeout;
        step = ct->inner;
        continue;
      }
      if (const auto* p = std::get_if<ParP>(&node->node)) {
        if (handler) {
          fault(fault::kBadTimeoutInner);
          return;
        }
        spawn(p->right, proc.get());
        ProcPtr left = p->left;
        step = [left] { return left; };
        continue;
      }
      // RecP / LoopP
      ProcPtr self = node;
      ProcStatePtr owner = proc;
      step = [self, owner] { return unfold(self, owner->loop_env); };
    }
  }

  // Registers w; returns the resolved continuation when the registration
  // resolved immediately, nullopt when the waiter parked (or a fault was
  // emitted).
  std::optional<Thunk> park(const ProcStatePtr& proc, const WaiterPtr& w,
                            std::optional<Duration> timeout,
                            const Thunk& handler) {
    w->owner = proc;
    if (timeout) {
      w->deadline = elapsed_ms() + static_cast<std::uint64_t>(timeout->count());
      w->timeout_dispatch = handler;
    }
    {
      std::lock_guard lk(wmu_);
      waiters_.push_back(w);
    }
    RegistrationOutcome out;
    try {
      out = reg_.register_waiter(w);
    } catch (const ChannelClosed&) {
      fault(fault::kChannelClosed);
      return std::nullopt;
    }
    if (out.kind == RegistrationOutcome::Kind::ImmediateResolve) {
      emit(EventKind::Deliver, out.chan, top_label(out.value), w->id);
      if (w->kind == Waiter::Kind::Branch) {
        emit(EventKind::BranchTaken, out.chan, top_label(out.value), w->id,
             w->select_index(out.value));
      } else {
        emit(EventKind::RecvDone, {}, {}, w->id);
      }
      w->dispatch_count.fetch_add(1);
      ChannelId ch = out.chan;
      Value v = std::move(out.value);
      return Thunk{[w, ch, v] { return w->continuation_dispatch(ch, v); }};
    }
    if (w->deadline) {
      std::lock_guard lk(tmu_);
      timers_.insert({t0_ + std::chrono::milliseconds(*w->deadline), w});
      tcv_.notify_all();
    }
    return std::nullopt;
  }

  void timer_main() {
    std::unique_lock lk(tmu_);
    for (;;) {
      if (timer_shutdown_) return;
      if (timers_.empty()) {
        tcv_.wait(lk);
        continue;
      }
      auto when = timers_.begin()->first;
      tcv_.wait_until(lk, when);
      if (timer_shutdown_) return;
      auto now = Clock::now();
      while (!timers_.empty() && timers_.begin()->first <= now) {
        WaiterPtr w = timers_.begin()->second;
        timers_.erase(timers_.begin());
        if (w->state.load() == WaiterState::Resolved) continue;
        ClaimOutcome c = w->try_claim();
        if (c == ClaimOutcome::Claimed) {
          // Keep the dispatch visible to the quiescence monitor while the
          // entry is out of the queue but its task not yet enqueued.
          timer_inflight_.fetch_add(1);
          lk.unlock();
          reg_.complete_claimed(w);
          emit(EventKind::TimeoutFired, {}, {}, w->id);
          w->dispatch_count.fetch_add(1);
          auto proc = std::static_pointer_cast<ProcState>(w->owner);
          enqueue({proc, w->timeout_dispatch});
          timer_inflight_.fetch_sub(1);
          lk.lock();
        } else if (c == ClaimOutcome::Busy) {
          // A sender holds the claim; retry shortly in case it releases.
          timers_.insert({now + std::chrono::milliseconds(1), w});
        }
        // AlreadyResolved: drop the entry.
      }
    }
  }

  std::size_t timer_live() {
    std::lock_guard lk(tmu_);
    std::size_t n = 0;
    for (const auto& [tp, w] : timers_)
      if (w->state.load() != WaiterState::Resolved) ++n;
    return n;
  }

  void monitor() {
    for (;;) {
      std::this_thread::sleep_for(std::chrono::microseconds(200));
      if (live_procs_.load() <= 0) return;
      if (stopping_.load()) return;
      bool idle;
      {
        std::lock_guard lk(qmu_);
        idle = queue_.empty() && busy_ == 0;
      }
      if (!idle || timer_live() != 0 || timer_inflight_.load() != 0) continue;
      // Re-check both sides under their locks: if no worker is busy, the
      // queue is empty, no unresolved deadline exists and no timeout is
      // mid-dispatch, nothing can produce further work and the remaining
      // processes are parked for good.
      std::scoped_lock lk(qmu_, tmu_);
      bool timer_idle = timer_inflight_.load() == 0;
      for (const auto& [tp, w] : timers_)
        if (w->state.load() != WaiterState::Resolved) timer_idle = false;
      if (queue_.empty() && busy_ == 0 && timer_idle) return;
    }
  }

  EngineConfig cfg_;
  Registry reg_;
  TraceSink sink_;
  Clock::time_point t0_;

  std::mutex qmu_;
  std::condition_variable qcv_;
  std::deque<Task> queue_;
  int busy_ = 0;

  std::mutex tmu_;
  std::condition_variable tcv_;
  std::multimap<Clock::time_point, WaiterPtr> timers_;
  bool timer_shutdown_ = false;

  std::mutex wmu_;
  std::vector<WaiterPtr> waiters_;

  std::atomic<bool> stopping_{false};
  std::atomic<bool> budget_faulted_{false};
  std::atomic<int> timer_inflight_{0};
  std::atomic<std::uint64_t> steps_{0};
  std::atomic<std::uint64_t> next_pid_{0};
  std::atomic<int> live_procs_{0};
};

}  // namespace

namespace detail {
RunResult run_executor_engine(const ProgramBuilder& builder,
                              const EngineConfig& cfg) {
  return ExecutorEngine(cfg).go(builder);
}
}  // namespace detail

}  // namespace chansel
