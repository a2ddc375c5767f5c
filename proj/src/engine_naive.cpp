#include <chrono>
#include <map>
#include <mutex>
#include <thread>

#include "chansel/runtime.hpp"
#include "engine_util.hpp"

// Naive engine: every process gets its own OS thread and blocks while
// waiting. Waits are implemented by polling the channel queues directly,
// probing the channels in a freshly shuffled order each round; senders
// always enqueue. Parked waiters are registered passively so the stuck
// scan can tell "waiting with work available" from "waiting forever".

namespace chansel {

namespace {

using detail::ProcState;
using detail::ProcStatePtr;
using Clock = std::chrono::steady_clock;

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (salt + 0x9e3779b97f4a7c15ull + (seed << 6));
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  return x;
}

class NaiveEngine {
 public:
  explicit NaiveEngine(const EngineConfig& cfg) : cfg_(cfg) {}

  RunResult go(const ProgramBuilder& builder) {
    t0_ = Clock::now();
    ProcPtr root = builder(reg_);
    spawn(root, nullptr);
    monitor();
    stopping_.store(true);
    join_all();

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

  void spawn(ProcPtr p, const ProcState* parent) {
    auto ps = std::make_shared<ProcState>();
    ps->pid = next_pid_.fetch_add(1);
    if (parent) {
      ps->loop_env = parent->loop_env;
      ps->params = parent->params;
    }
    live_procs_.fetch_add(1);
    emit(EventKind::Spawn);
    std::lock_guard lk(thmu_);
    threads_.emplace_back([this, ps, p] { run_chain(ps, [p] { return p; }); });
  }

  bool consume_step() {
    if (steps_.fetch_add(1) + 1 > cfg_.max_steps) {
      bool expected = false;
      if (budget_faulted_.compare_exchange_strong(expected, true)) {
        fault(fault::kStepBudget);
        stopping_.store(true);
      }
      return false;
    }
    return true;
  }

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
        try {
          reg_.send_message(chan->id, s->value, /*deliver_to_waiters=*/false);
        } catch (const ChannelClosed&) {
          fault(fault::kChannelClosed);
          return;
        }
        emit(EventKind::Send, chan->id, top_label(s->value));
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
        auto next = block_on(proc, w, r->timeout, handler);
        if (!next) return;
        step = *next;
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
        auto next = block_on(proc, w, b->timeout, handler);
        if (!next) return;
        step = *next;
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
      ProcPtr self = node;
      ProcStatePtr owner = proc;
      step = [self, owner] { return unfold(self, owner->loop_env); };
    }
  }

  // Blocking wait by shuffled polling. Returns the continuation to run, or
  // nullopt when the run is shutting down and the process stays parked.
  std::optional<Thunk> block_on(const ProcStatePtr& proc, const WaiterPtr& w,
                                std::optional<Duration> timeout,
                                const Thunk& handler) {
    w->owner = proc;
    w->passive = true;
    if (timeout) {
      w->deadline = elapsed_ms() + static_cast<std::uint64_t>(timeout->count());
      w->timeout_dispatch = handler;
    }
    {
      std::lock_guard lk(wmu_);
      waiters_.push_back(w);
    }
    try {
      reg_.register_waiter(w, /*scan_queues=*/false);
    } catch (const ChannelClosed&) {
      fault(fault::kChannelClosed);
      return std::nullopt;
    }

    std::uint64_t shuffle_seed = mix(cfg_.seed, w->id);
    std::uint64_t round = 0;
    polling_.fetch_add(1);
    std::optional<std::pair<ChannelId, Value>> got;
    bool timed_out = false;
    for (;;) {
      auto order = naive_poll_order(w->channels.size(), shuffle_seed, round++);
      got = reg_.poll_dequeue(w, order);
      if (got) break;
      if (w->deadline && elapsed_ms() >= *w->deadline) {
        if (w->try_claim() == ClaimOutcome::Claimed) {
          reg_.complete_claimed(w);
          timed_out = true;
          break;
        }
      }
      if (stopping_.load()) {
        polling_.fetch_sub(1);
        reg_.unregister(w);
        return std::nullopt;  // parked at end of run
      }
      if (cfg_.poll_interval.count() > 0)
        std::this_thread::sleep_for(cfg_.poll_interval);
      else
        std::this_thread::sleep_for(std::chrono::microseconds(200));
    }
    polling_.fetch_sub(1);

    if (timed_out) {
      emit(EventKind::TimeoutFired, {}, {}, w->id);
      w->dispatch_count.fetch_add(1);
      return handler;
    }
    ChannelId ch = got->first;
    Value v = std::move(got->second);
    emit(EventKind::Deliver, ch, top_label(v), w->id);
    if (w->kind == Waiter::Kind::Branch) {
      emit(EventKind::BranchTaken, ch, top_label(v), w->id, w->select_index(v));
    } else {
      emit(EventKind::RecvDone, {}, {}, w->id);
    }
    w->dispatch_count.fetch_add(1);
    return Thunk{[w, ch, v] { return w->continuation_dispatch(ch, v); }};
  }

  // A run is over when every process ended, or when all remaining
  // processes are polling with nothing on their channels and no deadline
  // to wait for. A poller that just resolved its own waiter still counts
  // as polling for a moment, so quiescence also demands one pending
  // waiter per counted poller.
  void monitor() {
    for (;;) {
      std::this_thread::sleep_for(std::chrono::microseconds(500));
      if (live_procs_.load() <= 0) return;
      if (stopping_.load()) return;
      int p = polling_.load();
      if (p != live_procs_.load()) continue;
      int pending = 0;
      bool any_deadline = false;
      {
        std::lock_guard lk(wmu_);
        for (const auto& w : waiters_) {
          if (w->passive && w->state.load() == WaiterState::Pending) {
            ++pending;
            if (w->deadline) any_deadline = true;
          }
        }
      }
      if (any_deadline || pending != p) continue;
      if (reg_.eligible_pending_pair()) continue;
      if (polling_.load() == live_procs_.load()) return;
    }
  }

  void join_all() {
    for (;;) {
      std::vector<std::thread> batch;
      {
        std::lock_guard lk(thmu_);
        batch.swap(threads_);
      }
      if (batch.empty()) break;
      for (auto& t : batch) t.join();
    }
  }

  EngineConfig cfg_;
  Registry reg_;
  TraceSink sink_;
  Clock::time_point t0_;

  std::mutex thmu_;
  std::vector<std::thread> threads_;
  std::mutex wmu_;
  std::vector<WaiterPtr> waiters_;

  std::atomic<bool> stopping_{false};
  std::atomic<bool> budget_faulted_{false};
  std::atomic<std::uint64_t> steps_{0};
  std::atomic<std::uint64_t> next_pid_{0};
  std::atomic<int> live_procs_{0};
  std::atomic<int> polling_{0};
};

}  // namespace

namespace detail {
RunResult run_naive_engine(const ProgramBuilder& builder,
                           const EngineConfig& cfg) {
  return NaiveEngine(cfg).go(builder);
}
}  // namespace detail

}  // namespace chansel
