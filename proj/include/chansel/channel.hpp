#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "chansel/process.hpp"
#include "chansel/value.hpp"

// Channels, message queues and parked waiters.
//
// A waiter is a parked receive or branch. Its lifecycle is governed by a
// three-state atomic: Pending -> Claiming -> Resolved, where a failed
// claim releases back to Pending. Whoever wins the Claiming transition —
// a sender delivering a message or the timer firing a deadline — is the
// only party that may resolve the waiter, so exactly one continuation
// runs no matter how many channels or timers race for it.

namespace chansel {

enum class WaiterState : std::uint8_t { Pending, Claiming, Resolved };
enum class ClaimOutcome { Claimed, Busy, AlreadyResolved };

std::string to_string(WaiterState s);

struct Waiter {
  enum class Kind { Recv, Branch };

  std::uint64_t id = 0;
  Kind kind = Kind::Recv;
  std::vector<ChannelId> channels;
  // Label/shape predicate; the channel layer never forces continuations.
  std::function<bool(ChannelId, const Value&)> accepts;
  std::optional<std::uint64_t> deadline;  // absolute engine time
  std::function<ProcPtr(ChannelId, const Value&)> continuation_dispatch;
  Thunk timeout_dispatch;  // empty when no timeout handler is installed
  // For branch waiters: index of the case a value selects, without
  // forcing its continuation (trace bookkeeping).
  std::function<std::optional<std::uint32_t>(const Value&)> select_index;

  std::atomic<WaiterState> state{WaiterState::Pending};
  std::atomic<int> dispatch_count{0};
  std::atomic<int> failed_claims{0};

  // Passive waiters are visible for quiescence scans but are never
  // claimed by senders (the polling engine resolves them itself).
  bool passive = false;
  // Engine-owned process context, carried through resolution.
  std::shared_ptr<void> owner;

  ClaimOutcome try_claim();
  void release_claim();   // Claiming -> Pending
  void resolve();         // Claiming -> Resolved
};

using WaiterPtr = std::shared_ptr<Waiter>;

struct ChannelClosed : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadTimeoutDuration : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DeliveryOutcome {
  enum class Kind { DeliveredTo, Queued };
  Kind kind;
  WaiterPtr waiter;  // set when delivered
};

struct RegistrationOutcome {
  enum class Kind { Parked, ImmediateResolve };
  Kind kind;
  ChannelId chan;  // set on immediate resolve
  Value value;
};

class Registry {
 public:
  ChannelId create_channel();

  // Offers v to the channel's waiters in registration order; the first
  // eligible waiter that can be claimed gets the message, otherwise v is
  // queued. A message is never both queued and delivered. With
  // deliver_to_waiters=false the message is always queued (polling mode).
  DeliveryOutcome send_message(ChannelId ch, Value v,
                               bool deliver_to_waiters = true);

  // Parks w on all its channels, unless some channel already holds an
  // acceptable head message, in which case w resolves immediately. The
  // scan and the parking are atomic with respect to send_message: a
  // concurrent message either meets the scan or finds the parked waiter.
  // With scan_queues=false the waiter is parked unconditionally (polling
  // engines probe the queues themselves).
  RegistrationOutcome register_waiter(const WaiterPtr& w, bool scan_queues = true);

  // Removes a claimed waiter from every channel and marks it resolved.
  void complete_claimed(const WaiterPtr& w);

  // Polling mode: dequeue an acceptable head message from w's channels,
  // probed in the given order. Resolves w on success.
  std::optional<std::pair<ChannelId, Value>> poll_dequeue(
      const WaiterPtr& w, std::span<const std::size_t> chan_order);

  void unregister(const WaiterPtr& w);  // drop a passive waiter
  void close_all();

  // --- inspection -----------------------------------------------------
  using QueueSnapshot = std::vector<std::pair<ChannelId, std::vector<Value>>>;
  QueueSnapshot snapshot_queues() const;       // non-empty queues only
  std::size_t queued_total() const;
  bool waiter_linked(const WaiterPtr& w) const;  // present in any list
  // True when some channel holds a head message acceptable to a pending
  // waiter of that channel (should not happen at quiescence).
  bool eligible_pending_pair() const;

 private:
  struct Chan {
    std::deque<Value> queue;
    std::vector<WaiterPtr> waiters;
    bool closed = false;
  };

  Chan& chan_ref(ChannelId id);
  void unlink_locked(const WaiterPtr& w);

  mutable std::mutex mu_;
  std::unordered_map<std::uint64_t, Chan> chans_;
  std::uint64_t next_id_ = 1;
};

}  // namespace chansel
