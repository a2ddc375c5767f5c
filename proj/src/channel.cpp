#include "chansel/channel.hpp"

#include <algorithm>

namespace chansel {

std::string to_string(WaiterState s) {
  switch (s) {
    case WaiterState::Pending: return "Pending";
    case WaiterState::Claiming: return "Claiming";
    case WaiterState::Resolved: return "Resolved";
  }
  return "?";
}

ClaimOutcome Waiter::try_claim() {
  WaiterState expected = WaiterState::Pending;
  if (state.compare_exchange_strong(expected, WaiterState::Claiming,
                                    std::memory_order_acq_rel)) {
    return ClaimOutcome::Claimed;
  }
  if (expected == WaiterState::Resolved) return ClaimOutcome::AlreadyResolved;
  failed_claims.fetch_add(1, std::memory_order_relaxed);
  return ClaimOutcome::Busy;
}

void Waiter::release_claim() {
  WaiterState expected = WaiterState::Claiming;
  state.compare_exchange_strong(expected, WaiterState::Pending,
                                std::memory_order_acq_rel);
}

void Waiter::resolve() {
  state.store(WaiterState::Resolved, std::memory_order_release);
}

Registry::Chan& Registry::chan_ref(ChannelId id) {
  auto it = chans_.find(id.value);
  if (it == chans_.end())
    throw ChannelClosed("unknown channel #" + std::to_string(id.value));
  if (it->second.closed)
    throw ChannelClosed("channel #" + std::to_string(id.value) + " is closed");
  return it->second;
}

ChannelId Registry::create_channel() {
  std::lock_guard lock(mu_);
  ChannelId id{next_id_++};
  chans_.emplace(id.value, Chan{});
  return id;
}

DeliveryOutcome Registry::send_message(ChannelId ch, Value v,
                                       bool deliver_to_waiters) {
  std::lock_guard lock(mu_);
  Chan& c = chan_ref(ch);
  if (deliver_to_waiters) {
    for (const auto& w : c.waiters) {
      if (w->passive) continue;
      if (!w->accepts(ch, v)) continue;
      if (w->try_claim() != ClaimOutcome::Claimed) continue;
      unlink_locked(w);
      w->resolve();
      return {DeliveryOutcome::Kind::DeliveredTo, w};
    }
  }
  c.queue.push_back(std::move(v));
  return {DeliveryOutcome::Kind::Queued, nullptr};
}

RegistrationOutcome Registry::register_waiter(const WaiterPtr& w,
                                              bool scan_queues) {
  if (w->deadline && !w->timeout_dispatch)
    throw BadTimeoutDuration("waiter " + std::to_string(w->id) +
                             " has a deadline but no timeout handler");
  std::lock_guard lock(mu_);
  if (scan_queues) {
    for (ChannelId ch : w->channels) {
      Chan& c = chan_ref(ch);
      if (!c.queue.empty() && w->accepts(ch, c.queue.front())) {
        Value v = std::move(c.queue.front());
        c.queue.pop_front();
        // Single-owner claim: the waiter is not linked anywhere yet.
        w->try_claim();
        w->resolve();
        return {RegistrationOutcome::Kind::ImmediateResolve, ch, std::move(v)};
      }
    }
  }
  for (ChannelId ch : w->channels) chan_ref(ch).waiters.push_back(w);
  return {RegistrationOutcome::Kind::Parked, ChannelId{}, v_unit()};
}

void Registry::complete_claimed(const WaiterPtr& w) {
  std::lock_guard lock(mu_);
  unlink_locked(w);
  w->resolve();
}

std::optional<std::pair<ChannelId, Value>> Registry::poll_dequeue(
    const WaiterPtr& w, std::span<const std::size_t> chan_order) {
  std::lock_guard lock(mu_);
  for (std::size_t idx : chan_order) {
    ChannelId ch = w->channels[idx];
    Chan& c = chan_ref(ch);
    if (!c.queue.empty() && w->accepts(ch, c.queue.front())) {
      Value v = std::move(c.queue.front());
      c.queue.pop_front();
      w->try_claim();
      unlink_locked(w);
      w->resolve();
      return std::make_pair(ch, std::move(v));
    }
  }
  return std::nullopt;
}

void Registry::unregister(const WaiterPtr& w) {
  std::lock_guard lock(mu_);
  unlink_locked(w);
}

void Registry::unlink_locked(const WaiterPtr& w) {
  for (ChannelId ch : w->channels) {
    auto it = chans_.find(ch.value);
    if (it == chans_.end()) continue;
    auto& ws = it->second.waiters;
    ws.erase(std::remove(ws.begin(), ws.end(), w), ws.end());
  }
}

void Registry::close_all() {
  std::lock_guard lock(mu_);
  for (auto& [id, c] : chans_) c.closed = true;
}

Registry::QueueSnapshot Registry::snapshot_queues() const {
  std::lock_guard lock(mu_);
  QueueSnapshot out;
  for (const auto& [id, c] : chans_) {
    if (!c.queue.empty())
      out.emplace_back(ChannelId{id},
                       std::vector<Value>(c.queue.begin(), c.queue.end()));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

std::size_t Registry::queued_total() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [id, c] : chans_) n += c.queue.size();
  return n;
}

bool Registry::waiter_linked(const WaiterPtr& w) const {
  std::lock_guard lock(mu_);
  for (const auto& [id, c] : chans_) {
    if (std::find(c.waiters.begin(), c.waiters.end(), w) != c.waiters.end())
      return true;
  }
  return false;
}

bool Registry::eligible_pending_pair() const {
  std::lock_guard lock(mu_);
  for (const auto& [id, c] : chans_) {
    if (c.queue.empty()) continue;
    for (const auto& w : c.waiters) {
      if (w->state.load(std::memory_order_acquire) == WaiterState::Pending &&
          w->accepts(ChannelId{id}, c.queue.front())) {
        return true;
      }
    }
  }
  return false;
}

}  // namespace chansel
