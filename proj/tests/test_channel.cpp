#include <doctest.h>

#include <atomic>
#include <set>
#include <thread>

#include "chansel/channel.hpp"

using namespace chansel;

namespace {

WaiterPtr recv_waiter(std::uint64_t id, ChannelId ch) {
  auto w = std::make_shared<Waiter>();
  w->id = id;
  w->kind = Waiter::Kind::Recv;
  w->channels = {ch};
  w->accepts = [](ChannelId, const Value&) { return true; };
  w->continuation_dispatch = [](ChannelId, const Value&) { return nullptr; };
  return w;
}

WaiterPtr branch_waiter(std::uint64_t id, std::vector<ChannelId> chans,
                        std::set<Label> labels) {
  auto w = std::make_shared<Waiter>();
  w->id = id;
  w->kind = Waiter::Kind::Branch;
  w->channels = std::move(chans);
  w->accepts = [labels](ChannelId, const Value& v) {
    auto l = top_label(v);
    return l && labels.count(*l) > 0;
  };
  w->continuation_dispatch = [](ChannelId, const Value&) { return nullptr; };
  return w;
}

}  // namespace

TEST_CASE("create_channel hands out distinct ids") {
  Registry reg;
  auto a = reg.create_channel();
  auto b = reg.create_channel();
  CHECK(a != b);
}

TEST_CASE("a million channels, no id reuse") {
  Registry reg;
  std::set<std::uint64_t> ids;
  for (int i = 0; i < 1'000'000; ++i) ids.insert(reg.create_channel().value);
  CHECK(ids.size() == 1'000'000);
}

TEST_CASE("send delivers to a pending matching waiter") {
  Registry reg;
  auto c = reg.create_channel();
  auto w = recv_waiter(1, c);
  auto out = reg.register_waiter(w);
  REQUIRE(out.kind == RegistrationOutcome::Kind::Parked);

  auto d = reg.send_message(c, v_str("hi"));
  REQUIRE(d.kind == DeliveryOutcome::Kind::DeliveredTo);
  CHECK(d.waiter->id == 1);
  CHECK(w->state.load() == WaiterState::Resolved);
  CHECK(reg.queued_total() == 0);
  CHECK_FALSE(reg.waiter_linked(w));
}

TEST_CASE("send queues when no waiter accepts the label") {
  Registry reg;
  auto c = reg.create_channel();
  auto w = branch_waiter(1, {c}, {"Bid"});
  reg.register_waiter(w);
  auto d = reg.send_message(c, v_labelled("CloseAuction", v_unit()));
  CHECK(d.kind == DeliveryOutcome::Kind::Queued);
  CHECK(w->state.load() == WaiterState::Pending);
  CHECK(reg.queued_total() == 1);
}

TEST_CASE("register resolves immediately from a queued message") {
  Registry reg;
  auto c = reg.create_channel();
  reg.send_message(c, v_str("queued"));
  auto w = recv_waiter(1, c);
  auto out = reg.register_waiter(w);
  REQUIRE(out.kind == RegistrationOutcome::Kind::ImmediateResolve);
  CHECK(out.chan == c);
  CHECK(std::get<std::string>(out.value.v) == "queued");
  CHECK(w->state.load() == WaiterState::Resolved);
  CHECK(reg.queued_total() == 0);
}

TEST_CASE("a parked branch is linked on every channel and unlinked on resolve") {
  Registry reg;
  auto c1 = reg.create_channel();
  auto c2 = reg.create_channel();
  auto w = branch_waiter(1, {c1, c2}, {"go"});
  auto out = reg.register_waiter(w);
  REQUIRE(out.kind == RegistrationOutcome::Kind::Parked);
  CHECK(reg.waiter_linked(w));

  auto d = reg.send_message(c2, v_labelled("go", v_unit()));
  REQUIRE(d.kind == DeliveryOutcome::Kind::DeliveredTo);
  CHECK_FALSE(reg.waiter_linked(w));  // gone from both channels
}

TEST_CASE("try_claim implements the pending/claiming/resolved protocol") {
  auto w = recv_waiter(1, ChannelId{1});
  CHECK(w->try_claim() == ClaimOutcome::Claimed);
  CHECK(w->try_claim() == ClaimOutcome::Busy);
  w->release_claim();
  CHECK(w->state.load() == WaiterState::Pending);
  CHECK(w->try_claim() == ClaimOutcome::Claimed);
  w->resolve();
  CHECK(w->try_claim() == ClaimOutcome::AlreadyResolved);
}

TEST_CASE("two racing claimers: exactly one wins") {
  constexpr int kRounds = 100'000;
  std::vector<WaiterPtr> ws;
  ws.reserve(kRounds);
  for (int i = 0; i < kRounds; ++i) ws.push_back(recv_waiter(i, ChannelId{1}));

  std::atomic<int> next{0};
  std::atomic<int> wins{0};
  auto racer = [&] {
    for (;;) {
      int i = next.fetch_add(1) / 2;  // two hits per waiter
      if (i >= kRounds) return;
      if (ws[static_cast<std::size_t>(i)]->try_claim() == ClaimOutcome::Claimed)
        wins.fetch_add(1);
    }
  };
  std::thread a(racer), b(racer);
  a.join();
  b.join();

  // Every waiter was claimed by at most one racer; late probes saw Busy.
  CHECK(wins.load() <= kRounds);
  int claimed = 0;
  for (const auto& w : ws)
    if (w->state.load() == WaiterState::Claiming) ++claimed;
  CHECK(claimed == wins.load());
}

TEST_CASE("a timeout claimer on a resolved waiter never dispatches") {
  Registry reg;
  auto c = reg.create_channel();
  auto w = recv_waiter(1, c);
  bool timeout_ran = false;
  w->deadline = 1;
  w->timeout_dispatch = [&timeout_ran]() -> ProcPtr {
    timeout_ran = true;
    return nullptr;
  };
  reg.register_waiter(w);
  reg.send_message(c, v_unit());  // resolves via the message path
  REQUIRE(w->state.load() == WaiterState::Resolved);
  CHECK(w->try_claim() == ClaimOutcome::AlreadyResolved);
  CHECK_FALSE(timeout_ran);
}

TEST_CASE("no lost wakeups under concurrent send and register") {
  constexpr int kIters = 10'000;
  Registry reg;
  for (int i = 0; i < kIters; ++i) {
    auto c = reg.create_channel();
    auto w = recv_waiter(i, c);
    std::thread sender([&] { reg.send_message(c, v_int(i)); });
    std::thread receiver([&] { reg.register_waiter(w); });
    sender.join();
    receiver.join();
    // Either the message met the scan, or the parked waiter met the send.
    bool resolved = w->state.load() == WaiterState::Resolved;
    bool queued = reg.queued_total() > 0;
    CHECK(resolved != queued);
    if (resolved) {
      CHECK_FALSE(reg.waiter_linked(w));
    } else {
      // Drain for the next round.
      auto got = reg.poll_dequeue(w, std::vector<std::size_t>{0});
      CHECK(got.has_value());
    }
    CHECK_FALSE(reg.eligible_pending_pair());
  }
}

TEST_CASE("register_waiter demands a handler when a deadline is set") {
  Registry reg;
  auto c = reg.create_channel();
  auto w = recv_waiter(1, c);
  w->deadline = 10;  // no timeout_dispatch
  CHECK_THROWS_AS(reg.register_waiter(w), BadTimeoutDuration);
}

TEST_CASE("sends to closed channels are rejected") {
  Registry reg;
  auto c = reg.create_channel();
  reg.close_all();
  CHECK_THROWS_AS(reg.send_message(c, v_unit()), ChannelClosed);
}

TEST_CASE("queue snapshots report leftover messages") {
  Registry reg;
  auto c1 = reg.create_channel();
  auto c2 = reg.create_channel();
  reg.send_message(c1, v_labelled("Bid", v_str("b1")));
  reg.send_message(c1, v_labelled("Bid", v_str("b2")));
  (void)c2;
  auto snap = reg.snapshot_queues();
  REQUIRE(snap.size() == 1);
  CHECK(snap[0].first == c1);
  CHECK(snap[0].second.size() == 2);
}

TEST_CASE("a busy claim is retried until the holder releases or resolves") {
  // Mimics the timer service: somebody else holds the claim, the timeout
  // keeps retrying after a short delay and must win as soon as the claim
  // is released.
  auto w = recv_waiter(1, ChannelId{1});
  REQUIRE(w->try_claim() == ClaimOutcome::Claimed);  // a sender holds it

  std::atomic<bool> released{false};
  std::thread holder([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    w->release_claim();
    released.store(true);
  });

  int attempts = 0;
  ClaimOutcome out;
  for (;;) {
    out = w->try_claim();
    ++attempts;
    if (out != ClaimOutcome::Busy) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  holder.join();
  CHECK(out == ClaimOutcome::Claimed);
  CHECK(attempts >= 2);
  CHECK(released.load());
  CHECK(w->failed_claims.load() >= 1);

  // Retrying against a resolved waiter reports AlreadyResolved instead.
  w->resolve();
  CHECK(w->try_claim() == ClaimOutcome::AlreadyResolved);
}
