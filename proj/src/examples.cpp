#include "chansel/examples.hpp"

#include <stdexcept>

#include "chansel/raft.hpp"

namespace chansel::examples {

namespace {

TypePtr decision_type() {
  static TypePtr t = union_t(
      {labelled_t(kAccept, unit_t()), labelled_t(kReject, unit_t())});
  return t;
}

TypePtr bid_msg_type() {
  static TypePtr t = labelled_t(kBid, string_t());
  return t;
}

TypePtr close_msg_type() {
  static TypePtr t = labelled_t(kCloseAuction, unit_t());
  return t;
}

ChanExprRef in_ref(ChannelId id) {
  return ChanExprRef{ChanRefV{id, Capability::InputOutput}};
}
ChanExprRef out_ref(ChannelId id) {
  return ChanExprRef{ChanRefV{id, Capability::Output}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Travel agency

TypePtr travel_agency_type() {
  return branch_t({TypeRef{std::string("c1")}},
                  {{kAccept, unit_t(),
                    out_t(TypeRef{std::string("c2")}, string_t(), nil_t())},
                   {kReject, unit_t(), nil_t()}});
}

ProcPtr travel_agency_proc(ChanExprRef decision_chan, ChanExprRef ticket_chan,
                           bool faulty) {
  std::vector<MatchCase> cases;
  cases.push_back({kAccept, unit_t(), [ticket_chan](const Value&) {
                     return send_p(ticket_chan, v_str("Your ticket"),
                                   [] { return end_p(); });
                   }});
  cases.push_back({kReject, unit_t(), [ticket_chan, faulty](const Value&) -> ProcPtr {
                     if (faulty) {
                       // Hands out a ticket after a rejection.
                       return send_p(ticket_chan, v_str("Your ticket"),
                                     [] { return end_p(); });
                     }
                     return end_p();
                   }});
  return mk_branch({decision_chan}, std::move(cases), std::nullopt,
                   {decision_type()});
}

ProcPtr travel_agency_world(Registry& reg, std::uint64_t seed) {
  ChannelId c1 = reg.create_channel();
  ChannelId c2 = reg.create_channel();
  bool accept = seed % 2 == 0;
  ProcPtr agency = travel_agency_proc(in_ref(c1), out_ref(c2));
  Value decision = v_labelled(accept ? kAccept : kReject, v_unit());
  ChanExprRef c2in = in_ref(c2);
  ProcPtr client = send_p(out_ref(c1), decision, [accept, c2in]() -> ProcPtr {
    if (accept)
      return recv_p(c2in, [](const Value&) { return end_p(); });
    return end_p();
  });
  return par_p(agency, client);
}

// ---------------------------------------------------------------------------
// Auction house

TypePtr auction_house_type() {
  TypePtr body = branch_t(
      {TypeRef{std::string("bids")}, TypeRef{std::string("ctl")}},
      {{kBid, string_t(), var_t("auction")},
       {kCloseAuction, unit_t(), nil_t()}});
  return rec_t("auction", timeout_t(body, var_t("auction")));
}

ProcPtr auction_house_proc(ChanExprRef bid_chan, ChanExprRef close_chan,
                           Duration quiet, std::optional<int> rounds) {
  auto remaining = std::make_shared<int>(rounds.value_or(0));
  bool bounded = rounds.has_value();
  return rec_p("auction", [bid_chan, close_chan, quiet, remaining, bounded] {
    return mk_catch_timeout(
        [bid_chan, close_chan, quiet] {
          std::vector<MatchCase> cases;
          cases.push_back({kBid, string_t(),
                           [](const Value&) { return loop_p("auction"); }});
          cases.push_back({kCloseAuction, unit_t(),
                           [](const Value&) { return end_p(); }});
          return mk_branch({bid_chan, close_chan}, std::move(cases), quiet,
                           {bid_msg_type(), close_msg_type()});
        },
        [remaining, bounded]() -> ProcPtr {
          // Quiet spell: drop the asking price and keep listening.
          if (bounded && --(*remaining) <= 0) return end_p();
          return loop_p("auction");
        });
  });
}

ProcPtr after_delay(ChanExprRef idle_chan, Duration d, Thunk cont) {
  return mk_catch_timeout(
      [idle_chan, d] {
        return recv_p(
            idle_chan, [](const Value&) { return end_p(); }, d);
      },
      std::move(cont));
}

ProcPtr auction_world(Registry& reg, int early, int late, Duration quiet) {
  ChannelId bids = reg.create_channel();
  ChannelId ctl = reg.create_channel();
  ChannelId idle = reg.create_channel();

  ProcPtr auction = auction_house_proc(in_ref(bids), in_ref(ctl), quiet, 2);

  ProcPtr early_bids = end_p();
  for (int i = early - 1; i >= 0; --i) {
    ProcPtr next = early_bids;
    early_bids = send_p(out_ref(bids),
                        v_labelled(kBid, v_str("early-" + std::to_string(i))),
                        [next] { return next; });
  }
  ProcPtr closer =
      send_p(out_ref(ctl), v_labelled(kCloseAuction, v_unit()),
             [] { return end_p(); });

  ProcPtr late_bids = end_p();
  for (int i = late - 1; i >= 0; --i) {
    ProcPtr next = late_bids;
    late_bids = send_p(out_ref(bids),
                       v_labelled(kBid, v_str("late-" + std::to_string(i))),
                       [next] { return next; });
  }
  ProcPtr late_proc = after_delay(in_ref(idle), quiet * 4,
                                  [late_bids] { return late_bids; });

  return par_p(auction, par_p(early_bids, par_p(closer, late_proc)));
}

ProcPtr auction_quiet_world(Registry& reg, int rounds, Duration quiet) {
  ChannelId bids = reg.create_channel();
  ChannelId ctl = reg.create_channel();
  return auction_house_proc(in_ref(bids), in_ref(ctl), quiet, rounds);
}

// ---------------------------------------------------------------------------
// Timer

ProcPtr timer_world(Registry& reg, Duration duration) {
  ChannelId reset = reg.create_channel();
  ChannelId tout = reg.create_channel();
  ChannelId idle = reg.create_channel();

  ProcPtr timer = raft::timer_process(in_ref(reset), out_ref(tout), duration);

  ChanExprRef reset_out = out_ref(reset);
  ChanExprRef tout_in = in_ref(tout);
  ChanExprRef idle_in = in_ref(idle);
  ProcPtr driver = send_p(
      reset_out, raft::timer_reset_msg(), [reset_out, tout_in, idle_in] {
        return after_delay(idle_in, Duration{40}, [reset_out, tout_in] {
          return send_p(reset_out, raft::timer_reset_msg(), [tout_in] {
            return recv_p(tout_in, [](const Value&) { return end_p(); });
          });
        });
      });

  return par_p(timer, driver);
}

// ---------------------------------------------------------------------------
// Stress world

ProcPtr stress_world(Registry& reg, const StressSpec& spec) {
  std::vector<ChannelId> chans(spec.channels);
  for (auto& c : chans) c = reg.create_channel();

  auto remaining = std::make_shared<std::size_t>(spec.iterations);
  std::vector<ChanExprRef> listen;
  listen.reserve(chans.size());
  for (ChannelId c : chans) listen.push_back(in_ref(c));
  std::vector<TypePtr> declared(chans.size(), labelled_t(kMsg, int_t()));

  Duration timeout = spec.timeout;
  ProcPtr receiver = rec_p("pump", [listen, declared, timeout, remaining]() -> ProcPtr {
    if (*remaining == 0) return end_p();
    return mk_catch_timeout(
        [listen, declared, timeout, remaining] {
          std::vector<MatchCase> cases;
          cases.push_back({kMsg, int_t(), [remaining](const Value&) {
                             --(*remaining);
                             return loop_p("pump");
                           }});
          return mk_branch(listen, std::move(cases), timeout, declared);
        },
        [remaining] {
          --(*remaining);
          return loop_p("pump");
        });
  });

  std::vector<ProcPtr> procs{receiver};
  for (std::size_t i = 0; i < spec.senders; ++i) {
    ChanExprRef target = out_ref(chans[i % chans.size()]);
    auto left = std::make_shared<std::size_t>(spec.per_sender);
    Value msg = v_labelled(kMsg, v_int(static_cast<std::int64_t>(i)));
    procs.push_back(rec_p("gen", [target, left, msg]() -> ProcPtr {
      if (*left == 0) return end_p();
      --(*left);
      return send_p(target, msg, [] { return loop_p("gen"); });
    }));
  }

  ProcPtr world = procs.back();
  for (int k = static_cast<int>(procs.size()) - 2; k >= 0; --k)
    world = par_p(procs[k], world);
  return world;
}

// ---------------------------------------------------------------------------
// Fixtures

namespace {

CheckFixture travel_fixture(bool faulty) {
  CheckFixture f;
  f.name = faulty ? "travel-agency-faulty" : "travel-agency";
  f.type = travel_agency_type();
  f.env.channel_bindings["c1"] = chan_t(Capability::Input, decision_type());
  f.env.channel_bindings["c2"] = chan_t(Capability::Output, string_t());
  f.proc = travel_agency_proc(ChanExprRef{std::string("c1")},
                              ChanExprRef{std::string("c2")}, faulty);
  return f;
}

CheckFixture auction_fixture() {
  CheckFixture f;
  f.name = "auction-house";
  f.type = auction_house_type();
  f.env.channel_bindings["bids"] = chan_t(Capability::Input, bid_msg_type());
  f.env.channel_bindings["ctl"] = chan_t(Capability::Input, close_msg_type());
  f.proc = auction_house_proc(ChanExprRef{std::string("bids")},
                              ChanExprRef{std::string("ctl")}, Duration{50},
                              std::nullopt);
  return f;
}

CheckFixture timer_fixture() {
  CheckFixture f;
  f.name = "timer";
  f.type = raft::timer_type(TypeRef{std::string("reset")},
                            TypeRef{std::string("timeout")});
  f.env.channel_bindings["reset"] =
      chan_t(Capability::Input, labelled_t(raft::kTimerReset, unit_t()));
  f.env.channel_bindings["timeout"] =
      chan_t(Capability::Output, labelled_t(raft::kTimerExpired, unit_t()));
  f.proc = raft::timer_process(ChanExprRef{std::string("reset")},
                               ChanExprRef{std::string("timeout")},
                               Duration{150});
  return f;
}

CheckFixture raft_fixture(raft::NodeRole role, const std::string& name) {
  const int n = 3;
  CheckFixture f;
  f.name = name;
  f.type = raft::node_type(role, n);
  f.env = raft::node_check_env(n);

  auto scratch = std::make_shared<Registry>();
  auto nd = std::make_shared<raft::NodeRuntime>();
  nd->cfg.id = 0;
  nd->cfg.cluster_size = n;
  nd->chans = raft::node_check_channels(n);
  nd->registry = scratch.get();
  nd->chan_types = f.env.chan_types;
  switch (role) {
    case raft::NodeRole::Follower: f.proc = raft::follower_process(nd); break;
    case raft::NodeRole::Candidate: f.proc = raft::candidate_process(nd); break;
    case raft::NodeRole::Leader: f.proc = raft::leader_process(nd); break;
  }
  f.keepalive.push_back(scratch);
  f.keepalive.push_back(nd);
  return f;
}

}  // namespace

std::vector<std::string> fixture_names() {
  return {"travel-agency", "travel-agency-faulty", "auction-house",
          "timer",         "raft-follower",        "raft-candidate",
          "raft-leader"};
}

CheckFixture make_fixture(const std::string& name) {
  if (name == "travel-agency") return travel_fixture(false);
  if (name == "travel-agency-faulty") return travel_fixture(true);
  if (name == "auction-house") return auction_fixture();
  if (name == "timer") return timer_fixture();
  if (name == "raft-follower")
    return raft_fixture(raft::NodeRole::Follower, name);
  if (name == "raft-candidate")
    return raft_fixture(raft::NodeRole::Candidate, name);
  if (name == "raft-leader") return raft_fixture(raft::NodeRole::Leader, name);
  throw std::out_of_range("unknown fixture: " + name);
}

}  // namespace chansel::examples
