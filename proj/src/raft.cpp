#include "chansel/raft.hpp"

#include <json.hpp>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

namespace chansel::raft {

// ---------------------------------------------------------------------------
// Messages

Value request_vote_msg(std::int64_t term, int candidate, ChanRefV reply) {
  return v_labelled(kRequestVote,
                    v_tuple({v_int(term), v_int(candidate), Value{reply}}));
}
Value append_entries_msg(std::int64_t term, int leader, ChanRefV reply) {
  return v_labelled(kAppendEntries,
                    v_tuple({v_int(term), v_int(leader), Value{reply}}));
}
Value grant_vote_msg(std::int64_t term) {
  return v_labelled(kGrantVote, v_tuple({v_int(term)}));
}
Value refuse_vote_msg(std::int64_t term) {
  return v_labelled(kRefuseVote, v_tuple({v_int(term)}));
}
Value ack_append_msg(std::int64_t term) {
  return v_labelled(kAckAppendEntries, v_tuple({v_int(term)}));
}
Value timer_reset_msg() { return v_labelled(kTimerReset, v_unit()); }
Value timer_expired_msg() { return v_labelled(kTimerExpired, v_unit()); }

Rpc parse_rpc(const Value& payload) {
  const auto& t = std::get<TupleV>(payload.v);
  return {std::get<std::int64_t>(t.items.at(0).v),
          static_cast<int>(std::get<std::int64_t>(t.items.at(1).v)),
          std::get<ChanRefV>(t.items.at(2).v)};
}

std::int64_t parse_term(const Value& payload) {
  const auto& t = std::get<TupleV>(payload.v);
  return std::get<std::int64_t>(t.items.at(0).v);
}

// ---------------------------------------------------------------------------
// Payload types

TypePtr vote_response_type() {
  static TypePtr t = union_t({labelled_t(kGrantVote, tuple_t({int_t()})),
                              labelled_t(kRefuseVote, tuple_t({int_t()}))});
  return t;
}
TypePtr ack_response_type() {
  static TypePtr t = labelled_t(kAckAppendEntries, tuple_t({int_t()}));
  return t;
}
TypePtr rpc_payload_type() {
  static TypePtr t = tuple_t(
      {int_t(), int_t(), chan_t(Capability::Output, vote_response_type())});
  return t;
}
TypePtr ae_payload_type() {
  static TypePtr t = tuple_t(
      {int_t(), int_t(), chan_t(Capability::Output, ack_response_type())});
  return t;
}
TypePtr inbox_payload_type() {
  static TypePtr t = union_t({labelled_t(kRequestVote, rpc_payload_type()),
                              labelled_t(kAppendEntries, ae_payload_type())});
  return t;
}

namespace {

TypePtr reset_msg_type() { return labelled_t(kTimerReset, unit_t()); }
TypePtr expired_msg_type() { return labelled_t(kTimerExpired, unit_t()); }

}  // namespace

// ---------------------------------------------------------------------------
// Timer

ProcPtr timer_process_dyn(ChanExprRef reset, ChanExprRef timeout_chan,
                          std::function<Duration()> next_duration) {
  return rec_p("tick", [reset, timeout_chan, next_duration] {
    return recv_p(reset, [reset, timeout_chan, next_duration](const Value&) {
      return rec_p("armed", [reset, timeout_chan, next_duration] {
        return mk_catch_timeout(
            [reset, next_duration] {
              return recv_p(
                  reset, [](const Value&) { return loop_p("armed"); },
                  next_duration());
            },
            [timeout_chan] {
              return send_p(timeout_chan, timer_expired_msg(),
                            [] { return loop_p("tick"); });
            });
      });
    });
  });
}

ProcPtr timer_process(ChanExprRef reset, ChanExprRef timeout_chan,
                      Duration duration) {
  return timer_process_dyn(reset, timeout_chan, [duration] { return duration; });
}

TypePtr timer_type(TypeRef reset, TypeRef timeout_chan) {
  return rec_t(
      "tick",
      in_t(reset, reset_msg_type(), "r",
           rec_t("armed",
                 timeout_t(in_t(reset, reset_msg_type(), "r", var_t("armed")),
                           out_t(timeout_chan, expired_msg_type(),
                                 var_t("tick"))))));
}

// ---------------------------------------------------------------------------
// Votes

VoteOutcome vote_decision(VoteState& s, std::int64_t rv_term, int candidate) {
  if (rv_term < s.current_term) return VoteOutcome::Refuse;
  if (rv_term == s.current_term && s.voted_term && *s.voted_term == rv_term &&
      s.voted_for != candidate)
    return VoteOutcome::Refuse;
  s.current_term = rv_term;
  s.voted_term = rv_term;
  s.voted_for = candidate;
  return VoteOutcome::Grant;
}

// ---------------------------------------------------------------------------
// Node processes

namespace {

void record(NodeRuntime& st, RaftEvent::Kind k, std::int64_t term) {
  if (st.record) st.record({k, st.cfg.id, term});
}

ChanRefV make_typed_channel(NodeRuntime& st, const TypePtr& payload) {
  ChannelId id = st.registry->create_channel();
  if (st.chan_types)
    (*st.chan_types)[id] = chan_t(Capability::InputOutput, payload);
  return ChanRefV{id, Capability::InputOutput};
}

ProcPtr broadcast_chain(const NodeRuntime& st, const Value& msg) {
  Label label = top_label(msg).value_or("");
  ProcPtr acc = end_p();
  for (int i = static_cast<int>(st.chans.peers.size()) - 1; i >= 0; --i) {
    if (st.drop && st.drop(st.cfg.id, i, label)) continue;
    ChanExprRef ch = st.chans.peers[static_cast<std::size_t>(i)];
    ProcPtr next = acc;
    acc = send_p(ch, msg, [next] { return next; });
  }
  return acc;
}

// Grant a vote: reply, reset the election timer, and settle as follower.
// `after` builds the state to settle into (a follower loop or a fresh
// follower process when stepping down).
ProcPtr grant_behaviour(NodePtr nd, const Rpc& rv, Thunk after) {
  return send_p(ChanExprRef{rv.reply}, grant_vote_msg(rv.term), [nd, after] {
    return send_p(nd->chans.timer_reset, timer_reset_msg(), after);
  });
}

// Handle a RequestVote in any state. `stay` loops back to the current
// state; a granted vote always falls back to follower.
ProcPtr vote_reply(NodePtr nd, const Value& payload, const Thunk& stay,
                   const Thunk& to_follower) {
  Rpc rv = parse_rpc(payload);
  bool repeat_grant = nd->votes.voted_term &&
                      *nd->votes.voted_term == rv.term &&
                      nd->votes.voted_for == rv.sender;
  if (vote_decision(nd->votes, rv.term, rv.sender) == VoteOutcome::Grant) {
    if (!repeat_grant) record(*nd, RaftEvent::Kind::VoteGranted, rv.term);
    nd->timer_mode.store(0);
    return grant_behaviour(nd, rv, to_follower);
  }
  return send_p(ChanExprRef{rv.reply}, refuse_vote_msg(nd->votes.current_term),
                stay);
}

// Handle an AppendEntries heartbeat. A current-or-newer term is acked and
// resets the timer; `fresh` continues from there (followers keep looping,
// candidates and leaders step down). Stale heartbeats are acked with the
// current term and stay put.
ProcPtr append_reply(NodePtr nd, const Value& payload, bool adopt_equal_term,
                     const Thunk& stay, const Thunk& fresh) {
  Rpc ae = parse_rpc(payload);
  bool adopt = adopt_equal_term ? ae.term >= nd->votes.current_term
                                : ae.term > nd->votes.current_term;
  if (adopt) {
    nd->votes.current_term = ae.term;
    nd->timer_mode.store(0);
    return send_p(ChanExprRef{ae.reply}, ack_append_msg(ae.term), [nd, fresh] {
      return send_p(nd->chans.timer_reset, timer_reset_msg(), fresh);
    });
  }
  return send_p(ChanExprRef{ae.reply}, ack_append_msg(nd->votes.current_term),
                stay);
}

ProcPtr follower_branch(NodePtr nd);
ProcPtr await_votes(NodePtr nd, ChanRefV reply);
ProcPtr lead_loop(NodePtr nd);

ProcPtr follower_branch(NodePtr nd) {
  std::vector<MatchCase> cases;
  cases.push_back({kRequestVote, rpc_payload_type(), [nd](const Value& v) {
                     return vote_reply(
                         nd, v, [] { return loop_p("follower"); },
                         [] { return loop_p("follower"); });
                   }});
  cases.push_back({kAppendEntries, ae_payload_type(), [nd](const Value& v) {
                     return append_reply(
                         nd, v, /*adopt_equal_term=*/true,
                         [] { return loop_p("follower"); },
                         [] { return loop_p("follower"); });
                   }});
  cases.push_back({kTimerExpired, unit_t(),
                   [nd](const Value&) { return candidate_process(nd); }});
  return mk_branch({nd->chans.inbox, nd->chans.timeout_chan}, std::move(cases),
                   std::nullopt, {inbox_payload_type(), expired_msg_type()});
}

ProcPtr await_votes(NodePtr nd, ChanRefV reply) {
  return rec_p("await", [nd, reply] {
    const int majority = nd->cfg.cluster_size / 2 + 1;
    std::vector<MatchCase> cases;
    cases.push_back(
        {kGrantVote, tuple_t({int_t()}), [nd, majority](const Value& v) -> ProcPtr {
           if (parse_term(v) == nd->votes.current_term) {
             nd->tally += 1;
             if (nd->tally >= majority) return leader_process(nd);
           }
           return loop_p("await");
         }});
    cases.push_back({kRefuseVote, tuple_t({int_t()}),
                     [](const Value&) { return loop_p("await"); }});
    cases.push_back({kRequestVote, rpc_payload_type(), [nd](const Value& v) {
                       return vote_reply(
                           nd, v, [] { return loop_p("await"); },
                           [nd] { return follower_process(nd); });
                     }});
    cases.push_back({kAppendEntries, ae_payload_type(), [nd](const Value& v) {
                       return append_reply(
                           nd, v, /*adopt_equal_term=*/true,
                           [] { return loop_p("await"); },
                           [nd] { return follower_process(nd); });
                     }});
    cases.push_back({kTimerExpired, unit_t(),
                     [](const Value&) { return loop_p("election"); }});
    return mk_branch({ChanExprRef{reply}, nd->chans.inbox, nd->chans.timeout_chan},
                     std::move(cases), std::nullopt,
                     {vote_response_type(), inbox_payload_type(),
                      expired_msg_type()});
  });
}

ProcPtr lead_loop(NodePtr nd) {
  return rec_p("lead", [nd] {
    std::vector<MatchCase> cases;
    cases.push_back({kRequestVote, rpc_payload_type(), [nd](const Value& v) {
                       return vote_reply(
                           nd, v, [] { return loop_p("lead"); },
                           [nd] { return follower_process(nd); });
                     }});
    cases.push_back({kAppendEntries, ae_payload_type(), [nd](const Value& v) {
                       return append_reply(
                           nd, v, /*adopt_equal_term=*/false,
                           [] { return loop_p("lead"); },
                           [nd] { return follower_process(nd); });
                     }});
    cases.push_back({kTimerExpired, unit_t(),
                     [](const Value&) { return loop_p("heartbeat"); }});
    return mk_branch({nd->chans.inbox, nd->chans.timeout_chan}, std::move(cases),
                     std::nullopt, {inbox_payload_type(), expired_msg_type()});
  });
}

}  // namespace

ProcPtr follower_process(NodePtr nd) {
  record(*nd, RaftEvent::Kind::BecameFollower, nd->votes.current_term);
  return rec_p("follower", [nd] {
    nd->timer_mode.store(0);
    return follower_branch(nd);
  });
}

ProcPtr candidate_process(NodePtr nd) {
  return rec_p("election", [nd]() -> ProcPtr {
    auto& st = *nd;
    st.votes.current_term += 1;
    st.votes.voted_term = st.votes.current_term;
    st.votes.voted_for = st.cfg.id;
    st.tally = 1;  // own vote
    st.timer_mode.store(0);
    record(st, RaftEvent::Kind::BecameCandidate, st.votes.current_term);
    record(st, RaftEvent::Kind::VoteGranted, st.votes.current_term);
    const int majority = st.cfg.cluster_size / 2 + 1;
    if (majority <= 1) {
      return send_p(st.chans.timer_reset, timer_reset_msg(),
                    [nd] { return leader_process(nd); });
    }
    // A fresh reply channel per election keeps stragglers from previous
    // elections out of this tally.
    ChanRefV reply = make_typed_channel(st, vote_response_type());
    Value rv = request_vote_msg(st.votes.current_term, st.cfg.id,
                                ChanRefV{reply.id, Capability::Output});
    return send_p(st.chans.timer_reset, timer_reset_msg(), [nd, reply, rv] {
      return par_p(broadcast_chain(*nd, rv), await_votes(nd, reply));
    });
  });
}

ProcPtr leader_process(NodePtr nd) {
  record(*nd, RaftEvent::Kind::LeaderElected, nd->votes.current_term);
  nd->timer_mode.store(1);
  ChanRefV ack = make_typed_channel(*nd, ack_response_type());
  return rec_p("heartbeat", [nd, ack]() -> ProcPtr {
    nd->timer_mode.store(1);
    Value ae = append_entries_msg(nd->votes.current_term, nd->cfg.id,
                                  ChanRefV{ack.id, Capability::Output});
    return send_p(nd->chans.timer_reset, timer_reset_msg(), [nd, ae] {
      return par_p(broadcast_chain(*nd, ae), lead_loop(nd));
    });
  });
}

ProcPtr node_process(NodePtr nd) {
  return send_p(nd->chans.timer_reset, timer_reset_msg(),
                [nd] { return follower_process(nd); });
}

std::function<Duration()> node_timer_durations(NodePtr nd, std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [nd, rng]() -> Duration {
    if (nd->timer_mode.load() == 1)
      return Duration(nd->cfg.heartbeat_interval);
    std::uint64_t span =
        nd->cfg.election_timeout_max - nd->cfg.election_timeout_min + 1;
    return Duration(
        static_cast<std::int64_t>(nd->cfg.election_timeout_min + (*rng)() % span));
  };
}

// ---------------------------------------------------------------------------
// Protocol types

TypePtr node_type(NodeRole root, int cluster_size) {
  const TypePtr vresp = vote_response_type();
  const TypePtr rvp = rpc_payload_type();
  const TypePtr aep = ae_payload_type();
  const TypePtr grant_m = labelled_t(kGrantVote, tuple_t({int_t()}));
  const TypePtr refuse_m = labelled_t(kRefuseVote, tuple_t({int_t()}));
  const TypePtr ack_m = labelled_t(kAckAppendEntries, tuple_t({int_t()}));
  const TypePtr rv_m = labelled_t(kRequestVote, rvp);
  const TypePtr ae_m = labelled_t(kAppendEntries, aep);
  const TypeRef inbox{std::string("inbox")};
  const TypeRef tchan{std::string("timeout")};
  const TypeRef reset{std::string("reset")};
  const TypePtr reply_out = chan_t(Capability::Output, vresp);
  const TypePtr ack_out = chan_t(Capability::Output, ack_response_type());

  auto out_reset = [&](TypePtr k) { return out_t(reset, reset_msg_type(), k); };
  auto grant_b = [&](TypePtr k) {
    return out_t(TypeRef{reply_out}, grant_m, out_reset(std::move(k)));
  };
  auto refuse_b = [&](TypePtr k) {
    return out_t(TypeRef{reply_out}, refuse_m, std::move(k));
  };
  auto vote_reply_t = [&](TypePtr grant_k, TypePtr refuse_k) {
    return union_t({grant_b(std::move(grant_k)), refuse_b(std::move(refuse_k))});
  };
  auto ack_fresh = [&](TypePtr k) {
    return out_t(TypeRef{ack_out}, ack_m, out_reset(std::move(k)));
  };
  auto ack_stale = [&](TypePtr k) {
    return out_t(TypeRef{ack_out}, ack_m, std::move(k));
  };
  auto ae_reply_t = [&](TypePtr fresh_k, TypePtr stale_k) {
    return union_t({ack_fresh(std::move(fresh_k)), ack_stale(std::move(stale_k))});
  };
  auto broadcast = [&](const TypePtr& msg) {
    TypePtr acc = nil_t();
    for (int i = cluster_size - 2; i >= 0; --i)
      acc = out_t(TypeRef{"peer" + std::to_string(i)}, msg, acc);
    return acc;
  };

  std::map<int, std::string> open;
  std::function<TypePtr(NodeRole)> build = [&](NodeRole role) -> TypePtr {
    int key = static_cast<int>(role);
    if (open.count(key)) return var_t(open[key]);
    if (role == NodeRole::Follower) {
      open[key] = "follower";
      TypePtr f = var_t("follower");
      TypePtr cand = build(NodeRole::Candidate);
      TypePtr body =
          branch_t({inbox, tchan}, {{kRequestVote, rvp, vote_reply_t(f, f)},
                                    {kAppendEntries, aep, ae_reply_t(f, f)},
                                    {kTimerExpired, unit_t(), cand}});
      open.erase(key);
      return rec_t("follower", body);
    }
    if (role == NodeRole::Candidate) {
      open[key] = "election";
      TypePtr follower_edge = build(NodeRole::Follower);
      TypePtr leader_edge = build(NodeRole::Leader);
      TypePtr aw = var_t("await");
      TypePtr await_body = branch_t(
          {TypeRef{chan_t(Capability::InputOutput, vresp)}, inbox, tchan},
          {{kGrantVote, tuple_t({int_t()}), union_t({aw, leader_edge})},
           {kRefuseVote, tuple_t({int_t()}), aw},
           {kRequestVote, rvp, vote_reply_t(follower_edge, aw)},
           {kAppendEntries, aep, ae_reply_t(follower_edge, aw)},
           {kTimerExpired, unit_t(), var_t("election")}});
      TypePtr normal =
          out_reset(par_t(broadcast(rv_m), rec_t("await", await_body)));
      TypePtr solo = out_reset(leader_edge);
      open.erase(key);
      return rec_t("election", union_t({solo, normal}));
    }
    open[key] = "heartbeat";
    TypePtr follower_edge = build(NodeRole::Follower);
    TypePtr lead_body = branch_t(
        {inbox, tchan},
        {{kRequestVote, rvp, vote_reply_t(follower_edge, var_t("lead"))},
         {kAppendEntries, aep, ae_reply_t(follower_edge, var_t("lead"))},
         {kTimerExpired, unit_t(), var_t("heartbeat")}});
    TypePtr hb = out_reset(par_t(broadcast(ae_m), rec_t("lead", lead_body)));
    open.erase(key);
    return rec_t("heartbeat", hb);
  };
  return build(root);
}

NodeChannels node_check_channels(int cluster_size) {
  NodeChannels ch;
  ch.inbox = ChanExprRef{std::string("inbox")};
  for (int i = 0; i + 1 < cluster_size; ++i)
    ch.peers.push_back(ChanExprRef{"peer" + std::to_string(i)});
  ch.timer_reset = ChanExprRef{std::string("reset")};
  ch.timeout_chan = ChanExprRef{std::string("timeout")};
  return ch;
}

ConformanceEnv node_check_env(int cluster_size) {
  ConformanceEnv env;
  env.channel_bindings["inbox"] =
      chan_t(Capability::InputOutput, inbox_payload_type());
  env.channel_bindings["timeout"] =
      chan_t(Capability::InputOutput, expired_msg_type());
  env.channel_bindings["reset"] = chan_t(Capability::Output, reset_msg_type());
  for (int i = 0; i + 1 < cluster_size; ++i)
    env.channel_bindings["peer" + std::to_string(i)] =
        chan_t(Capability::Output, inbox_payload_type());
  env.chan_types = std::make_shared<std::map<ChannelId, TypePtr>>();
  return env;
}

// ---------------------------------------------------------------------------
// Cluster harness

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (salt + 0x9e3779b97f4a7c15ull + (seed << 6));
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  return x;
}

const char* to_string(RaftEvent::Kind k) {
  switch (k) {
    case RaftEvent::Kind::BecameFollower: return "BecameFollower";
    case RaftEvent::Kind::BecameCandidate: return "BecameCandidate";
    case RaftEvent::Kind::VoteGranted: return "VoteGranted";
    case RaftEvent::Kind::LeaderElected: return "LeaderElected";
  }
  return "?";
}

}  // namespace

ClusterResult run_cluster(const ClusterConfig& cfg) {
  if (cfg.nodes < 1) throw std::invalid_argument("cluster needs at least one node");
  if (cfg.election_timeout_min == 0 ||
      cfg.election_timeout_max < cfg.election_timeout_min)
    throw std::invalid_argument("bad election timeout range");
  if (cfg.heartbeat_interval >= cfg.election_timeout_min)
    throw std::invalid_argument(
        "heartbeat interval must stay below the election timeout range");
  auto events = std::make_shared<std::vector<RaftEvent>>();
  auto events_mu = std::make_shared<std::mutex>();
  Recorder recorder = [events, events_mu](const RaftEvent& e) {
    std::lock_guard lk(*events_mu);
    events->push_back(e);
  };

  ProgramBuilder builder = [&](Registry& reg) -> ProcPtr {
    const int n = cfg.nodes;
    std::vector<ChannelId> inboxes(n), resets(n), touts(n);
    for (int i = 0; i < n; ++i) {
      inboxes[i] = reg.create_channel();
      resets[i] = reg.create_channel();
      touts[i] = reg.create_channel();
    }
    std::vector<ProcPtr> procs;
    for (int i = 0; i < n; ++i) {
      auto nd = std::make_shared<NodeRuntime>();
      nd->cfg = {i, n, cfg.election_timeout_min, cfg.election_timeout_max,
                 cfg.heartbeat_interval};
      nd->chans.inbox =
          ChanExprRef{ChanRefV{inboxes[i], Capability::InputOutput}};
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        nd->chans.peers.push_back(
            ChanExprRef{ChanRefV{inboxes[j], Capability::Output}});
      }
      nd->chans.timer_reset =
          ChanExprRef{ChanRefV{resets[i], Capability::Output}};
      nd->chans.timeout_chan =
          ChanExprRef{ChanRefV{touts[i], Capability::InputOutput}};
      nd->registry = &reg;
      nd->record = recorder;
      nd->drop = cfg.drop;
      procs.push_back(node_process(nd));
      procs.push_back(timer_process_dyn(
          ChanExprRef{ChanRefV{resets[i], Capability::InputOutput}},
          ChanExprRef{ChanRefV{touts[i], Capability::Output}},
          node_timer_durations(nd, mix(cfg.seed, 1000 + i))));
    }
    ProcPtr world = procs.back();
    for (int k = static_cast<int>(procs.size()) - 2; k >= 0; --k)
      world = par_p(procs[k], world);
    return world;
  };

  EngineConfig ec;
  ec.engine = cfg.engine;
  ec.seed = cfg.seed;
  ec.max_steps = cfg.max_steps;
  ec.max_ticks = cfg.max_ticks;

  ClusterResult res;
  res.run = run(builder, ec);
  res.events = *events;

  std::uint64_t seq = res.run.trace.events.size();
  for (const auto& e : res.events) {
    nlohmann::ordered_json j;
    j["seq"] = seq++;
    j["kind"] = to_string(e.kind);
    j["node"] = e.node;
    j["term"] = e.term;
    res.run.trace.annotations.push_back(j.dump());
  }
  return res;
}

ClusterResult run_cluster(int nodes, std::uint64_t seed, std::uint64_t max_ticks) {
  ClusterConfig cfg;
  cfg.nodes = nodes;
  cfg.seed = seed;
  cfg.max_ticks = max_ticks;
  return run_cluster(cfg);
}

bool check_election_safety(const std::vector<RaftEvent>& events) {
  std::map<std::int64_t, std::set<int>> leaders;
  for (const auto& e : events) {
    if (e.kind == RaftEvent::Kind::LeaderElected) {
      auto& s = leaders[e.term];
      s.insert(e.node);
      if (s.size() > 1) return false;
    }
  }
  return true;
}

bool check_election_safety(const ClusterResult& r) {
  return check_election_safety(r.events);
}

bool check_leader_emerges(const std::vector<RaftEvent>& events) {
  for (const auto& e : events)
    if (e.kind == RaftEvent::Kind::LeaderElected) return true;
  return false;
}

bool check_leader_emerges(const ClusterResult& r) {
  return check_leader_emerges(r.events);
}

}  // namespace chansel::raft
