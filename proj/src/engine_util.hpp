#pragma once

#include <map>
#include <memory>
#include <optional>

#include "chansel/channel.hpp"
#include "chansel/process.hpp"
#include "chansel/runtime.hpp"

// Shared plumbing for the three engines.

namespace chansel::detail {

struct ProcState {
  std::uint64_t pid = 0;
  LoopEnv loop_env;
  std::map<std::string, ChanRefV> params;
  std::uint32_t waiter_seq = 0;
};
using ProcStatePtr = std::shared_ptr<ProcState>;

// Waiter ids are per-process counters so that deterministic programs get
// the same ids under every engine.
inline std::uint64_t next_waiter_id(ProcState& ps) {
  return (ps.pid << 20) | ps.waiter_seq++;
}

inline std::optional<ChanRefV> resolve_chan(const ChanExprRef& r,
                                            const ProcState& ps) {
  if (const auto* c = std::get_if<ChanRefV>(&r)) return *c;
  auto it = ps.params.find(std::get<std::string>(r));
  if (it == ps.params.end()) return std::nullopt;
  return it->second;
}

// Builds the waiter for a parked receive. The continuation gets the raw
// received value.
inline WaiterPtr make_recv_waiter(ProcState& ps, const RecvP& recv,
                                  ChanRefV chan) {
  auto w = std::make_shared<Waiter>();
  w->id = next_waiter_id(ps);
  w->kind = Waiter::Kind::Recv;
  w->channels = {chan.id};
  w->accepts = [](ChannelId, const Value&) { return true; };
  RecvCont cont = recv.cont;
  w->continuation_dispatch = [cont](ChannelId, const Value& v) { return cont(v); };
  return w;
}

// Builds the waiter for a parked branch. Case selection is first-match on
// the label plus the case's runtime tag test; the chosen continuation gets
// the unwrapped payload.
inline WaiterPtr make_branch_waiter(ProcState& ps, const BranchP& branch,
                                    std::vector<ChannelId> chans) {
  auto w = std::make_shared<Waiter>();
  w->id = next_waiter_id(ps);
  w->kind = Waiter::Kind::Branch;
  w->channels = std::move(chans);
  auto cases = std::make_shared<std::vector<MatchCase>>(branch.cases);
  w->accepts = [cases](ChannelId, const Value& v) {
    return pick_case(*cases, v).has_value();
  };
  w->continuation_dispatch = [cases](ChannelId, const Value& v) -> ProcPtr {
    auto sel = pick_case(*cases, v);
    return sel ? (*cases)[sel->index].continuation(sel->payload) : end_p();
  };
  w->select_index = [cases](const Value& v) -> std::optional<std::uint32_t> {
    auto sel = pick_case(*cases, v);
    if (!sel) return std::nullopt;
    return static_cast<std::uint32_t>(sel->index);
  };
  return w;
}

RunResult run_sim_engine(const ProgramBuilder& builder, const EngineConfig& cfg);
RunResult run_executor_engine(const ProgramBuilder& builder,
                              const EngineConfig& cfg);
RunResult run_naive_engine(const ProgramBuilder& builder,
                           const EngineConfig& cfg);

}  // namespace chansel::detail
