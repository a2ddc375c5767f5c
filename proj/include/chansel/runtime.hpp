#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "chansel/channel.hpp"
#include "chansel/process.hpp"
#include "chansel/trace.hpp"

// Execution engines. All three interpret the same process AST over the
// same channel layer and produce the same kind of trace:
//
//   naive    one OS thread per process, blocking waits, shuffled polling
//   executor fixed pool of cooperative workers plus a timer service
//   sim      single-threaded, virtual clock, seeded scheduler; a run is a
//            pure function of (program, seed, config)

namespace chansel {

enum class EngineKind { Naive, Executor, Sim };

struct EngineConfig {
  EngineKind engine = EngineKind::Sim;
  unsigned workers = 4;              // executor
  std::uint64_t seed = 0;            // sim scheduler, naive poll shuffle
  std::uint64_t max_steps = 1'000'000;
  Duration poll_interval{1};         // naive
  std::optional<std::uint64_t> max_ticks;  // sim: stop advancing past this
};

struct WaiterStat {
  std::uint64_t id;
  WaiterState final_state;
  int dispatches;
  int failed_claims;
};

struct RunResult {
  Trace trace;
  Registry::QueueSnapshot leftovers;  // queued messages at end of run
  std::vector<WaiterStat> waiters;
  // True if, at the end of the run, some channel still held a head message
  // a pending waiter would accept. Never expected; exposed for invariant
  // checks.
  bool eligible_pending_at_end = false;

  bool faulted() const { return trace.has_fault(); }
};

// A program is built against the run's registry so it can create and
// close over channels.
using ProgramBuilder = std::function<ProcPtr(Registry&)>;

RunResult run(const ProgramBuilder& builder, const EngineConfig& cfg);
RunResult run(const ProcPtr& p, const EngineConfig& cfg);

// Deterministic engine; identical (program, seed, cfg) give byte-identical
// traces.
RunResult run_sim(const ProgramBuilder& builder, std::uint64_t seed,
                  EngineConfig cfg = {});

// The channel probe order used by the naive engine: a permutation of
// {0..n-1} that is a pure function of (seed, round) and uniform across
// rounds.
std::vector<std::size_t> naive_poll_order(std::size_t n, std::uint64_t seed,
                                          std::uint64_t round);

namespace fault {
inline constexpr const char* kStepBudget = "StepBudget";
inline constexpr const char* kUncaughtTimeout = "UncaughtTimeout";
inline constexpr const char* kBadTimeoutInner = "BadTimeoutInner";
inline constexpr const char* kBadTimeoutDuration = "BadTimeoutDuration";
inline constexpr const char* kUnboundLoopVar = "UnboundLoopVar";
inline constexpr const char* kUnresolvedChannel = "UnresolvedChannel";
inline constexpr const char* kChannelClosed = "ChannelClosed";
inline constexpr const char* kBadCapability = "BadCapability";
inline constexpr const char* kHostError = "HostError";
}  // namespace fault

}  // namespace chansel
