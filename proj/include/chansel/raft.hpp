#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "chansel/conformance.hpp"
#include "chansel/runtime.hpp"

// Leader election on top of the process DSL: a resettable timer process,
// follower/candidate/leader behaviours, their protocol types, and a
// fixed-size cluster harness with safety and liveness checks over the
// recorded election events.

namespace chansel::raft {

// --- messages ---------------------------------------------------------

inline const Label kRequestVote = "RequestVote";
inline const Label kAppendEntries = "AppendEntries";
inline const Label kGrantVote = "GrantVote";
inline const Label kRefuseVote = "RefuseVote";
inline const Label kAckAppendEntries = "AckAppendEntries";
inline const Label kTimerReset = "TimerReset";
inline const Label kTimerExpired = "TimerExpired";

Value request_vote_msg(std::int64_t term, int candidate, ChanRefV reply);
Value append_entries_msg(std::int64_t term, int leader, ChanRefV reply);
Value grant_vote_msg(std::int64_t term);
Value refuse_vote_msg(std::int64_t term);
Value ack_append_msg(std::int64_t term);
Value timer_reset_msg();
Value timer_expired_msg();

struct Rpc {
  std::int64_t term;
  int sender;
  ChanRefV reply;
};
Rpc parse_rpc(const Value& payload);           // tuple(term, id, reply)
std::int64_t parse_term(const Value& payload); // tuple(term)

// Payload types used by the protocol types below.
TypePtr vote_response_type();   // union of GrantVote/RefuseVote messages
TypePtr ack_response_type();
TypePtr rpc_payload_type();     // tuple(int, int, chan o vote-responses)
TypePtr ae_payload_type();      // tuple(int, int, chan o acks)
TypePtr inbox_payload_type();   // union of RequestVote/AppendEntries messages

// --- timer ------------------------------------------------------------

// Resettable one-shot timer: waits untimed for the first reset, then
// keeps re-arming while resets keep coming; when a wait expires it emits
// one TimerExpired and goes back to waiting untimed (no pending timeout
// until the next reset).
ProcPtr timer_process(ChanExprRef reset, ChanExprRef timeout_chan,
                      Duration duration);

// Same shape, but the duration of each armed wait is drawn afresh; used
// by nodes to randomize election timeouts per election and to shorten the
// wait while leading.
ProcPtr timer_process_dyn(ChanExprRef reset, ChanExprRef timeout_chan,
                          std::function<Duration()> next_duration);

TypePtr timer_type(TypeRef reset, TypeRef timeout_chan);

// --- votes ------------------------------------------------------------

struct VoteState {
  std::int64_t current_term = 0;
  std::optional<std::int64_t> voted_term;  // term the last vote was cast in
  int voted_for = -1;
};

enum class VoteOutcome { Grant, Refuse };

// Grant iff the request's term is current or newer and this node has not
// yet voted for someone else in that term. Granting adopts the term and
// records the vote.
VoteOutcome vote_decision(VoteState& s, std::int64_t rv_term, int candidate);

// --- node processes ---------------------------------------------------

struct RaftEvent {
  enum class Kind { BecameFollower, BecameCandidate, VoteGranted, LeaderElected };
  Kind kind;
  int node;
  std::int64_t term;
};
using Recorder = std::function<void(const RaftEvent&)>;

struct NodeChannels {
  ChanExprRef inbox;
  std::vector<ChanExprRef> peers;  // the other nodes' inboxes
  ChanExprRef timer_reset;
  ChanExprRef timeout_chan;
};

struct NodeConfig {
  int id = 0;
  int cluster_size = 1;
  std::uint64_t election_timeout_min = 150;  // ticks
  std::uint64_t election_timeout_max = 300;
  std::uint64_t heartbeat_interval = 50;
};

// Consulted before each broadcast send: return true to drop the message
// to that peer (fault injection; peer_index addresses the peers list).
using DropHook = std::function<bool(int from, int peer_index, const Label&)>;

// Shared mutable state of one node. Continuations of a node run
// sequentially, so plain fields suffice; timer_mode is read by the
// node's timer process concurrently and stays atomic.
struct NodeRuntime {
  NodeConfig cfg;
  NodeChannels chans;
  VoteState votes;
  std::int64_t tally = 0;
  std::atomic<int> timer_mode{0};  // 0 = election timeout, 1 = heartbeat
  Registry* registry = nullptr;
  std::shared_ptr<std::map<ChannelId, TypePtr>> chan_types;  // optional
  Recorder record;   // optional
  DropHook drop;     // optional
};
using NodePtr = std::shared_ptr<NodeRuntime>;

ProcPtr node_process(NodePtr nd);  // arm the timer, start as follower
ProcPtr follower_process(NodePtr nd);
ProcPtr candidate_process(NodePtr nd);
ProcPtr leader_process(NodePtr nd);

// Duration source for a node's timer: heartbeat interval while leading,
// otherwise a fresh draw from the election timeout range.
std::function<Duration()> node_timer_durations(NodePtr nd, std::uint64_t seed);

enum class NodeRole { Follower, Candidate, Leader };

// Closed protocol type of a node entered in the given role, for a fixed
// cluster size.
TypePtr node_type(NodeRole root, int cluster_size);

// Channel bindings matching the symbolic names used by check fixtures.
ConformanceEnv node_check_env(int cluster_size);
NodeChannels node_check_channels(int cluster_size);

// --- cluster harness --------------------------------------------------

struct ClusterConfig {
  int nodes = 3;
  std::uint64_t seed = 0;
  std::uint64_t max_ticks = 15000;
  EngineKind engine = EngineKind::Sim;
  std::uint64_t election_timeout_min = 150;
  std::uint64_t election_timeout_max = 300;
  std::uint64_t heartbeat_interval = 50;  // must stay below the timeout range
  std::uint64_t max_steps = 1'000'000;
  DropHook drop;  // optional fault injection on broadcast sends
};

struct ClusterResult {
  RunResult run;
  std::vector<RaftEvent> events;
};

ClusterResult run_cluster(const ClusterConfig& cfg);
ClusterResult run_cluster(int nodes, std::uint64_t seed, std::uint64_t max_ticks);

// At most one distinct leader per term.
bool check_election_safety(const std::vector<RaftEvent>& events);
bool check_election_safety(const ClusterResult& r);
// At least one leader was elected.
bool check_leader_emerges(const std::vector<RaftEvent>& events);
bool check_leader_emerges(const ClusterResult& r);

}  // namespace chansel::raft
