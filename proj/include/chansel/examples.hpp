#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chansel/conformance.hpp"
#include "chansel/runtime.hpp"

// Worked examples: a travel agency (single-channel branch), an auction
// house (multi-channel branch under a timeout) and the resettable timer.
// Each comes as a conformance fixture (symbolic channels + protocol type)
// and as a runnable world for the engines.

namespace chansel::examples {

inline const Label kAccept = "Accept";
inline const Label kReject = "Reject";
inline const Label kBid = "Bid";
inline const Label kCloseAuction = "CloseAuction";
inline const Label kMsg = "Msg";

// --- conformance fixtures ----------------------------------------------

struct CheckFixture {
  std::string name;
  TypePtr type;
  ConformanceEnv env;
  ProcPtr proc;
  // Scratch state (registries, node state) the process closures point into.
  std::vector<std::shared_ptr<void>> keepalive;
};

// Known names: travel-agency, travel-agency-faulty, auction-house, timer,
// raft-follower, raft-candidate, raft-leader.
std::vector<std::string> fixture_names();
CheckFixture make_fixture(const std::string& name);  // throws std::out_of_range

// The agency protocol: receive Accept/Reject, send a ticket exactly in
// the Accept case. The faulty variant sends a ticket after Reject too.
TypePtr travel_agency_type();
ProcPtr travel_agency_proc(ChanExprRef decision_chan, ChanExprRef ticket_chan,
                           bool faulty = false);

// The auction protocol: accept bids and a close instruction on separate
// channels; on a quiet spell, fall through to the price-drop handler.
// rounds bounds how many quiet spells a runnable auction tolerates before
// giving up (the conformance fixture uses the unbounded variant).
TypePtr auction_house_type();
ProcPtr auction_house_proc(ChanExprRef bid_chan, ChanExprRef close_chan,
                           Duration quiet, std::optional<int> rounds);

// Sleep helper: park on a channel nobody sends to and fall through after
// d.
ProcPtr after_delay(ChanExprRef idle_chan, Duration d, Thunk cont);

// --- runnable worlds ----------------------------------------------------

// Agency composed with a client that accepts iff the seed is even, then
// awaits its ticket.
ProcPtr travel_agency_world(Registry& reg, std::uint64_t seed);

// Auction with one bidder sending `early` bids up front and a closer that
// closes immediately; `late` bids are sent after a delay longer than the
// auction can stay open.
ProcPtr auction_world(Registry& reg, int early, int late, Duration quiet);

// Auction alone with no bidders: every round times out.
ProcPtr auction_quiet_world(Registry& reg, int rounds, Duration quiet);

// Timer with a driver: reset, wait 40 ticks, reset again, then await the
// expiry. The timer must fire exactly once, timed from the second reset.
ProcPtr timer_world(Registry& reg, Duration duration);

// Exactly-once stress: a looping branch over `channels` channels with a
// short timeout, fed by racing senders.
struct StressSpec {
  std::size_t channels = 8;
  std::size_t senders = 8;
  std::size_t per_sender = 100;   // messages per sender
  std::size_t iterations = 1000;  // branch resolutions before the loop ends
  Duration timeout{1};
};
ProcPtr stress_world(Registry& reg, const StressSpec& spec);

}  // namespace chansel::examples
