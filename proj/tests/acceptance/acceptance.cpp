// Acceptance suite: one check per release criterion, each printed as a
// single PASS/FAIL line with its runtime. Exits non-zero if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chansel/examples.hpp"
#include "chansel/raft.hpp"
#include "chansel/sexpr.hpp"

using namespace chansel;

namespace {

struct Ctx {
  std::vector<RunResult> stress_runs;  // shared between criteria 3 and 4
};

// --- helpers ---------------------------------------------------------------

std::vector<Diagnostic> errors_only(const std::vector<Diagnostic>& ds) {
  std::vector<Diagnostic> out;
  for (const auto& d : ds)
    if (d.severity == Severity::Error) out.push_back(d);
  return out;
}

void collect_branches(const TypePtr& t, std::vector<BranchT>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, BranchT>) {
          out.push_back(n);
          for (const auto& c : n.cases) {
            collect_branches(c.arg, out);
            collect_branches(c.cont, out);
          }
        } else if constexpr (std::is_same_v<T, ChanT>) {
          collect_branches(n.payload, out);
        } else if constexpr (std::is_same_v<T, LabelledT>) {
          collect_branches(n.inner, out);
        } else if constexpr (std::is_same_v<T, UnionT> ||
                             std::is_same_v<T, TupleT>) {
          for (const auto& m : n.members) collect_branches(m, out);
        } else if constexpr (std::is_same_v<T, OutT>) {
          collect_branches(n.payload, out);
          collect_branches(n.cont, out);
        } else if constexpr (std::is_same_v<T, InT>) {
          collect_branches(n.payload, out);
          collect_branches(n.cont, out);
        } else if constexpr (std::is_same_v<T, TimeoutT>) {
          collect_branches(n.inner, out);
          collect_branches(n.handler, out);
        } else if constexpr (std::is_same_v<T, ParT>) {
          collect_branches(n.left, out);
          collect_branches(n.right, out);
        } else if constexpr (std::is_same_v<T, RecT>) {
          collect_branches(n.body, out);
        }
      },
      t->node);
}

using Multiset = std::map<std::pair<std::uint64_t, std::string>, long>;

Multiset sends_of(const Trace& t) {
  Multiset m;
  for (const auto& ev : t.events)
    if (ev.kind == EventKind::Send)
      m[{ev.chan->value, ev.label.value_or("")}]++;
  return m;
}

Multiset delivers_of(const Trace& t) {
  Multiset m;
  for (const auto& ev : t.events)
    if (ev.kind == EventKind::Deliver)
      m[{ev.chan->value, ev.label.value_or("")}]++;
  return m;
}

Multiset leftovers_of(const Registry::QueueSnapshot& snap) {
  Multiset m;
  for (const auto& [chan, values] : snap)
    for (const auto& v : values)
      m[{chan.value, top_label(v).value_or("")}]++;
  return m;
}

// --- criteria ----------------------------------------------------------------

bool conformance_fidelity(Ctx&, std::string& detail) {
  auto good = examples::make_fixture("travel-agency");
  auto good_ds = check(good.proc, good.type, good.env);
  if (!good_ds.empty()) {
    detail = "good agency produced diagnostics";
    return false;
  }
  auto bad = examples::make_fixture("travel-agency-faulty");
  auto bad_ds = errors_only(check(bad.proc, bad.type, bad.env));
  if (bad_ds.empty()) {
    detail = "mutant passed";
    return false;
  }
  if (bad_ds[0].path.find("case[1]") == std::string::npos) {
    detail = "diagnostic not at the Reject continuation: " + bad_ds[0].path;
    return false;
  }
  return true;
}

bool branch_validity(Ctx&, std::string& detail) {
  int branches = 0, deletions = 0, duplications = 0;
  for (const auto& name : examples::fixture_names()) {
    auto f = examples::make_fixture(name);
    std::vector<BranchT> all;
    collect_branches(f.type, all);
    std::set<std::string> seen;
    for (const auto& b : all) {
      std::vector<TypeRef> chans = b.chans;
      if (!seen.insert(print_type(branch_t(chans, b.cases))).second) continue;
      ++branches;
      const TypeEnv& env = f.env.channel_bindings;
      if (!branch_type_valid(b, env).empty()) {
        detail = name + ": fixture branch is not valid as written";
        return false;
      }
      // Deleting any single case uncovers exactly that label.
      for (std::size_t i = 0; i < b.cases.size(); ++i) {
        BranchT mutant = b;
        Label dropped = mutant.cases[i].label;
        mutant.cases.erase(mutant.cases.begin() + static_cast<std::ptrdiff_t>(i));
        auto ds = branch_type_valid(mutant, env);
        if (ds.size() != 1 || ds[0].kind != DiagKind::UncoveredLabel ||
            ds[0].message.find(dropped) == std::string::npos) {
          detail = name + ": deleting " + dropped +
                   " did not yield exactly UncoveredLabel(" + dropped + ")";
          return false;
        }
        ++deletions;
      }
      // Duplicating any label is flagged.
      for (std::size_t i = 0; i < b.cases.size(); ++i) {
        BranchT mutant = b;
        mutant.cases.push_back(mutant.cases[i]);
        auto ds = branch_type_valid(mutant, env);
        if (ds.size() != 1 || ds[0].kind != DiagKind::DuplicateLabel) {
          detail = name + ": duplicating " + b.cases[i].label +
                   " did not yield exactly DuplicateLabel";
          return false;
        }
        ++duplications;
      }
      // A non-input channel cannot anchor the same branch as a process.
      try {
        std::vector<MatchCase> cases;
        for (const auto& c : b.cases)
          cases.push_back(
              {c.label, c.arg, [](const Value&) { return end_p(); }});
        (void)mk_branch({ChanExprRef{ChanRefV{ChannelId{1}, Capability::Output}}},
                        std::move(cases));
        detail = name + ": output channel accepted by a branch";
        return false;
      } catch (const ConstructionError& e) {
        if (e.kind != ConstructionError::Kind::NotInputChannel) {
          detail = name + ": wrong construction error";
          return false;
        }
      }
    }
  }
  std::ostringstream os;
  os << branches << " branches, " << deletions << " deletions, "
     << duplications << " duplications";
  detail = os.str();
  return branches >= 5;
}

bool exactly_once(Ctx& ctx, std::string& detail) {
  examples::StressSpec spec;  // 8 channels, 8 senders, 1000 iterations
  long checked = 0;
  auto verify = [&](const RunResult& res, const std::string& what) -> bool {
    if (res.faulted()) {
      detail = what + ": faulted";
      return false;
    }
    for (const auto& w : res.waiters) {
      ++checked;
      if (w.final_state == WaiterState::Resolved && w.dispatches != 1) {
        detail = what + ": waiter dispatched " + std::to_string(w.dispatches) +
                 " times";
        return false;
      }
      if (w.final_state == WaiterState::Pending && w.dispatches != 0) {
        detail = what + ": pending waiter dispatched";
        return false;
      }
      if (w.final_state == WaiterState::Claiming) {
        detail = what + ": waiter stuck claiming";
        return false;
      }
    }
    return true;
  };

  for (unsigned workers : {1u, 4u, 16u}) {
    EngineConfig cfg;
    cfg.engine = EngineKind::Executor;
    cfg.workers = workers;
    cfg.seed = workers;
    auto res = run(
        [&spec](Registry& reg) { return examples::stress_world(reg, spec); },
        cfg);
    if (!verify(res, "executor/" + std::to_string(workers))) return false;
    ctx.stress_runs.push_back(std::move(res));
  }
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto res = run_sim(
        [&spec](Registry& reg) { return examples::stress_world(reg, spec); },
        seed);
    if (!verify(res, "sim/" + std::to_string(seed))) return false;
    if (seed < 10) ctx.stress_runs.push_back(std::move(res));
  }
  detail = std::to_string(checked) + " waiters checked";
  return true;
}

bool no_message_loss(Ctx& ctx, std::string& detail) {
  if (ctx.stress_runs.empty()) {
    detail = "no stress runs recorded";
    return false;
  }
  for (const auto& res : ctx.stress_runs) {
    Multiset sends = sends_of(res.trace);
    Multiset delivered = delivers_of(res.trace);
    Multiset queued = leftovers_of(res.leftovers);
    for (const auto& [key, n] : sends) {
      if (delivered[key] + queued[key] != n) {
        detail = "chan " + std::to_string(key.first) + " label " + key.second +
                 ": " + std::to_string(n) + " sent, " +
                 std::to_string(delivered[key]) + " delivered, " +
                 std::to_string(queued[key]) + " queued";
        return false;
      }
    }
  }
  detail = std::to_string(ctx.stress_runs.size()) + " runs balanced";
  return true;
}

bool auction_semantics(Ctx&, std::string& detail) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto res = run_sim(
        [](Registry& reg) {
          return examples::auction_world(reg, 3, 2, Duration{50});
        },
        seed);
    if (res.faulted()) {
      detail = "auction run faulted at seed " + std::to_string(seed);
      return false;
    }
    std::uint64_t close_seq = 0;
    bool closed = false;
    for (const auto& ev : res.trace.events) {
      if (ev.kind == EventKind::BranchTaken &&
          ev.label == examples::kCloseAuction) {
        close_seq = ev.seq;
        closed = true;
      }
    }
    if (!closed) {
      detail = "auction never closed at seed " + std::to_string(seed);
      return false;
    }
    long bid_sends = 0, bid_delivers = 0;
    for (const auto& ev : res.trace.events) {
      if (ev.label != examples::kBid) continue;
      if (ev.kind == EventKind::Send) ++bid_sends;
      if (ev.kind == EventKind::Deliver) {
        ++bid_delivers;
        if (ev.seq > close_seq) {
          detail = "bid delivered after close at seed " + std::to_string(seed);
          return false;
        }
      }
    }
    long queued = 0;
    for (const auto& [chan, values] : res.leftovers)
      for (const auto& v : values)
        if (top_label(v) == examples::kBid) ++queued;
    if (bid_sends != bid_delivers + queued) {
      detail = "bids unaccounted at seed " + std::to_string(seed);
      return false;
    }
  }
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto res = run_sim(
        [](Registry& reg) {
          return examples::auction_quiet_world(reg, 2, Duration{50});
        },
        seed);
    if (res.trace.count(EventKind::TimeoutFired) == 0) {
      detail = "no timeout in quiet auction at seed " + std::to_string(seed);
      return false;
    }
  }
  return true;
}

bool timer_semantics(Ctx&, std::string& detail) {
  auto expiry_times = [](const RunResult& res) {
    std::vector<std::uint64_t> out;
    for (const auto& ev : res.trace.events)
      if (ev.kind == EventKind::Send && ev.label == raft::kTimerExpired)
        out.push_back(ev.time);
    return out;
  };

  // Reset then silence: exactly one expiry, at reset + duration.
  auto single = run_sim(
      [](Registry& reg) {
        ChannelId r = reg.create_channel();
        ChannelId t = reg.create_channel();
        ProcPtr timer = raft::timer_process(
            ChanExprRef{ChanRefV{r, Capability::InputOutput}},
            ChanExprRef{ChanRefV{t, Capability::Output}}, Duration{150});
        ChanExprRef tin{ChanRefV{t, Capability::InputOutput}};
        ProcPtr driver =
            send_p(ChanExprRef{ChanRefV{r, Capability::Output}},
                   raft::timer_reset_msg(), [tin] {
                     return recv_p(tin, [](const Value&) { return end_p(); });
                   });
        return par_p(timer, driver);
      },
      0);
  auto times1 = expiry_times(single);
  if (times1.size() != 1 || times1[0] != 150) {
    detail = "reset-silence: expected one expiry at 150";
    return false;
  }

  // Reset, reset within the window, silence: one expiry timed from the
  // second reset (tick 40).
  auto twice = run_sim(
      [](Registry& reg) { return examples::timer_world(reg, Duration{150}); },
      0);
  auto times2 = expiry_times(twice);
  if (times2.size() != 1 || times2[0] != 190) {
    detail = "reset-reset-silence: expected one expiry at 190";
    return false;
  }

  // No reset at all: the timer never fires.
  auto quiet = run_sim(
      [](Registry& reg) {
        ChannelId r = reg.create_channel();
        ChannelId t = reg.create_channel();
        return raft::timer_process(
            ChanExprRef{ChanRefV{r, Capability::InputOutput}},
            ChanExprRef{ChanRefV{t, Capability::Output}}, Duration{150});
      },
      0);
  if (!expiry_times(quiet).empty() ||
      quiet.trace.count(EventKind::TimeoutFired) != 0) {
    detail = "timer fired without a reset";
    return false;
  }
  return true;
}

bool election_safety(Ctx&, std::string& detail) {
  const std::uint64_t max_ticks = 50 * 300;
  int safe = 0, total = 0;
  std::map<int, int> leaders;
  for (int n : {1, 3, 5}) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      auto r = raft::run_cluster(n, seed, max_ticks);
      ++total;
      if (raft::check_election_safety(r)) ++safe;
      if (raft::check_leader_emerges(r)) ++leaders[n];
    }
  }
  std::ostringstream os;
  os << "safe " << safe << "/" << total << ", leaders n1=" << leaders[1]
     << " n3=" << leaders[3] << " n5=" << leaders[5];
  detail = os.str();
  return safe == total && leaders[3] >= 99 && leaders[5] >= 99;
}

bool determinism(Ctx&, std::string& detail) {
  using Scenario = std::function<std::string()>;
  std::vector<std::pair<std::string, Scenario>> scenarios = {
      {"travel-agency",
       [] {
         return run_sim(
                    [](Registry& reg) {
                      return examples::travel_agency_world(reg, 5);
                    },
                    5)
             .trace.to_jsonl();
       }},
      {"auction",
       [] {
         return run_sim(
                    [](Registry& reg) {
                      return examples::auction_world(reg, 3, 2, Duration{50});
                    },
                    9)
             .trace.to_jsonl();
       }},
      {"timer",
       [] {
         return run_sim(
                    [](Registry& reg) {
                      return examples::timer_world(reg, Duration{150});
                    },
                    1)
             .trace.to_jsonl();
       }},
      {"stress",
       [] {
         examples::StressSpec spec;
         spec.per_sender = 20;
         spec.iterations = 170;
         return run_sim(
                    [&spec](Registry& reg) {
                      return examples::stress_world(reg, spec);
                    },
                    3)
             .trace.to_jsonl();
       }},
      {"raft",
       [] { return raft::run_cluster(3, 2, 15000).run.trace.to_jsonl(); }},
  };
  for (const auto& [name, fn] : scenarios) {
    std::string first = fn();
    for (int rep = 1; rep < 20; ++rep) {
      if (fn() != first) {
        detail = name + ": repeat " + std::to_string(rep) + " differs";
        return false;
      }
    }
  }
  return true;
}

bool engine_agreement(Ctx&, std::string& detail) {
  struct World {
    std::string name;
    ProgramBuilder builder;
  };
  std::vector<World> worlds = {
      {"travel-agency",
       [](Registry& reg) { return examples::travel_agency_world(reg, 0); }},
      {"travel-agency-reject",
       [](Registry& reg) { return examples::travel_agency_world(reg, 1); }},
      {"timer",
       [](Registry& reg) { return examples::timer_world(reg, Duration{150}); }},
  };
  for (const auto& w : worlds) {
    std::vector<std::vector<std::string>> sets;
    for (auto kind : {EngineKind::Sim, EngineKind::Executor, EngineKind::Naive}) {
      EngineConfig cfg;
      cfg.engine = kind;
      cfg.workers = 4;
      auto res = run(w.builder, cfg);
      if (res.faulted()) {
        detail = w.name + ": faulted";
        return false;
      }
      sets.push_back(res.trace.normalized_multiset());
    }
    if (sets[0] != sets[1] || sets[0] != sets[2]) {
      detail = w.name + ": event multisets differ across engines";
      return false;
    }
  }
  return true;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<bool(Ctx&, std::string&)> fn;
  };
  std::vector<Criterion> criteria = {
      {"conformance-fidelity", conformance_fidelity},
      {"branch-validity", branch_validity},
      {"exactly-once-under-races", exactly_once},
      {"no-message-loss", no_message_loss},
      {"auction-semantics", auction_semantics},
      {"timer-semantics", timer_semantics},
      {"raft-election-safety", election_safety},
      {"sim-determinism", determinism},
      {"engine-agreement", engine_agreement},
  };

  Ctx ctx;
  bool all_ok = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    std::string detail;
    try {
      ok = criteria[i].fn(ctx, detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    std::printf("%s criterion-%zu %-26s (%.2fs)%s%s\n", ok ? "PASS" : "FAIL",
                i + 1, criteria[i].name, secs, detail.empty() ? "" : " : ",
                detail.c_str());
    std::fflush(stdout);
    all_ok = all_ok && ok;
  }
  return all_ok ? 0 : 1;
}
