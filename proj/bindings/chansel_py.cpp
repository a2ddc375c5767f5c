#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "chansel/examples.hpp"
#include "chansel/raft.hpp"
#include "chansel/sexpr.hpp"

namespace py = pybind11;

namespace {

using namespace chansel;

EngineKind engine_from(const std::string& name) {
  if (name == "naive") return EngineKind::Naive;
  if (name == "executor") return EngineKind::Executor;
  if (name == "sim") return EngineKind::Sim;
  throw py::value_error("engine must be one of sim|executor|naive");
}

py::list diags_to_py(const std::vector<Diagnostic>& ds) {
  py::list out;
  for (const auto& d : ds) {
    py::dict e;
    e["kind"] = to_string(d.kind);
    e["severity"] = d.severity == Severity::Error ? "error" : "warning";
    e["path"] = d.path;
    e["type_path"] = d.type_path;
    e["message"] = d.message;
    out.append(e);
  }
  return out;
}

py::dict run_to_py(const RunResult& res) {
  py::dict out;
  out["trace"] = res.trace.to_jsonl();
  out["events"] = res.trace.events.size();
  out["faults"] = res.trace.count(EventKind::Fault);
  out["trace_hash"] = res.trace.hash();
  py::list queued;
  for (const auto& [chan, values] : res.leftovers) {
    py::dict q;
    q["chan"] = chan.value;
    q["messages"] = values.size();
    queued.append(q);
  }
  out["queued"] = queued;
  return out;
}

py::list check_fixture(const std::string& name) {
  auto f = examples::make_fixture(name);
  return diags_to_py(check(f.proc, f.type, f.env));
}

std::string fixture_type(const std::string& name) {
  return print_type(examples::make_fixture(name).type);
}

std::string canonical_type(const std::string& text) {
  try {
    return print_type(parse_type(text));
  } catch (const ParseError& e) {
    throw py::value_error(e.what());
  }
}

py::list well_formed_text(const std::string& text) {
  try {
    return diags_to_py(well_formed(parse_type(text)));
  } catch (const ParseError& e) {
    throw py::value_error(e.what());
  }
}

py::dict run_example(const std::string& name, const std::string& engine,
                     std::uint64_t seed, std::uint64_t max_steps) {
  ProgramBuilder builder;
  if (name == "travel-agency") {
    builder = [seed](Registry& reg) {
      return examples::travel_agency_world(reg, seed);
    };
  } else if (name == "auction-house") {
    builder = [](Registry& reg) {
      return examples::auction_world(reg, 3, 2, Duration{50});
    };
  } else if (name == "timer") {
    builder = [](Registry& reg) {
      return examples::timer_world(reg, Duration{150});
    };
  } else {
    throw py::value_error("unknown example: " + name);
  }
  EngineConfig cfg;
  cfg.engine = engine_from(engine);
  cfg.seed = seed;
  cfg.max_steps = max_steps;
  RunResult res;
  {
    py::gil_scoped_release release;
    res = run(builder, cfg);
  }
  return run_to_py(res);
}

py::dict run_raft(int nodes, std::uint64_t seed, std::uint64_t max_ticks,
                  const std::string& engine, std::uint64_t max_steps) {
  raft::ClusterConfig cfg;
  cfg.nodes = nodes;
  cfg.seed = seed;
  cfg.max_ticks = max_ticks;
  cfg.engine = engine_from(engine);
  cfg.max_steps = max_steps;
  raft::ClusterResult res;
  {
    py::gil_scoped_release release;
    res = raft::run_cluster(cfg);
  }
  py::dict out = run_to_py(res.run);
  out["safe"] = raft::check_election_safety(res);
  out["leader_elected"] = raft::check_leader_emerges(res);
  py::list events;
  for (const auto& e : res.events) {
    py::dict ev;
    switch (e.kind) {
      case raft::RaftEvent::Kind::BecameFollower: ev["kind"] = "BecameFollower"; break;
      case raft::RaftEvent::Kind::BecameCandidate: ev["kind"] = "BecameCandidate"; break;
      case raft::RaftEvent::Kind::VoteGranted: ev["kind"] = "VoteGranted"; break;
      case raft::RaftEvent::Kind::LeaderElected: ev["kind"] = "LeaderElected"; break;
    }
    ev["node"] = e.node;
    ev["term"] = e.term;
    events.append(ev);
  }
  out["election_events"] = events;
  return out;
}

std::vector<std::size_t> poll_order(std::size_t n, std::uint64_t seed,
                                    std::uint64_t round) {
  return naive_poll_order(n, seed, round);
}

}  // namespace

PYBIND11_MODULE(_chansel, m) {
  m.doc() = "typed message-passing processes: protocol checking and execution";

  m.def("list_examples", [] {
    return std::vector<std::string>{"travel-agency", "auction-house", "timer"};
  });
  m.def("list_fixtures", [] { return examples::fixture_names(); });
  m.def("check_fixture", &check_fixture, py::arg("name"),
        "conformance diagnostics for a named fixture (empty = conforms)");
  m.def("fixture_type", &fixture_type, py::arg("name"),
        "canonical serialized protocol type of a fixture");
  m.def("canonical_type", &canonical_type, py::arg("text"),
        "parse a serialized type and print it canonically");
  m.def("well_formed", &well_formed_text, py::arg("text"),
        "well-formedness diagnostics for a serialized type");
  m.def("run_example", &run_example, py::arg("name"), py::arg("engine") = "sim",
        py::arg("seed") = 0, py::arg("max_steps") = 1'000'000,
        "run a bundled example; returns the trace and run stats");
  m.def("run_raft", &run_raft, py::arg("nodes") = 3, py::arg("seed") = 0,
        py::arg("max_ticks") = 15000, py::arg("engine") = "sim",
        py::arg("max_steps") = 1'000'000,
        "run a leader-election cluster; returns safety/liveness verdicts");
  m.def("poll_order", &poll_order, py::arg("n"), py::arg("seed"),
        py::arg("round"), "the naive engine's shuffled probe order");
}
