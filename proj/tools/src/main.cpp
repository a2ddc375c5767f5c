#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "chansel/examples.hpp"
#include "chansel/raft.hpp"
#include "chansel/sexpr.hpp"

// Command line front end: run the bundled examples under any engine,
// check fixtures against their protocol types, and drive the election
// harness. Traces go to stdout (or --trace-out) as JSON lines; the
// one-line run summary goes to stderr so traces stay pipeable.

namespace {

using namespace chansel;

int write_trace(const Trace& trace, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << trace.to_jsonl();
    return 0;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "cannot open " << path << "\n";
    return 1;
  }
  out << trace.to_jsonl();
  return 0;
}

EngineKind parse_engine(const std::string& name) {
  if (name == "naive") return EngineKind::Naive;
  if (name == "executor") return EngineKind::Executor;
  return EngineKind::Sim;
}

int cmd_run_example(const std::string& example, const std::string& engine,
                    std::uint64_t seed, std::uint64_t max_steps,
                    const std::string& trace_out) {
  ProgramBuilder builder;
  if (example == "travel-agency") {
    builder = [seed](Registry& reg) {
      return examples::travel_agency_world(reg, seed);
    };
  } else if (example == "auction-house") {
    builder = [](Registry& reg) {
      return examples::auction_world(reg, 3, 2, Duration{50});
    };
  } else if (example == "timer") {
    builder = [](Registry& reg) {
      return examples::timer_world(reg, Duration{150});
    };
  } else {
    std::cerr << "unknown example: " << example << "\n";
    return 2;
  }

  EngineConfig cfg;
  cfg.engine = parse_engine(engine);
  cfg.seed = seed;
  cfg.max_steps = max_steps;
  RunResult res = run(builder, cfg);

  int rc = write_trace(res.trace, trace_out);
  if (rc) return rc;
  std::size_t faults = res.trace.count(EventKind::Fault);
  std::cerr << "events=" << res.trace.events.size() << " faults=" << faults
            << " queued=" << res.leftovers.size()
            << " outcome=" << (faults ? "fault" : "ok") << "\n";
  return faults ? 1 : 0;
}

void print_diags(const std::vector<Diagnostic>& ds) {
  for (const auto& d : ds) {
    std::cout << (d.path.empty() ? "/" : d.path) << "  " << to_string(d.kind)
              << "  " << d.message << "\n";
  }
}

int cmd_check(const std::string& fixture, bool print_type_only,
              const std::string& type_file) {
  if (!type_file.empty()) {
    std::ifstream in(type_file);
    if (!in) {
      std::cerr << "cannot open " << type_file << "\n";
      return 2;
    }
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    TypePtr t;
    try {
      t = parse_type(text);
    } catch (const ParseError& e) {
      std::cout << "/  ParseError  " << e.what() << "\n";
      return 1;
    }
    if (print_type_only) {
      std::cout << print_type(t) << "\n";
      return 0;
    }
    auto ds = well_formed(t);
    print_diags(ds);
    return ds.empty() ? 0 : 1;
  }

  examples::CheckFixture f;
  try {
    f = examples::make_fixture(fixture);
  } catch (const std::out_of_range& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  if (print_type_only) {
    std::cout << print_type(f.type) << "\n";
    return 0;
  }
  auto ds = check(f.proc, f.type, f.env);
  print_diags(ds);
  return ds.empty() ? 0 : 1;
}

int cmd_raft(int nodes, std::uint64_t seed, std::uint64_t max_ticks,
             const std::string& engine, std::uint64_t max_steps,
             const std::string& trace_out) {
  raft::ClusterConfig cfg;
  cfg.nodes = nodes;
  cfg.seed = seed;
  cfg.max_ticks = max_ticks;
  cfg.engine = parse_engine(engine);
  cfg.max_steps = max_steps;
  auto res = raft::run_cluster(cfg);

  int rc = write_trace(res.run.trace, trace_out);
  if (rc) return rc;
  bool safe = raft::check_election_safety(res);
  bool led = raft::check_leader_emerges(res);
  std::size_t leaders = 0;
  for (const auto& e : res.events)
    if (e.kind == raft::RaftEvent::Kind::LeaderElected) ++leaders;
  std::cerr << "events=" << res.run.trace.events.size()
            << " elections=" << leaders
            << " safety=" << (safe ? "ok" : "VIOLATED")
            << " leader=" << (led ? "elected" : "none") << "\n";
  return (safe && led) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"typed message-passing processes: run, check, elect"};
  app.require_subcommand(1);

  std::string example, engine = "sim", trace_out;
  std::uint64_t seed = 0, max_steps = 1'000'000;
  auto* run_cmd = app.add_subcommand("run-example", "run a bundled example");
  run_cmd->add_option("example", example, "travel-agency|auction-house|timer")
      ->required();
  run_cmd->add_option("--engine", engine, "sim|executor|naive")
      ->check(CLI::IsMember({"sim", "executor", "naive"}));
  run_cmd->add_option("--seed", seed, "scheduler seed");
  run_cmd->add_option("--max-steps", max_steps, "step budget");
  run_cmd->add_option("--trace-out", trace_out, "trace file (default stdout)");

  std::string fixture, type_file;
  bool print_type_only = false;
  auto* check_cmd =
      app.add_subcommand("check", "check a fixture against its protocol type");
  check_cmd->add_option("fixture", fixture,
                        "fixture name (see --list); omit with --type-file");
  check_cmd->add_flag("--print-type", print_type_only,
                      "print the canonical protocol type and exit");
  check_cmd->add_option("--type-file", type_file,
                        "parse a serialized type and report well-formedness");
  bool list_fixtures = false;
  check_cmd->add_flag("--list", list_fixtures, "list fixture names");

  int nodes = 3;
  std::uint64_t max_ticks = 15000;
  std::string raft_engine = "sim", raft_trace_out;
  std::uint64_t raft_max_steps = 1'000'000;
  std::uint64_t raft_seed = 0;
  auto* raft_cmd = app.add_subcommand("raft", "run a leader election cluster");
  raft_cmd->add_option("--nodes", nodes, "cluster size")->check(CLI::PositiveNumber);
  raft_cmd->add_option("--seed", raft_seed, "run seed");
  raft_cmd->add_option("--max-ticks", max_ticks, "virtual-time horizon (sim)");
  raft_cmd->add_option("--engine", raft_engine, "sim|executor")
      ->check(CLI::IsMember({"sim", "executor"}));
  raft_cmd->add_option("--max-steps", raft_max_steps, "step budget");
  raft_cmd->add_option("--trace-out", raft_trace_out,
                       "trace file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  if (run_cmd->parsed())
    return cmd_run_example(example, engine, seed, max_steps, trace_out);
  if (check_cmd->parsed()) {
    if (list_fixtures) {
      for (const auto& n : chansel::examples::fixture_names())
        std::cout << n << "\n";
      return 0;
    }
    if (fixture.empty() && type_file.empty()) {
      std::cerr << "check needs a fixture name or --type-file\n";
      return 2;
    }
    return cmd_check(fixture, print_type_only, type_file);
  }
  if (raft_cmd->parsed())
    return cmd_raft(nodes, raft_seed, max_ticks, raft_engine, raft_max_steps,
                    raft_trace_out);
  return 2;
}
