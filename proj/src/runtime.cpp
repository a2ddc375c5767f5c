#include "chansel/runtime.hpp"

#include <numeric>
#include <random>

#include "engine_util.hpp"

namespace chansel {

RunResult run(const ProgramBuilder& builder, const EngineConfig& cfg) {
  switch (cfg.engine) {
    case EngineKind::Naive: return detail::run_naive_engine(builder, cfg);
    case EngineKind::Executor: return detail::run_executor_engine(builder, cfg);
    case EngineKind::Sim: return detail::run_sim_engine(builder, cfg);
  }
  return detail::run_sim_engine(builder, cfg);
}

RunResult run(const ProcPtr& p, const EngineConfig& cfg) {
  return run([p](Registry&) { return p; }, cfg);
}

RunResult run_sim(const ProgramBuilder& builder, std::uint64_t seed,
                  EngineConfig cfg) {
  cfg.engine = EngineKind::Sim;
  cfg.seed = seed;
  return run(builder, cfg);
}

std::vector<std::size_t> naive_poll_order(std::size_t n, std::uint64_t seed,
                                          std::uint64_t round) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + round + 1);
  // Fisher-Yates with a plain modulo draw; the bias is negligible for the
  // handful of channels a branch listens on.
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace chansel
