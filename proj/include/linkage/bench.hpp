#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "linkage/core.hpp"
#include "linkage/generator.hpp"
#include "linkage/solver.hpp"

namespace linkage::bench {

/// Mechanisms sharing one topology, simulated together by the batch kernel.
struct TopologyGroup {
  Mechanism topology;
  std::vector<PlanStep> steps;
  std::vector<Vec2> positions;  // B×n row-major
  std::size_t count = 0;
};

inline std::vector<TopologyGroup> group_by_topology(std::span<const Mechanism> mechanisms) {
  std::map<std::pair<std::vector<std::uint8_t>, std::vector<JointType>>, std::size_t> index;
  std::vector<TopologyGroup> groups;
  for (const auto& m : mechanisms) {
    auto key = std::make_pair(std::vector<std::uint8_t>(m.adjacency().begin(), m.adjacency().end()),
                              std::vector<JointType>(m.types().begin(), m.types().end()));
    auto [it, fresh] = index.emplace(std::move(key), groups.size());
    if (fresh) groups.push_back({m, compile_order(m), {}, 0});
    auto& g = groups[it->second];
    g.positions.insert(g.positions.end(), m.positions().begin(), m.positions().end());
    ++g.count;
  }
  return groups;
}

struct Timing {
  std::string method;
  std::vector<double> seconds;
  std::size_t ok = 0;  // non-locking outcomes in the last repetition

  double mean() const {
    double s = 0;
    for (double x : seconds) s += x;
    return seconds.empty() ? 0.0 : s / static_cast<double>(seconds.size());
  }
  double stddev() const {
    if (seconds.size() < 2) return 0.0;
    const double m = mean();
    double s = 0;
    for (double x : seconds) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(seconds.size() - 1));
  }
};

template <typename F>
double time_seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Per-mechanism reference solver that redoes the neighbour search each step.
inline std::size_t run_scalar(std::span<const Mechanism> mechanisms, std::size_t T) {
  std::size_t ok = 0;
  for (const auto& m : mechanisms) ok += simulate_naive(m, T).ok();
  return ok;
}

/// Per-mechanism solver with a compiled plan, for reference.
inline std::size_t run_scalar_plan(std::span<const Mechanism> mechanisms, std::size_t T) {
  std::size_t ok = 0;
  for (const auto& m : mechanisms) ok += simulate(m, compile_plan(m), T).ok();
  return ok;
}

/// Batch kernel over topology groups, split across `threads` workers.
inline std::size_t run_batch(std::span<const TopologyGroup> groups, std::size_t T,
                             std::size_t threads) {
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> ok{0};
  auto worker = [&] {
    std::size_t local = 0;
    for (std::size_t g = next.fetch_add(1); g < groups.size(); g = next.fetch_add(1)) {
      BatchSimulator sim(groups[g].topology.size(), groups[g].steps);
      sim.stream(groups[g].positions, T, [&](std::size_t, SimOutcome&& o) { local += o.ok(); });
    }
    ok += local;
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return ok.load();
}

struct BenchConfig {
  std::size_t repetitions = 10;
  std::size_t steps = kHighFidelitySteps;
  std::size_t threads = 1;
  bool include_plan_scalar = true;
};

/// Timing table: scalar reference, vectorized batch on one thread, and the
/// batch kernel on `threads` workers. Plan compilation for the batch rows is
/// part of the timed region.
inline std::vector<Timing> run(std::span<const Mechanism> mechanisms, const BenchConfig& cfg) {
  Timing scalar{"Single Thread Non-Vectorized Solver", {}, 0};
  Timing plan{"Single Thread Plan-Reuse Solver (reference)", {}, 0};
  Timing vec{"Single Thread Vectorized Solver", {}, 0};
  Timing par{"Parallelized Approach (" + std::to_string(cfg.threads) + " Threads)", {}, 0};
  for (std::size_t r = 0; r < cfg.repetitions; ++r) {
    scalar.seconds.push_back(time_seconds([&] { scalar.ok = run_scalar(mechanisms, cfg.steps); }));
    if (cfg.include_plan_scalar)
      plan.seconds.push_back(time_seconds([&] { plan.ok = run_scalar_plan(mechanisms, cfg.steps); }));
    vec.seconds.push_back(time_seconds([&] {
      const auto groups = group_by_topology(mechanisms);
      vec.ok = run_batch(groups, cfg.steps, 1);
    }));
    par.seconds.push_back(time_seconds([&] {
      const auto groups = group_by_topology(mechanisms);
      par.ok = run_batch(groups, cfg.steps, cfg.threads);
    }));
  }
  std::vector<Timing> out{scalar};
  if (cfg.include_plan_scalar) out.push_back(plan);
  out.push_back(vec);
  out.push_back(par);
  return out;
}

/// Bench workload: freshly generated valid mechanisms, `variants` per topology.
inline std::vector<Mechanism> generate_workload(std::size_t count, std::size_t n_min,
                                                std::size_t n_max, std::size_t variants,
                                                std::uint64_t seed, std::size_t workers = 1) {
  GenerationConfig cfg;
  cfg.count = count;
  cfg.n_min = n_min;
  cfg.n_max = n_max;
  cfg.seed = seed;
  cfg.variants_per_topology = variants;
  cfg.workers = std::max<std::size_t>(workers, 1);
  std::vector<Mechanism> mechs;
  DatasetSink sink;
  sink.on_mechanism = [&](const GeneratedMechanism& g) {
    if (mechs.size() < count) mechs.push_back(g.mechanism);
  };
  generate_dataset(cfg, sink);
  return mechs;
}

/// Physical cores from the sysfs topology, falling back to the hardware
/// thread count.
inline std::size_t physical_cores() {
  namespace fs = std::filesystem;
  std::set<std::pair<std::string, std::string>> cores;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator("/sys/devices/system/cpu", ec)) {
    const std::string name = e.path().filename().string();
    if (name.size() < 4 || name.rfind("cpu", 0) != 0 ||
        !std::all_of(name.begin() + 3, name.end(), [](char c) { return c >= '0' && c <= '9'; }))
      continue;
    std::ifstream pkg(e.path() / "topology/physical_package_id"), core(e.path() / "topology/core_id");
    std::string p, c;
    if (pkg >> p && core >> c) cores.emplace(p, c);
  }
  if (!cores.empty()) return cores.size();
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace linkage::bench
