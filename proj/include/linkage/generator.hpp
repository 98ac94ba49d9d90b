#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "linkage/core.hpp"
#include "linkage/random.hpp"
#include "linkage/solver.hpp"
#include "linkage/topology.hpp"

namespace linkage {

struct GenerationConfig {
  std::size_t count = 1000;
  std::size_t n_min = 8;
  std::size_t n_max = 20;
  double ground_probability = 0.25;  // N_g : N_s = 1 : 3
  std::size_t variants_per_topology = 5;
  std::size_t t_low = kLowFidelitySteps;
  std::size_t t_high = kHighFidelitySteps;
  std::size_t max_attempts = 5000;
  std::size_t topology_retries = 1000;  // fresh topologies tried per slot
  std::size_t candidate_chunk = 64;     // candidates screened per batch call
  double negative_rate = 0.002;         // failed candidates kept as negatives
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void check() const {
    if (n_min < kMinTopologyJoints)
      throw Error(ErrorCode::Constraint, "n_min must be >= " + std::to_string(kMinTopologyJoints));
    if (n_max < n_min) throw Error(ErrorCode::Constraint, "n_max must be >= n_min");
    if (variants_per_topology < 1) throw Error(ErrorCode::Constraint, "variants must be >= 1");
    if (t_low >= t_high) throw Error(ErrorCode::Constraint, "t_low must be < t_high");
    if (max_attempts < 1) throw Error(ErrorCode::Constraint, "max_attempts must be >= 1");
    if (candidate_chunk < 1) throw Error(ErrorCode::Constraint, "candidate_chunk must be >= 1");
    if (workers < 1) throw Error(ErrorCode::Constraint, "workers must be >= 1");
    if (ground_probability < 0.0 || ground_probability >= 1.0)
      throw Error(ErrorCode::Constraint, "ground probability must be in [0, 1)");
    if (negative_rate < 0.0 || negative_rate > 1.0)
      throw Error(ErrorCode::Constraint, "negative rate must be in [0, 1]");
  }
};

/// Per joint-count search statistics. Merging is associative.
struct SizeStats {
  std::vector<std::uint32_t> attempts;  // per successful search
  std::uint64_t simulated = 0;          // candidates evaluated
  std::uint64_t accepted = 0;
  std::uint64_t locking = 0;
  std::uint64_t failed_searches = 0;    // attempt cap exhausted

  double mean_attempts() const {
    if (attempts.empty()) return 0.0;
    double s = 0;
    for (auto a : attempts) s += a;
    return s / static_cast<double>(attempts.size());
  }
  double median_attempts() const {
    if (attempts.empty()) return 0.0;
    auto v = attempts;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (double(v[m - 1]) + double(v[m]));
  }
  double rejection_rate() const {
    return simulated ? static_cast<double>(locking) / static_cast<double>(simulated) : 0.0;
  }

  void merge(const SizeStats& o) {
    attempts.insert(attempts.end(), o.attempts.begin(), o.attempts.end());
    simulated += o.simulated;
    accepted += o.accepted;
    locking += o.locking;
    failed_searches += o.failed_searches;
  }
};

struct GenerationStats {
  std::map<std::size_t, SizeStats> by_size;
  std::uint64_t topologies_discarded = 0;

  SizeStats totals() const {
    SizeStats t;
    for (const auto& [n, s] : by_size) t.merge(s);
    return t;
  }
  void merge(const GenerationStats& o) {
    for (const auto& [n, s] : o.by_size) by_size[n].merge(s);
    topologies_discarded += o.topologies_discarded;
  }
};

/// A candidate pose that locks, with where it locked.
struct NegativeSample {
  Mechanism mechanism;
  std::size_t locking_step = 0;
  std::size_t steps = 0;  // fidelity of the failing simulation
};

struct VariantResult {
  Mechanism mechanism;
  std::size_t attempts = 0;
};

/// Position rejection sampling for one topology.
///
/// Candidates are drawn in chunks and screened with the batch kernel at the
/// low fidelity; survivors are confirmed at the high fidelity in draw order.
/// `attempts` counts candidates up to and including the accepted one.
class VariantSearch {
 public:
  VariantSearch(const Mechanism& topology, const GenerationConfig& cfg)
      : topology_(topology), cfg_(cfg), sim_(topology) {}

  std::optional<VariantResult> find(Rng& rng, SizeStats& stats,
                                    std::vector<NegativeSample>* negatives = nullptr,
                                    Rng* negative_rng = nullptr) {
    const std::size_t n = topology_.size();
    std::size_t attempts = 0;
    std::vector<Vec2> buf;
    while (attempts < cfg_.max_attempts) {
      const std::size_t chunk = std::min(cfg_.candidate_chunk, cfg_.max_attempts - attempts);
      buf.clear();
      for (std::size_t c = 0; c < chunk; ++c) {
        const auto p = sample_positions(n, rng);
        buf.insert(buf.end(), p.begin(), p.end());
      }
      const auto low = sim_.classify(buf, cfg_.t_low);
      for (std::size_t c = 0; c < chunk; ++c) {
        ++attempts;
        ++stats.simulated;
        const auto cand = std::span<const Vec2>(buf).subspan(c * n, n);
        std::optional<Locking> verdict = low[c];
        std::size_t fidelity = cfg_.t_low;
        if (!verdict) {
          verdict = sim_.classify(cand, cfg_.t_high)[0];
          fidelity = cfg_.t_high;
        }
        if (!verdict) {
          ++stats.accepted;
          stats.attempts.push_back(static_cast<std::uint32_t>(attempts));
          return VariantResult{topology_.with_positions({cand.begin(), cand.end()}), attempts};
        }
        ++stats.locking;
        if (negatives && negative_rng && uniform01(*negative_rng) < cfg_.negative_rate)
          negatives->push_back(
              {topology_.with_positions({cand.begin(), cand.end()}), verdict->step, fidelity});
      }
    }
    ++stats.failed_searches;
    return std::nullopt;
  }

 private:
  const Mechanism& topology_;
  const GenerationConfig& cfg_;
  BatchSimulator sim_;
};

inline std::optional<VariantResult> find_valid_variant(const Mechanism& topology, Rng& rng,
                                                       const GenerationConfig& cfg,
                                                       SizeStats& stats) {
  VariantSearch search(topology, cfg);
  return search.find(rng, stats);
}

/// One accepted mechanism with its full-revolution simulation.
struct GeneratedMechanism {
  std::uint64_t id = 0;
  Mechanism mechanism;
  Trajectory trajectory;
};

/// Everything one topology slot produced.
struct SlotResult {
  std::vector<GeneratedMechanism> variants;
  std::vector<NegativeSample> negatives;
  GenerationStats stats;
};

/// Joint count of topology slot `slot`, uniform on [n_min, n_max].
inline std::size_t slot_joint_count(const GenerationConfig& cfg, std::uint64_t slot) {
  Rng rng = make_stream({cfg.seed, 0x73697a65ULL, slot});
  return uniform_int(rng, cfg.n_min, cfg.n_max);
}

/// Runs topology slot `slot`: topologies of the slot's joint count are drawn
/// until one yields every variant. Depends only on (seed, slot).
inline SlotResult generate_slot(const GenerationConfig& cfg, std::uint64_t slot) {
  Rng rng = make_stream({cfg.seed, 0x746f706fULL, slot});
  Rng neg_rng = make_stream({cfg.seed, 0x6e656761ULL, slot});
  SlotResult out;
  const std::size_t n = slot_joint_count(cfg, slot);
  SizeStats& stats = out.stats.by_size[n];
  for (std::size_t retry = 0; retry < cfg.topology_retries; ++retry) {
    const Mechanism topo = sample_topology(rng, n, cfg.ground_probability).topology;
    VariantSearch search(topo, cfg);
    std::vector<GeneratedMechanism> variants;
    std::vector<NegativeSample> negatives;
    bool complete = true;
    for (std::size_t v = 0; v < cfg.variants_per_topology; ++v) {
      auto r = search.find(rng, stats, &negatives, &neg_rng);
      if (!r) {
        complete = false;
        break;
      }
      const SolutionPlan plan = compile_plan(r->mechanism);
      SimOutcome sim = simulate(r->mechanism, plan, cfg.t_high);
      variants.push_back({0, std::move(r->mechanism), std::move(sim.trajectory)});
    }
    out.negatives.insert(out.negatives.end(), std::make_move_iterator(negatives.begin()),
                         std::make_move_iterator(negatives.end()));
    if (complete) {
      out.variants = std::move(variants);
      return out;
    }
    ++out.stats.topologies_discarded;
  }
  throw Error(ErrorCode::Budget, "no topology of n=" + std::to_string(n) +
                                     " yielded all variants within the retry budget");
}

/// Receives slot output in slot order.
struct DatasetSink {
  std::function<void(const GeneratedMechanism&)> on_mechanism;
  std::function<void(const NegativeSample&)> on_negative;
};

/// Drives generation over ceil(count / variants) topology slots.
///
/// Slots are claimed by workers from a shared counter and emitted in slot
/// order, so the record stream is identical for any worker count. Mechanism
/// ids are assigned sequentially in emission order.
inline GenerationStats generate_dataset(const GenerationConfig& cfg, const DatasetSink& sink) {
  cfg.check();
  const std::uint64_t slots =
      (cfg.count + cfg.variants_per_topology - 1) / cfg.variants_per_topology;
  GenerationStats stats;
  std::uint64_t next_id = 0;

  auto emit = [&](SlotResult& r) {
    for (auto& m : r.variants) {
      m.id = next_id++;
      if (sink.on_mechanism) sink.on_mechanism(m);
    }
    if (sink.on_negative)
      for (const auto& neg : r.negatives) sink.on_negative(neg);
    stats.merge(r.stats);
  };

  if (cfg.workers <= 1) {
    for (std::uint64_t s = 0; s < slots; ++s) {
      SlotResult r = generate_slot(cfg, s);
      emit(r);
    }
    return stats;
  }

  std::mutex mu;
  std::condition_variable ready;
  std::map<std::uint64_t, SlotResult> done;
  std::atomic<std::uint64_t> next_slot{0};
  std::atomic<bool> abort{false};
  std::exception_ptr failure;
  // Bound how far workers may run ahead of the emitter.
  const std::uint64_t window = 4 * cfg.workers;
  std::uint64_t emitted = 0;

  auto worker = [&] {
    while (!abort.load()) {
      const std::uint64_t s = next_slot.fetch_add(1);
      if (s >= slots) return;
      {
        std::unique_lock lock(mu);
        ready.wait(lock, [&] { return abort.load() || s < emitted + window; });
      }
      try {
        SlotResult r = generate_slot(cfg, s);
        std::lock_guard lock(mu);
        done.emplace(s, std::move(r));
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        abort = true;
      }
      ready.notify_all();
    }
  };

  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < cfg.workers; ++w) pool.emplace_back(worker);
  while (emitted < slots) {
    SlotResult r;
    {
      std::unique_lock lock(mu);
      ready.wait(lock, [&] { return abort.load() || done.count(emitted) > 0; });
      if (abort.load()) break;
      r = std::move(done.at(emitted));
      done.erase(emitted);
    }
    emit(r);
    {
      std::lock_guard lock(mu);
      ++emitted;
    }
    ready.notify_all();
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return stats;
}

/// Attempts-per-success by joint count over `trials` fresh topologies each.
inline GenerationStats rejection_curve(const GenerationConfig& cfg,
                                       const std::vector<std::size_t>& sizes,
                                       std::size_t trials) {
  cfg.check();
  struct Job {
    std::size_t n;
    std::size_t trial;
  };
  std::vector<Job> jobs;
  for (auto n : sizes) {
    if (n < cfg.n_min || n > cfg.n_max)
      throw Error(ErrorCode::Constraint, "size outside [n_min, n_max]");
    for (std::size_t t = 0; t < trials; ++t) jobs.push_back({n, t});
  }
  std::vector<GenerationStats> partial(cfg.workers);
  std::atomic<std::size_t> next{0};
  auto worker = [&](std::size_t w) {
    for (std::size_t k = next.fetch_add(1); k < jobs.size(); k = next.fetch_add(1)) {
      const Job job = jobs[k];
      Rng rng = make_stream({cfg.seed, 0x63757276ULL, job.n, job.trial});
      const Mechanism topo = sample_topology(rng, job.n, cfg.ground_probability).topology;
      SizeStats& st = partial[w].by_size[job.n];
      VariantSearch(topo, cfg).find(rng, st);
    }
  };
  if (cfg.workers == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < cfg.workers; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }
  GenerationStats out;
  for (const auto& p : partial) out.merge(p);
  // Per-size attempt lists are order-dependent under multiple workers.
  for (auto& [n, s] : out.by_size) std::sort(s.attempts.begin(), s.attempts.end());
  return out;
}

}  // namespace linkage
