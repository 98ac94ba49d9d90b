#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "linkage/atlas.hpp"
#include "linkage/bench.hpp"
#include "linkage/generator.hpp"
#include "linkage/http.hpp"
#include "linkage/io.hpp"
#include "linkage/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace linkage;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? v : fallback;
}

void log(const std::string& msg) { std::cerr << "linkage: " << msg << '\n'; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << j.dump(2) << '\n';
}

/// Record stream split into fixed-size shards.
template <typename Record>
class ShardWriter {
 public:
  ShardWriter(fs::path dir, std::string prefix, std::size_t per_shard)
      : dir_(std::move(dir)), prefix_(std::move(prefix)), per_shard_(per_shard) {}

  void write(const Record& r) {
    if (!writer_ || writer_->count() == per_shard_) open_next();
    writer_->write(r);
    ++total_;
  }

  /// Leaves at least one (possibly empty) shard behind.
  std::size_t finish() {
    if (!writer_) open_next();
    writer_.reset();
    file_.close();
    return total_;
  }

 private:
  void open_next() {
    writer_.reset();
    file_.close();
    file_.open(dir_ / io::shard_name(prefix_, shard_++));
    if (!file_) throw Error(ErrorCode::Io, "cannot create shard in " + dir_.string());
    writer_ = std::make_unique<io::RecordWriter<Record>>(file_);
  }

  fs::path dir_;
  std::string prefix_;
  std::size_t per_shard_;
  std::size_t shard_ = 0;
  std::size_t total_ = 0;
  std::ofstream file_;
  std::unique_ptr<io::RecordWriter<Record>> writer_;
};

Mechanism load_mechanism(const std::string& path, std::uint64_t id, bool by_id) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string first;
  std::getline(in, first);
  if (first.find(io::kFormatName) != std::string::npos) {
    std::istringstream again(text);
    io::RecordReader<io::MechanismRecord> reader(again, path);
    while (auto r = reader.next())
      if (!by_id || r->id == id) return r->mechanism;
    throw Error(ErrorCode::Reference, "no mechanism with id " + std::to_string(id) + " in " + path);
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, path + ": " + e.what());
  }
  return io::mechanism_from_json(j.contains("mechanism") ? j["mechanism"] : j);
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoul(item));
    } catch (const std::exception&) {
      throw UsageError("bad size list: " + text);
    }
  }
  return out;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  GenerationConfig cfg;
  std::string out = "dataset";
  std::size_t shard_size = 10000;
  bool trajectories = true;
};

int cmd_generate(const GenerateArgs& a) {
  a.cfg.check();
  fs::create_directories(a.out);
  ShardWriter<io::MechanismRecord> mechs(a.out, io::kMechanismPrefix, a.shard_size);
  ShardWriter<io::TrajectoryRecord> trajs(a.out, io::kTrajectoryPrefix, a.shard_size);
  ShardWriter<CurveRecord> curves(a.out, io::kCurvePrefix, a.shard_size);
  ShardWriter<io::NegativeRecord> negs(a.out, io::kNegativePrefix, a.shard_size);
  std::uint64_t neg_id = 0;
  DatasetSink sink;
  sink.on_mechanism = [&](const GeneratedMechanism& g) {
    mechs.write({g.id, g.mechanism});
    if (a.trajectories) trajs.write({g.id, g.trajectory});
    for (const auto& r : curve_records(g.id, g.mechanism, g.trajectory)) curves.write(r);
  };
  sink.on_negative = [&](const NegativeSample& n) {
    negs.write({{neg_id++, n.mechanism}, n.locking_step, n.steps});
  };
  const GenerationStats stats = generate_dataset(a.cfg, sink);
  const std::size_t nm = mechs.finish(), nc = curves.finish(), nn = negs.finish();
  if (a.trajectories) trajs.finish();
  json report = io::stats_json(stats);
  report["config"] = {{"count", a.cfg.count},       {"min_joints", a.cfg.n_min},
                      {"max_joints", a.cfg.n_max},   {"seed", a.cfg.seed},
                      {"variants", a.cfg.variants_per_topology},
                      {"max_attempts", a.cfg.max_attempts}};
  report["records"] = {{"mechanisms", nm}, {"curves", nc}, {"negatives", nn}};
  std::ofstream(fs::path(a.out) / "stats.json") << report.dump(2) << '\n';
  log("wrote " + std::to_string(nm) + " mechanisms, " + std::to_string(nc) + " curves, " +
      std::to_string(nn) + " negatives to " + a.out);
  return 0;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const std::string& input, std::uint64_t id, bool by_id, std::size_t T,
                 const std::string& out) {
  if (T < service::kMinSteps || T > service::kMaxSteps)
    throw UsageError("--steps must be within [8, 2000]");
  const Mechanism m = load_mechanism(input, id, by_id);
  if (auto diags = validate(m); !diags.empty()) {
    for (const auto& d : diags) log(d.message);
    throw Error(ErrorCode::Structural, "mechanism fails validation");
  }
  const SimOutcome sim = simulate(m, compile_plan(m), T);
  if (!sim.ok()) {
    write_json({{"locking", service::locking_json(*sim.locking)}}, out);
    return 0;
  }
  write_json({{"trajectory", io::trajectory_json(sim.trajectory)},
              {"singular_steps", sim.trajectory.singular_steps}},
             out);
  return 0;
}

// ---------------------------------------------------------------- normalize

int cmd_normalize(const std::string& input, const std::string& out) {
  const auto pts = io::parse_point_list(read_file(input));
  if (pts.empty()) throw Error(ErrorCode::Format, input + ": no points");
  const NormalizedPath p = normalize(pts);
  write_json({{"points", io::points_json(p.points)},
              {"is_circle", is_circle(p)},
              {"radial_variance", radial_variance(p.points)}},
             out);
  return 0;
}

// ---------------------------------------------------------------- curate

struct CurationCounts {
  std::size_t total = 0, arcs = 0, circles = 0, flagged = 0;
  json to_json() const {
    const double t = total ? static_cast<double>(total) : 1.0;
    return {{"curves", total},
            {"arcs", arcs},
            {"circles", circles},
            {"flagged", flagged},
            {"flagged_fraction", static_cast<double>(flagged) / t}};
  }
  void add(const CurveRecord& r) {
    ++total;
    arcs += r.is_arc;
    circles += r.is_circle && !r.is_arc;
    flagged += r.flagged();
  }
};

int cmd_curate(const std::string& input, const std::string& out, double keep_rate,
               std::uint64_t seed, std::size_t shard_size) {
  if (keep_rate < 0.0 || keep_rate > 1.0) throw UsageError("--keep-rate must be within [0, 1]");
  fs::create_directories(out);
  CurationCounts before, after;
  ShardWriter<CurveRecord> w(out, io::kCurvePrefix, shard_size);
  bool truncated = false;
  io::for_each_record<CurveRecord>(
      input, io::kCurvePrefix,
      [&](CurveRecord&& r) {
        before.add(r);
        if (curate_keep(r, keep_rate, seed)) {
          after.add(r);
          w.write(r);
        }
      },
      &truncated);
  w.finish();
  if (truncated) log("warning: a shard in " + input + " ends with a truncated record");
  json report{{"before", before.to_json()}, {"after", after.to_json()}, {"keep_rate", keep_rate}};
  std::ofstream(fs::path(out) / "curation.json") << report.dump(2) << '\n';
  std::cout << report.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- build-atlas

int cmd_build_atlas(const std::string& curves_dir, const std::string& mech_dir,
                    const std::string& out, std::uint64_t seed, std::size_t max_records) {
  std::vector<CurveRecord> records;
  io::for_each_record<CurveRecord>(curves_dir, io::kCurvePrefix,
                                   [&](CurveRecord&& r) { records.push_back(std::move(r)); });
  if (max_records > 0 && records.size() > max_records) {
    // Seeded uniform subsample, kept in input order.
    Rng rng = make_stream({seed, 0x73756273ULL});
    std::vector<std::size_t> idx(records.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < max_records; ++i)
      std::swap(idx[i], idx[uniform_int(rng, i, idx.size() - 1)]);
    idx.resize(max_records);
    std::sort(idx.begin(), idx.end());
    std::vector<CurveRecord> kept;
    for (auto i : idx) kept.push_back(std::move(records[i]));
    records = std::move(kept);
  }
  std::set<std::uint64_t> needed;
  for (const auto& r : records) needed.insert(r.mechanism_id);
  MechanismStore store;
  io::for_each_record<io::MechanismRecord>(
      mech_dir.empty() ? curves_dir : mech_dir, io::kMechanismPrefix, [&](io::MechanismRecord&& r) {
        if (needed.count(r.id)) store.emplace(r.id, std::move(r.mechanism));
      });
  const Atlas atlas = build_atlas(std::move(records), std::move(store), seed);
  io::save_atlas(atlas, out);
  log("atlas of " + std::to_string(atlas.size()) + " curves over " +
      std::to_string(atlas.mechanisms().size()) + " mechanisms written to " + out);
  return 0;
}

// ---------------------------------------------------------------- retrieve

int cmd_retrieve(const std::string& query_path, const std::string& atlas_dir,
                 const std::string& mech_dir, std::size_t k, double threshold,
                 const std::string& out) {
  std::vector<Vec2> raw;
  try {
    raw = io::parse_point_list(read_file(query_path));
  } catch (const Error& e) {
    throw Error(ErrorCode::Io, "unreadable query: " + std::string(e.what()));
  }
  if (raw.size() < 2) throw Error(ErrorCode::Format, "query needs at least two points");
  const Atlas atlas = io::load_atlas(atlas_dir, mech_dir);
  RetrievalOptions opt;
  opt.k = k;
  opt.threshold = threshold;
  const NormalizedPath query = normalize(raw);
  const RetrievalResult res = retrieve(atlas, query.points, opt);

  json hits = json::array();
  for (const auto& h : res.hits) {
    const auto& rec = atlas.record(h.record_index);
    json hit{{"mechanism_id", h.mechanism_id},
             {"joint", h.joint},
             {"distance", h.distance},
             {"recomputed_distance", chamfer(query.points, rec.path.points)},
             {"above_threshold", h.above_threshold},
             {"curve", io::points_json(rec.path.points)}};
    if (h.reduced) {
      const Mechanism& m = h.reduced->mechanism;
      hit["reduced"] = {{"mechanism", io::mechanism_json(m)}, {"joint", h.reduced->joint}};
      const SimOutcome sim = simulate(m, compile_plan(m), kHighFidelitySteps);
      if (sim.ok()) {
        // Mechanism frame overlay: every joint's path in original coordinates.
        hit["reduced"]["trajectory"] = io::trajectory_json(sim.trajectory);
      }
    }
    hits.push_back(std::move(hit));
  }
  json report{{"query", io::points_json(query.points)},
              {"k", k},
              {"threshold", threshold},
              {"scanned", res.scanned},
              {"hits", hits}};
  if (!res.diagnostic.empty()) report["diagnostic"] = res.diagnostic;
  write_json(report, out);
  for (const auto& h : res.hits)
    std::fprintf(stderr, "  mechanism %llu joint %u  distance %.6f%s\n",
                 static_cast<unsigned long long>(h.mechanism_id), h.joint, h.distance,
                 h.above_threshold ? "  (above threshold)" : "");
  return 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::size_t count = 10000;
  std::size_t repetitions = 10;
  std::size_t threads = 0;
  std::size_t n_min = 8, n_max = 20;
  std::size_t variants = 100;
  std::uint64_t seed = 0;
  std::string mechanisms;
  std::string out;
};

std::vector<Mechanism> bench_workload(const BenchArgs& a) {
  std::vector<Mechanism> mechs;
  if (!a.mechanisms.empty()) {
    io::for_each_record<io::MechanismRecord>(a.mechanisms, io::kMechanismPrefix,
                                             [&](io::MechanismRecord&& r) {
                                               if (mechs.size() < a.count)
                                                 mechs.push_back(std::move(r.mechanism));
                                             });
    return mechs;
  }
  return bench::generate_workload(a.count, a.n_min, a.n_max, a.variants, a.seed, a.threads);
}

int cmd_bench(BenchArgs a) {
  if (a.threads == 0) a.threads = bench::physical_cores();
  log("preparing " + std::to_string(a.count) + " mechanisms");
  const auto mechs = bench_workload(a);
  bench::BenchConfig cfg;
  cfg.repetitions = a.repetitions;
  cfg.threads = a.threads;
  const auto rows = bench::run(mechs, cfg);
  std::printf("| %-48s | %-22s |\n", "Method", "Time (s)");
  std::printf("|%s|%s|\n", std::string(50, '-').c_str(), std::string(24, '-').c_str());
  json table = json::array();
  for (const auto& r : rows) {
    char cell[64];
    std::snprintf(cell, sizeof cell, "%.4f ± %.4f", r.mean(), r.stddev());
    std::printf("| %-48s | %-22s |\n", r.method.c_str(), cell);
    table.push_back({{"method", r.method},
                     {"mean", r.mean()},
                     {"stddev", r.stddev()},
                     {"seconds", r.seconds},
                     {"ok", r.ok}});
  }
  const double scalar = rows.front().mean();
  const double vec = rows[rows.size() - 2].mean();
  const double par = rows.back().mean();
  std::printf("\nmechanisms %zu, T %zu, repetitions %zu, threads %zu (physical cores %zu)\n",
              mechs.size(), cfg.steps, cfg.repetitions, cfg.threads, bench::physical_cores());
  std::printf("vectorized speedup %.2fx, parallel speedup %.2fx (efficiency %.2f per thread)\n",
              scalar / vec, vec / par, vec / par / static_cast<double>(cfg.threads));
  if (!a.out.empty())
    write_json({{"rows", table},
                {"mechanisms", mechs.size()},
                {"threads", cfg.threads},
                {"physical_cores", bench::physical_cores()},
                {"vectorized_speedup", scalar / vec},
                {"parallel_speedup", vec / par}},
               a.out);
  return 0;
}

// ---------------------------------------------------------------- stats

int cmd_stats(const std::string& dataset, GenerationConfig cfg, const std::string& sizes,
              std::size_t trials, const std::string& out) {
  if (!dataset.empty()) {
    std::cout << read_file(fs::path(dataset) / "stats.json");
    return 0;
  }
  const auto ns = parse_sizes(sizes);
  if (ns.empty()) throw UsageError("--sizes is empty");
  cfg.n_min = *std::min_element(ns.begin(), ns.end());
  cfg.n_max = *std::max_element(ns.begin(), ns.end());
  const GenerationStats stats = rejection_curve(cfg, ns, trials);
  std::printf("%4s %10s %10s %10s %12s\n", "n", "searches", "mean", "median", "rejection");
  for (const auto& [n, s] : stats.by_size)
    std::printf("%4zu %10zu %10.1f %10.1f %11.2f%%\n", n, s.attempts.size() + s.failed_searches,
                s.mean_attempts(), s.median_attempts(), 100.0 * s.rejection_rate());
  if (!out.empty()) write_json(io::stats_json(stats), out);
  return 0;
}

// ---------------------------------------------------------------- serve

int cmd_serve(int port, const std::string& host, const std::string& atlas_dir,
              const std::string& mech_dir, const std::string& static_dir) {
  std::unique_ptr<Atlas> atlas;
  if (!atlas_dir.empty()) {
    atlas = std::make_unique<Atlas>(io::load_atlas(atlas_dir, mech_dir));
    log("loaded atlas of " + std::to_string(atlas->size()) + " curves");
  }
  const service::Api api(atlas.get());
  httplib::Server server;
  service::bind(server, api, static_dir);
  log("listening on " + host + ":" + std::to_string(port));
  if (!server.listen(host, port))
    throw Error(ErrorCode::Io, "cannot listen on " + host + ":" + std::to_string(port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planar linkage dataset generation, simulation and retrieval"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "generate mechanisms, trajectories and curves");
  g->add_option("--count", gen.cfg.count, "mechanisms to generate")->check(CLI::PositiveNumber);
  g->add_option("--min-joints", gen.cfg.n_min, "smallest joint count");
  g->add_option("--max-joints", gen.cfg.n_max, "largest joint count");
  g->add_option("--variants", gen.cfg.variants_per_topology, "position variants per topology");
  g->add_option("--max-attempts", gen.cfg.max_attempts, "candidate cap per variant search");
  g->add_option("--negative-rate", gen.cfg.negative_rate, "share of locking candidates kept");
  g->add_option("--seed", gen.cfg.seed);
  g->add_option("--threads", gen.cfg.workers)->check(CLI::PositiveNumber);
  g->add_option("--out", gen.out, "output directory");
  g->add_option("--shard-size", gen.shard_size, "records per shard")->check(CLI::PositiveNumber);
  g->add_flag("!--no-trajectories", gen.trajectories, "skip trajectory shards");

  std::string sim_in, sim_out;
  std::uint64_t sim_id = 0;
  std::size_t sim_T = kHighFidelitySteps;
  auto* s = app.add_subcommand("simulate", "simulate one mechanism over a crank revolution");
  s->add_option("mechanism", sim_in, "mechanism JSON or record file")->required();
  auto* id_opt = s->add_option("--id", sim_id, "record id within a record file");
  s->add_option("--steps", sim_T, "time steps per revolution");
  s->add_option("--out", sim_out, "output file (default stdout)");

  std::string norm_in, norm_out;
  auto* n = app.add_subcommand("normalize", "normalize a point list");
  n->add_option("points", norm_in)->required();
  n->add_option("--out", norm_out);

  std::string cur_in, cur_out = "curated";
  double keep_rate = kCurationKeepRate;
  std::uint64_t cur_seed = 0;
  std::size_t cur_shard = 10000;
  auto* c = app.add_subcommand("curate", "subsample arc and circle curves");
  c->add_option("curves", cur_in, "curve shard directory or file")->required();
  c->add_option("--out", cur_out);
  c->add_option("--keep-rate", keep_rate);
  c->add_option("--seed", cur_seed);
  c->add_option("--shard-size", cur_shard)->check(CLI::PositiveNumber);

  std::string ba_curves, ba_mechs, ba_out = "atlas";
  std::uint64_t ba_seed = 0;
  std::size_t ba_max = 0;
  auto* b = app.add_subcommand("build-atlas", "index curated curves for retrieval");
  b->add_option("curves", ba_curves, "curve shard directory")->required();
  b->add_option("--mechanisms", ba_mechs, "mechanism shard directory (default: curves dir)");
  b->add_option("--out", ba_out);
  b->add_option("--seed", ba_seed);
  b->add_option("--max-records", ba_max, "seeded uniform subsample size (0 keeps all)");

  std::string rq_query, rq_out;
  std::string rq_atlas = env_or("LINKAGE_ATLAS", "");
  std::string rq_mechs = env_or("LINKAGE_MECHANISMS", "");
  std::size_t rq_k = kRetrievalCount;
  double rq_threshold = kRetrievalThreshold;
  auto* r = app.add_subcommand("retrieve", "find mechanisms tracing a query curve");
  r->add_option("query", rq_query, "point list file")->required();
  r->add_option("--atlas", rq_atlas, "atlas directory (env LINKAGE_ATLAS)");
  r->add_option("--mechanisms", rq_mechs, "mechanism store (env LINKAGE_MECHANISMS)");
  r->add_option("-k", rq_k)->check(CLI::Range(1, 50));
  r->add_option("--threshold", rq_threshold);
  r->add_option("--out", rq_out, "report and overlay data (default stdout)");

  BenchArgs ba;
  auto* be = app.add_subcommand("bench", "time scalar, vectorized and parallel simulation");
  be->add_option("--count", ba.count)->check(CLI::PositiveNumber);
  be->add_option("--repetitions", ba.repetitions)->check(CLI::PositiveNumber);
  be->add_option("--threads", ba.threads, "parallel workers (default: physical cores)");
  be->add_option("--min-joints", ba.n_min);
  be->add_option("--max-joints", ba.n_max);
  be->add_option("--variants", ba.variants, "mechanisms per topology in the workload");
  be->add_option("--seed", ba.seed);
  be->add_option("--mechanisms", ba.mechanisms, "use stored mechanisms instead of generating");
  be->add_option("--out", ba.out, "JSON timing report");

  GenerationConfig st_cfg;
  std::string st_dataset, st_sizes = "8,10,12,14,16,18,20", st_out;
  std::size_t st_trials = 100;
  auto* st = app.add_subcommand("stats", "rejection-sampling statistics per joint count");
  st->add_option("--dataset", st_dataset, "print the stats report of a generated dataset");
  st->add_option("--sizes", st_sizes, "comma-separated joint counts");
  st->add_option("--trials", st_trials, "topologies per size")->check(CLI::PositiveNumber);
  st->add_option("--max-attempts", st_cfg.max_attempts);
  st->add_option("--seed", st_cfg.seed);
  st->add_option("--threads", st_cfg.workers)->check(CLI::PositiveNumber);
  st->add_option("--out", st_out);

  int port = 8080;
  std::string host = "127.0.0.1", sv_static;
  std::string sv_atlas = env_or("LINKAGE_ATLAS", "");
  std::string sv_mechs = env_or("LINKAGE_MECHANISMS", "");
  auto* sv = app.add_subcommand("serve", "run the HTTP JSON service");
  sv->add_option("--port", port, "listen port (env LINKAGE_PORT)")->check(CLI::Range(1, 65535));
  sv->add_option("--host", host);
  sv->add_option("--atlas", sv_atlas, "atlas directory (env LINKAGE_ATLAS)");
  sv->add_option("--mechanisms", sv_mechs, "mechanism store (env LINKAGE_MECHANISMS)");
  sv->add_option("--static", sv_static, "directory of UI assets served at /");

  try {
    const std::string env_port = env_or("LINKAGE_PORT", "");
    if (!env_port.empty()) port = std::stoi(env_port);
  } catch (const std::exception&) {
    std::cerr << "linkage: LINKAGE_PORT is not a number\n";
    return kExitUsage;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*s) return cmd_simulate(sim_in, sim_id, id_opt->count() > 0, sim_T, sim_out);
    if (*n) return cmd_normalize(norm_in, norm_out);
    if (*c) return cmd_curate(cur_in, cur_out, keep_rate, cur_seed, cur_shard);
    if (*b) return cmd_build_atlas(ba_curves, ba_mechs, ba_out, ba_seed, ba_max);
    if (*r) {
      if (rq_atlas.empty()) throw UsageError("--atlas or LINKAGE_ATLAS is required");
      return cmd_retrieve(rq_query, rq_atlas, rq_mechs, rq_k, rq_threshold, rq_out);
    }
    if (*be) return cmd_bench(ba);
    if (*st) return cmd_stats(st_dataset, st_cfg, st_sizes, st_trials, st_out);
    if (*sv) return cmd_serve(port, host, sv_atlas, sv_mechs, sv_static);
  } catch (const UsageError& e) {
    log(e.what());
    return kExitUsage;
  } catch (const Error& e) {
    log(std::string(to_string(e.code())) + ": " + e.what());
    return e.code() == ErrorCode::Constraint ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    log(e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
