#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "linkage/atlas.hpp"
#include "linkage/core.hpp"
#include "linkage/generator.hpp"
#include "linkage/io.hpp"
#include "linkage/solver.hpp"
#include "linkage/topology.hpp"

namespace linkage::service {

using json = nlohmann::json;

inline constexpr std::size_t kMinSteps = 8;
inline constexpr std::size_t kMaxSteps = 2000;

struct BadRequest : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Response {
  int status = 200;
  json body;
};

inline Response error(int status, const std::string& code, const std::string& message,
                      json diagnostics = nullptr) {
  json e{{"code", code}, {"message", message}};
  if (!diagnostics.is_null()) e["diagnostics"] = std::move(diagnostics);
  return {status, json{{"error", std::move(e)}}};
}

inline json diagnostics_json(const std::vector<Diagnostic>& diags) {
  json out = json::array();
  for (const auto& d : diags) out.push_back(d.message);
  return out;
}

inline json locking_json(const Locking& l) {
  return json{{"step", l.step}, {"joint", l.joint}, {"degenerate", l.degenerate}};
}

/// Stateless JSON API over the library. The atlas, when present, is shared
/// read-only between requests.
class Api {
 public:
  explicit Api(const Atlas* atlas = nullptr, GenerationConfig generation = {})
      : atlas_(atlas), generation_(generation) {}

  Response handle(const std::string& method, const std::string& path,
                  const std::string& body) const {
    try {
      if (path == "/health") {
        if (method != "GET") return error(405, "method_not_allowed", "use GET");
        return {200, json{{"status", "ok"}, {"atlas_size", atlas_ ? atlas_->size() : 0}}};
      }
      const bool known = path == "/simulate" || path == "/operator/apply" ||
                         path == "/mechanism/random" || path == "/retrieve";
      if (!known) return error(404, "not_found", "no endpoint " + path);
      if (method != "POST") return error(405, "method_not_allowed", "use POST");
      json req;
      try {
        req = json::parse(body);
      } catch (const json::exception& e) {
        return error(400, "bad_json", e.what());
      }
      if (!req.is_object()) return error(400, "bad_request", "body must be a JSON object");
      if (path == "/simulate") return simulate(req);
      if (path == "/operator/apply") return apply_operator(req);
      if (path == "/mechanism/random") return random_mechanism(req);
      return retrieve_paths(req);
    } catch (const BadRequest& e) {
      return error(400, "bad_request", e.what());
    } catch (const json::exception& e) {
      return error(400, "bad_request", e.what());
    } catch (const Error& e) {
      const int status = e.code() == ErrorCode::Budget   ? 503
                         : e.code() == ErrorCode::Format ? 400
                                                         : 422;
      return error(status, to_string(e.code()), e.what());
    } catch (const std::exception& e) {
      return error(500, "internal", e.what());
    }
  }

 private:
  static Mechanism parse_mechanism(const json& req) {
    if (!req.contains("mechanism")) throw BadRequest("missing 'mechanism'");
    return io::mechanism_from_json(req.at("mechanism"));
  }

  Response simulate(const json& req) const {
    const Mechanism mech = parse_mechanism(req);
    const std::size_t T = req.value("T", kHighFidelitySteps);
    if (T < kMinSteps || T > kMaxSteps)
      return error(400, "bad_request", "T must be within [8, 2000]");
    if (auto diags = validate(mech); !diags.empty())
      return error(422, "invalid_mechanism", "mechanism fails validation",
                   diagnostics_json(diags));
    const SolutionPlan plan = compile_plan(mech);
    const SimOutcome out = linkage::simulate(mech, plan, T);
    if (!out.ok()) return {200, json{{"locking", locking_json(*out.locking)}}};
    return {200, json{{"trajectory", io::trajectory_json(out.trajectory)},
                      {"singular_steps", out.trajectory.singular_steps}}};
  }

  static Vec2 default_position(const Mechanism& m, std::size_t i, std::size_t j) {
    const Vec2 a = m.position(i), b = m.position(j);
    if (!is_set(a) || !is_set(b)) return {0.5, 0.75};
    const Vec2 mid = (a + b) * 0.5;
    const Vec2 d = b - a;
    Vec2 p = mid + Vec2{-d.y, d.x} * 0.5;
    p.x = std::clamp(p.x, 0.0, 1.0);
    p.y = std::clamp(p.y, 0.0, 1.0);
    return p;
  }

  Response apply_operator(const json& req) const {
    const Mechanism mech = parse_mechanism(req);
    const std::string op = req.value("op", "j");
    std::optional<Vec2> pos;
    if (req.contains("position") && !req["position"].is_null())
      pos = io::point_from_json(req["position"]);
    Mechanism out;
    if (op == "ng") {
      if (!pos) return error(400, "bad_request", "ground operator needs 'position'");
      out = apply_ground_operator(mech, pos);
    } else if (op == "j" || op == "ns") {
      const std::size_t i = req.at("i").get<std::size_t>();
      const std::size_t j = req.at("j").get<std::size_t>();
      if (i >= mech.size() || j >= mech.size())
        return error(422, "structural", "operator index out of range");
      if (!pos) pos = default_position(mech, i, j);
      out = op == "j" ? apply_joint_operator(mech, i, j, pos)
                      : apply_simple_operator(mech, i, j, pos);
    } else {
      return error(400, "bad_request", "op must be 'j', 'ns' or 'ng'");
    }
    if (auto diags = validate(out); !diags.empty())
      return error(422, "invalid_mechanism", "resulting mechanism fails validation",
                   diagnostics_json(diags));
    return {200, json{{"mechanism", io::mechanism_json(out)}}};
  }

  Response random_mechanism(const json& req) const {
    const std::size_t n = req.value("n", std::size_t{8});
    if (n < kMinTopologyJoints || n > 20)
      return error(400, "bad_request", "n must be within [5, 20]");
    const std::uint64_t seed = req.value("seed", std::uint64_t{0});
    GenerationConfig cfg = generation_;
    cfg.n_min = std::min(cfg.n_min, n);
    cfg.n_max = std::max(cfg.n_max, n);
    Rng rng = make_stream({seed, 0x72616e64ULL, n});
    for (std::size_t tries = 0; tries < cfg.topology_retries; ++tries) {
      const Mechanism topo = sample_topology(rng, n, cfg.ground_probability).topology;
      SizeStats stats;
      if (auto r = VariantSearch(topo, cfg).find(rng, stats)) {
        return {200, json{{"mechanism", io::mechanism_json(r->mechanism)},
                          {"attempts", r->attempts}}};
      }
    }
    return error(503, "budget", "no valid mechanism found within the attempt budget");
  }

  Response retrieve_paths(const json& req) const {
    if (!atlas_) return error(503, "no_atlas", "service started without an atlas");
    if (!req.contains("points") || !req["points"].is_array())
      throw BadRequest("'points' must be an array");
    const auto& pts = req.at("points");
    std::vector<Vec2> points;
    if (!pts.empty() && pts[0].is_number())
      points = io::points_from_json(pts);
    else
      for (const auto& p : pts) points.push_back(io::point_from_json(p));
    if (points.size() < 2) return error(400, "bad_request", "need at least two points");
    RetrievalOptions opt;
    opt.k = req.value("k", kRetrievalCount);
    opt.threshold = req.value("threshold", kRetrievalThreshold);
    if (opt.k > 50) return error(400, "bad_request", "k must be <= 50");
    const RetrievalResult res = retrieve(*atlas_, points, opt);
    json hits = json::array();
    for (const auto& h : res.hits) {
      json reduced = nullptr;
      if (h.reduced)
        reduced = json{{"mechanism", io::mechanism_json(h.reduced->mechanism)},
                       {"joint", h.reduced->joint}};
      hits.push_back(json{{"mechanism_id", h.mechanism_id},
                          {"joint", h.joint},
                          {"distance", h.distance},
                          {"above_threshold", h.above_threshold},
                          {"path", io::points_json(atlas_->record(h.record_index).path.points)},
                          {"reduced", reduced}});
    }
    json body{{"hits", hits}, {"scanned", res.scanned}};
    if (!res.diagnostic.empty()) body["diagnostic"] = res.diagnostic;
    return {200, body};
  }

  const Atlas* atlas_;
  GenerationConfig generation_;
};

}  // namespace linkage::service
