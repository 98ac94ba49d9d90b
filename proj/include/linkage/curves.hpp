#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "linkage/core.hpp"
#include "linkage/random.hpp"
#include "linkage/solver.hpp"
#include "linkage/topology.hpp"

namespace linkage {

inline constexpr double kCircleVarianceThreshold = 5e-4;
inline constexpr double kCurationKeepRate = 0.005;
inline constexpr double kNormalizedTolerance = 1e-9;

using Path = std::vector<Vec2>;

/// A path scaled to unit diameter with the diameter horizontal and the
/// bounding box centred on (0.5, 0.5).
struct NormalizedPath {
  std::vector<Vec2> points;
  bool operator==(const NormalizedPath&) const = default;
};

/// Lexicographically smallest index pair at maximum distance.
inline std::pair<std::size_t, std::size_t> farthest_pair(std::span<const Vec2> pts) {
  double best = -1.0;
  std::pair<std::size_t, std::size_t> pair{0, 0};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double dx = pts[j].x - pts[i].x;
      const double dy = pts[j].y - pts[i].y;
      const double d2 = dx * dx + dy * dy;
      if (d2 > best) {
        best = d2;
        pair = {i, j};
      }
    }
  }
  return pair;
}

namespace detail {

inline void center_bbox(std::vector<Vec2>& pts) {
  double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x;
  double lo_y = lo_x, hi_y = -lo_x;
  for (auto p : pts) {
    lo_x = std::min(lo_x, p.x);
    hi_x = std::max(hi_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_y = std::max(hi_y, p.y);
  }
  const double sx = 0.5 - 0.5 * (lo_x + hi_x);
  const double sy = 0.5 - 0.5 * (lo_y + hi_y);
  for (auto& p : pts) p = {p.x + sx, p.y + sy};
}

// Angle of p about the box centre, in [0, 2pi).
inline double center_angle(Vec2 p) {
  double a = std::atan2(p.y - 0.5, p.x - 0.5);
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  return a;
}

}  // namespace detail

/// Similarity-normalizes a path.
///
/// Both 180-degree orientations satisfy the constraints; the one placing the
/// first point at the smaller angle about the box centre wins, then the one
/// with more y-mass above 0.5.
inline NormalizedPath normalize(std::span<const Vec2> path) {
  if (path.size() < 2) throw Error(ErrorCode::Degenerate, "path needs at least two points");
  for (auto p : path)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw Error(ErrorCode::Degenerate, "path has non-finite coordinates");
  const auto [i, j] = farthest_pair(path);
  const Vec2 p = path[i];
  const Vec2 d = path[j] - p;
  const double len = norm(d);
  if (!(len > 0.0)) throw Error(ErrorCode::Degenerate, "all path points coincide");
  const Vec2 u = d * (1.0 / len);

  std::vector<Vec2> a(path.size());
  for (std::size_t k = 0; k < path.size(); ++k) {
    const Vec2 v = path[k] - p;
    a[k] = {dot(v, u) / len, cross(u, v) / len};
  }
  detail::center_bbox(a);

  std::vector<Vec2> b(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) b[k] = {1.0 - a[k].x, 1.0 - a[k].y};

  const double ang_a = detail::center_angle(a[0]);
  const double ang_b = detail::center_angle(b[0]);
  bool keep_a;
  if (ang_a != ang_b && distance(a[0], {0.5, 0.5}) > 0.0) {
    keep_a = ang_a < ang_b;
  } else {
    double mass = 0.0;
    for (auto q : a) mass += q.y - 0.5;
    keep_a = mass >= 0.0;
  }
  return NormalizedPath{keep_a ? std::move(a) : std::move(b)};
}

/// Unit diameter, unit box width and a centred box. Width and diameter both
/// equal to 1 force the diameter to lie horizontally.
inline bool looks_normalized(std::span<const Vec2> pts) {
  if (pts.size() < 2) return false;
  const auto [i, j] = farthest_pair(pts);
  if (std::abs(distance(pts[i], pts[j]) - 1.0) > kNormalizedTolerance) return false;
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  for (auto p : pts) {
    lo_x = std::min(lo_x, p.x);
    hi_x = std::max(hi_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_y = std::max(hi_y, p.y);
  }
  return std::abs(hi_x - lo_x - 1.0) <= kNormalizedTolerance &&
         std::abs(0.5 * (lo_x + hi_x) - 0.5) <= kNormalizedTolerance &&
         std::abs(0.5 * (lo_y + hi_y) - 0.5) <= kNormalizedTolerance;
}

/// A joint pivoted on a ground joint traces an arc (the crank tip a circle).
inline bool is_arc(const Mechanism& mech, std::size_t joint) {
  if (joint >= mech.size()) throw Error(ErrorCode::Structural, "joint index out of range");
  for (std::size_t u = 0; u < mech.size(); ++u)
    if (mech.connected(joint, u) && mech.is_fixed(u)) return true;
  return false;
}

/// Population variance of point distances from the box centre.
inline double radial_variance(std::span<const Vec2> pts) {
  if (pts.empty()) return 0.0;
  double mean = 0.0;
  for (auto p : pts) mean += distance(p, {0.5, 0.5});
  mean /= static_cast<double>(pts.size());
  double var = 0.0;
  for (auto p : pts) {
    const double e = distance(p, {0.5, 0.5}) - mean;
    var += e * e;
  }
  return var / static_cast<double>(pts.size());
}

inline bool is_circle_variance(double variance) { return variance < kCircleVarianceThreshold; }

inline bool is_circle(const NormalizedPath& npath) {
  return is_circle_variance(radial_variance(npath.points));
}

struct CurveRecord {
  std::uint64_t mechanism_id = 0;
  std::uint32_t joint = 0;
  bool is_arc = false;
  bool is_circle = false;
  NormalizedPath path;

  bool flagged() const noexcept { return is_arc || is_circle; }
  bool operator==(const CurveRecord&) const = default;
};

/// Normalized curve records for every moving joint of a simulated mechanism.
/// Ground joints trace a single point and produce no record.
inline std::vector<CurveRecord> curve_records(std::uint64_t mechanism_id, const Mechanism& mech,
                                              const Trajectory& traj) {
  std::vector<CurveRecord> out;
  for (std::size_t v = 0; v < mech.size(); ++v) {
    if (mech.is_fixed(v)) continue;
    CurveRecord r;
    r.mechanism_id = mechanism_id;
    r.joint = static_cast<std::uint32_t>(v);
    r.path = normalize(traj.path(v));
    r.is_arc = is_arc(mech, v);
    r.is_circle = is_circle(r.path);
    out.push_back(std::move(r));
  }
  return out;
}

/// Keyed keep decision: independent of record order and worker layout.
inline bool curate_keep(const CurveRecord& r, double keep_rate, std::uint64_t seed) {
  if (!r.flagged()) return true;
  return uniform01(hash_key({seed, r.mechanism_id, r.joint})) < keep_rate;
}

inline std::vector<CurveRecord> curate(std::span<const CurveRecord> records,
                                       double keep_rate = kCurationKeepRate,
                                       std::uint64_t seed = 0) {
  std::vector<CurveRecord> out;
  for (const auto& r : records)
    if (curate_keep(r, keep_rate, seed)) out.push_back(r);
  return out;
}

namespace detail {

// Sum over a of min_b |a - b|, stopping once it exceeds `stop_sum`.
inline double directed_sum(const double* ax, const double* ay, std::size_t na, const double* bx,
                           const double* by, std::size_t nb, double stop_sum) {
  double sum = 0.0;
  for (std::size_t i = 0; i < na; ++i) {
    const double px = ax[i], py = ay[i];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nb; ++j) {
      const double dx = bx[j] - px;
      const double dy = by[j] - py;
      const double d2 = dx * dx + dy * dy;
      best = d2 < best ? d2 : best;
    }
    sum += std::sqrt(best);
    if (sum > stop_sum) return std::numeric_limits<double>::infinity();
  }
  return sum;
}

}  // namespace detail

/// Point set in split coordinate arrays, the layout the chamfer kernel scans.
struct PointSoA {
  std::vector<double> x, y;

  PointSoA() = default;
  explicit PointSoA(std::span<const Vec2> pts) : x(pts.size()), y(pts.size()) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      x[i] = pts[i].x;
      y[i] = pts[i].y;
    }
  }
  std::size_t size() const noexcept { return x.size(); }
};

/// Bi-directional chamfer distance with early abandoning: returns +inf as
/// soon as a partial sum proves the distance exceeds `bound`. When the result
/// is finite it equals chamfer() exactly.
inline double chamfer_bounded(const PointSoA& a, const PointSoA& b, double bound) {
  if (a.size() == 0 || b.size() == 0)
    throw Error(ErrorCode::Degenerate, "chamfer of an empty point set");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double inf = std::numeric_limits<double>::infinity();
  // Slack keeps exact ties with the bound from being abandoned by rounding.
  bound = bound * (1.0 + 1e-9);
  const double s1 = detail::directed_sum(a.x.data(), a.y.data(), a.size(), b.x.data(),
                                         b.y.data(), b.size(), bound == inf ? inf : bound * na);
  if (s1 == inf) return inf;
  const double d1 = s1 / na;
  const double s2 = detail::directed_sum(b.x.data(), b.y.data(), b.size(), a.x.data(),
                                         a.y.data(), a.size(),
                                         bound == inf ? inf : (bound - d1) * nb);
  if (s2 == inf) return inf;
  return d1 + s2 / nb;
}

/// Mean nearest-neighbour distance A to B plus B to A.
inline double chamfer(std::span<const Vec2> a, std::span<const Vec2> b) {
  return chamfer_bounded(PointSoA(a), PointSoA(b), std::numeric_limits<double>::infinity());
}

inline double chamfer(const NormalizedPath& a, const NormalizedPath& b) {
  return chamfer(a.points, b.points);
}

/// Sub-mechanism that drives one joint.
struct ReducedMechanism {
  Mechanism mechanism;
  std::vector<std::size_t> original_index;  // reduced index -> original index
  std::size_t joint = 0;                    // the kept joint, reduced index
};

/// Keeps the joint's plan ancestry plus the actuator arm. Only bars the plan
/// uses to place kept joints survive, so every kept joint is solved by the
/// same dyads as in the full mechanism.
inline ReducedMechanism reduce_mechanism(const Mechanism& mech, const SolutionPlan& plan,
                                         std::size_t joint) {
  if (joint >= mech.size() || joint >= plan.coverage.size() || !plan.coverage[joint])
    throw Error(ErrorCode::Structural, "joint not covered by the plan");
  std::vector<bool> keep = plan_ancestry(mech.size(), plan.steps, joint);
  keep[0] = keep[1] = true;

  ReducedMechanism out;
  std::vector<std::size_t> new_index(mech.size(), 0);
  for (std::size_t v = 0; v < mech.size(); ++v) {
    if (!keep[v]) continue;
    new_index[v] = out.original_index.size();
    out.original_index.push_back(v);
  }
  std::vector<std::pair<std::size_t, std::size_t>> edges{{0, 1}};
  for (const auto& st : plan.steps) {
    if (!keep[st.target]) continue;
    edges.emplace_back(new_index[st.target], new_index[st.a]);
    edges.emplace_back(new_index[st.target], new_index[st.b]);
  }
  std::vector<JointType> types;
  std::vector<Vec2> positions;
  for (auto v : out.original_index) {
    types.push_back(mech.type(v));
    positions.push_back(mech.position(v));
  }
  out.mechanism = Mechanism::from_edges(std::move(types), edges).with_positions(std::move(positions));
  out.joint = new_index[joint];
  return out;
}

}  // namespace linkage
