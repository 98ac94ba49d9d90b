#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "linkage/core.hpp"

namespace linkage {

/// Intersection discriminant tolerance, box units.
inline constexpr double kLockTolerance = 1e-9;
/// |cross| at or below this is a collinear dyad when compiling a plan.
inline constexpr double kCollinearTolerance = 1e-12;
inline constexpr std::size_t kLowFidelitySteps = 50;
inline constexpr std::size_t kHighFidelitySteps = 200;

/// One dyad solve: `target` sits on circles about `a` and `b`.
struct PlanStep {
  std::size_t target = 0;
  std::size_t a = 0;
  std::size_t b = 0;
  bool operator==(const PlanStep&) const = default;
};

/// Per-variant dyad geometry taken from an initial pose.
struct StepGeometry {
  double r_a = 0.0;
  double r_b = 0.0;
  double branch = 1.0;  // +1 or -1
};

/// Compiled solution order for one mechanism.
///
/// `steps` depends only on the topology and is shared by every position
/// variant; `geometry` holds link lengths and branch signs of the variant the
/// plan was compiled from.
struct SolutionPlan {
  std::size_t joint_count = 0;
  std::vector<PlanStep> steps;
  std::vector<StepGeometry> geometry;
  std::vector<bool> coverage;  // joints solvable by the plan, seeds included

  /// Step index solving `joint`, if any.
  std::optional<std::size_t> step_of(std::size_t joint) const {
    for (std::size_t s = 0; s < steps.size(); ++s)
      if (steps[s].target == joint) return s;
    return std::nullopt;
  }
};

namespace detail {

inline bool is_seed(const Mechanism& mech, std::size_t v) {
  return mech.type(v) != JointType::Simple;
}

struct DyadSolution {
  double x = 0.0;
  double y = 0.0;
  bool locked = false;
  bool singular = false;
};

// Shared by every solver path so scalar and batch results agree bitwise.
// Flag is the caller's lane type; the batch kernel uses double so
// the loop vectorizes alongside the doubles.
template <typename Flag>
inline void dyad_core(double ax, double ay, double bx, double by, double ra, double rb,
                      double branch, double& x, double& y, Flag& locked, Flag& singular) {
  // Squared form: one division and one square root per solve. `k` is the
  // foot of the target along a->b and `w` its offset, both in units of |ab|.
  const double dx = bx - ax;
  const double dy = by - ay;
  const double d2 = dx * dx + dy * dy;
  const double outer = ra + rb + kLockTolerance;
  const double inner = std::abs(ra - rb) - kLockTolerance;
  const double inner2 = inner > 0.0 ? inner * inner : -1.0;
  constexpr double tol2 = kLockTolerance * kLockTolerance;
  locked = (d2 > outer * outer || d2 < inner2 || d2 < tol2) ? Flag(1) : Flag(0);
  const double inv = 1.0 / d2;
  const double k = 0.5 * (d2 + ra * ra - rb * rb) * inv;
  const double w2 = ra * ra * inv - k * k;
  const double w = std::sqrt(w2 > 0.0 ? w2 : 0.0);
  x = ax + k * dx - branch * w * dy;
  y = ay + k * dy + branch * w * dx;
  singular = w * w * d2 < tol2 ? Flag(1) : Flag(0);
}

/// One dyad step over a row of actuator steps. `locked` receives this step's
/// flags; `lock_any` and `sing_any` accumulate across steps.
inline void dyad_row(const double* __restrict ax, const double* __restrict ay,
                     const double* __restrict bx, const double* __restrict by,
                     double* __restrict tx, double* __restrict ty, double* __restrict locked,
                     double* __restrict lock_any, double* __restrict sing_any, StepGeometry geo,
                     std::size_t T) {
#if defined(__GNUC__) && !defined(__clang__)
#pragma GCC ivdep
#endif
  for (std::size_t t = 0; t < T; ++t) {
    double l, sg;
    dyad_core(ax[t], ay[t], bx[t], by[t], geo.r_a, geo.r_b, geo.branch, tx[t], ty[t], l, sg);
    locked[t] = l;
    lock_any[t] += l;
    sing_any[t] += sg;
  }
}

inline DyadSolution solve_dyad(double ax, double ay, double bx, double by, double ra,
                               double rb, double branch) {
  DyadSolution s;
  dyad_core(ax, ay, bx, by, ra, rb, branch, s.x, s.y, s.locked, s.singular);
  return s;
}

/// (cos, sin) of the crank rotation at step t of T.
inline Vec2 step_rotation(std::size_t t, std::size_t T) {
  const double phi = 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(T);
  return {std::cos(phi), std::sin(phi)};
}

/// Crank tip after rotating the initial crank vector about the ground pivot.
inline Vec2 crank_tip(Vec2 pivot, Vec2 arm, Vec2 rot) {
  return {pivot.x + (arm.x * rot.x - arm.y * rot.y), pivot.y + (arm.x * rot.y + arm.y * rot.x)};
}

}  // namespace detail

/// Two-known-neighbours walk over the topology. Seeds are every fixed joint
/// and the actuated joint; each round solves the lowest-index unknown joint
/// with at least two known neighbours, using its first two known neighbours.
inline std::vector<PlanStep> compile_order(const Mechanism& mech) {
  const std::size_t n = mech.size();
  std::vector<bool> known(n, false);
  std::size_t remaining = n;
  for (std::size_t v = 0; v < n; ++v) {
    if (detail::is_seed(mech, v)) {
      known[v] = true;
      --remaining;
    }
  }
  std::vector<PlanStep> steps;
  steps.reserve(remaining);
  while (remaining > 0) {
    bool progressed = false;
    for (std::size_t v = 0; v < n && !progressed; ++v) {
      if (known[v]) continue;
      std::size_t found = 0;
      std::size_t pick[2] = {0, 0};
      for (std::size_t u = 0; u < n && found < 2; ++u)
        if (known[u] && mech.connected(v, u)) pick[found++] = u;
      if (found == 2) {
        steps.push_back({v, pick[0], pick[1]});
        known[v] = true;
        --remaining;
        progressed = true;
      }
    }
    if (!progressed)
      throw Error(ErrorCode::NotDyadic, "mechanism is not dyadically solvable (" +
                                            std::to_string(remaining) +
                                            " joints unreachable)");
  }
  return steps;
}

/// Link lengths and branch signs of `steps` at `positions`. Returns the index
/// of the first collinear step instead when one exists.
inline std::optional<std::size_t> derive_geometry(std::span<const PlanStep> steps,
                                                  std::span<const Vec2> positions,
                                                  std::vector<StepGeometry>& out) {
  out.resize(steps.size());
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const Vec2 pa = positions[steps[s].a];
    const Vec2 pb = positions[steps[s].b];
    const Vec2 pt = positions[steps[s].target];
    const double c = cross(pb - pa, pt - pa);
    if (!(std::abs(c) > kCollinearTolerance)) return s;
    out[s] = {distance(pa, pt), distance(pb, pt), c > 0.0 ? 1.0 : -1.0};
  }
  return std::nullopt;
}

/// Solution plan for a positioned mechanism.
inline SolutionPlan compile_plan(const Mechanism& mech) {
  detail::check_structure(mech);
  SolutionPlan plan;
  plan.joint_count = mech.size();
  plan.steps = compile_order(mech);
  plan.coverage.assign(mech.size(), true);
  if (!mech.has_positions())
    throw Error(ErrorCode::Structural, "compile_plan needs every joint positioned");
  if (auto bad = derive_geometry(plan.steps, mech.positions(), plan.geometry))
    throw Error(ErrorCode::Degenerate,
                "collinear dyad at initial pose for joint " +
                    std::to_string(plan.steps[*bad].target));
  return plan;
}

/// Circle-circle intersection about `pa` and `pb`; nullopt when the circles
/// do not meet (locking).
inline std::optional<Vec2> dyad_solve(Vec2 pa, Vec2 pb, double ra, double rb, double branch) {
  const auto s = detail::solve_dyad(pa.x, pa.y, pb.x, pb.y, ra, rb, branch);
  if (s.locked) return std::nullopt;
  return Vec2{s.x, s.y};
}

/// Joint positions over one actuator revolution, stored joint-major.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::size_t joints, std::size_t steps)
      : n_(joints), T_(steps), points_(joints * steps) {}

  std::size_t joints() const noexcept { return n_; }
  std::size_t steps() const noexcept { return T_; }
  Vec2& at(std::size_t joint, std::size_t t) { return points_[joint * T_ + t]; }
  Vec2 at(std::size_t joint, std::size_t t) const { return points_[joint * T_ + t]; }
  std::span<const Vec2> path(std::size_t joint) const {
    return std::span<const Vec2>(points_).subspan(joint * T_, T_);
  }
  std::span<const Vec2> data() const noexcept { return points_; }
  std::span<Vec2> data() noexcept { return points_; }

  /// Steps where some dyad passed within tolerance of tangency.
  std::size_t singular_steps = 0;

 private:
  std::size_t n_ = 0;
  std::size_t T_ = 0;
  std::vector<Vec2> points_;
};

struct Locking {
  std::size_t step = 0;
  std::size_t joint = 0;
  bool degenerate = false;  // collinear dyad at the initial pose
  bool operator==(const Locking&) const = default;
};

struct SimOutcome {
  Trajectory trajectory;  // empty when locking
  std::optional<Locking> locking;

  bool ok() const noexcept { return !locking.has_value(); }
};

/// Replays `plan` over T equally spaced actuator angles starting at the
/// initial pose.
inline SimOutcome simulate(const Mechanism& mech, const SolutionPlan& plan, std::size_t T) {
  const std::size_t n = mech.size();
  if (T == 0) throw Error(ErrorCode::Structural, "simulate needs T >= 1");
  if (plan.joint_count != n || plan.geometry.size() != plan.steps.size())
    throw Error(ErrorCode::Structural, "plan does not match mechanism");
  const auto p = mech.positions();
  const Vec2 pivot = p[0];
  const Vec2 arm = p[1] - p[0];

  SimOutcome out;
  Trajectory traj(n, T);
  std::vector<Vec2> cur(p.begin(), p.end());
  for (std::size_t t = 0; t < T; ++t) {
    cur[1] = detail::crank_tip(pivot, arm, detail::step_rotation(t, T));
    bool singular = false;
    for (std::size_t s = 0; s < plan.steps.size(); ++s) {
      const PlanStep& st = plan.steps[s];
      const StepGeometry& g = plan.geometry[s];
      const auto r = detail::solve_dyad(cur[st.a].x, cur[st.a].y, cur[st.b].x, cur[st.b].y,
                                        g.r_a, g.r_b, g.branch);
      if (r.locked) {
        out.locking = Locking{t, st.target};
        return out;
      }
      singular = singular || r.singular;
      cur[st.target] = {r.x, r.y};
    }
    traj.singular_steps += singular;
    for (std::size_t v = 0; v < n; ++v) traj.at(v, t) = cur[v];
  }
  out.trajectory = std::move(traj);
  return out;
}

/// Reference solver without plan reuse: the two-known-neighbours search is
/// redone at every actuator step. Results match simulate().
inline SimOutcome simulate_naive(const Mechanism& mech, std::size_t T) {
  const std::size_t n = mech.size();
  if (T == 0) throw Error(ErrorCode::Structural, "simulate needs T >= 1");
  const auto p0 = mech.positions();
  const Vec2 pivot = p0[0];
  const Vec2 arm = p0[1] - p0[0];

  SimOutcome out;
  Trajectory traj(n, T);
  std::vector<Vec2> cur(p0.begin(), p0.end());
  std::vector<bool> known(n);
  for (std::size_t t = 0; t < T; ++t) {
    cur[1] = detail::crank_tip(pivot, arm, detail::step_rotation(t, T));
    std::size_t remaining = n;
    for (std::size_t v = 0; v < n; ++v) {
      known[v] = detail::is_seed(mech, v);
      remaining -= known[v];
    }
    bool singular = false;
    while (remaining > 0) {
      bool progressed = false;
      for (std::size_t v = 0; v < n && !progressed; ++v) {
        if (known[v]) continue;
        std::size_t found = 0;
        std::size_t pick[2] = {0, 0};
        for (std::size_t u = 0; u < n && found < 2; ++u)
          if (known[u] && mech.connected(v, u)) pick[found++] = u;
        if (found < 2) continue;
        const Vec2 a0 = p0[pick[0]], b0 = p0[pick[1]], v0 = p0[v];
        const double c = cross(b0 - a0, v0 - a0);
        if (!(std::abs(c) > kCollinearTolerance)) {
          out.locking = Locking{0, v, true};
          return out;
        }
        const auto r = detail::solve_dyad(cur[pick[0]].x, cur[pick[0]].y, cur[pick[1]].x,
                                          cur[pick[1]].y, distance(a0, v0), distance(b0, v0),
                                          c > 0.0 ? 1.0 : -1.0);
        if (r.locked) {
          out.locking = Locking{t, v};
          return out;
        }
        singular = singular || r.singular;
        cur[v] = {r.x, r.y};
        known[v] = true;
        --remaining;
        progressed = true;
      }
      if (!progressed)
        throw Error(ErrorCode::NotDyadic, "mechanism is not dyadically solvable");
    }
    traj.singular_steps += singular;
    for (std::size_t v = 0; v < n; ++v) traj.at(v, t) = cur[v];
  }
  out.trajectory = std::move(traj);
  return out;
}

/// Low-fidelity pass first; the high-fidelity pass only runs on survivors.
/// `passes`, when given, receives the number of simulations run.
inline bool check_feasible(const Mechanism& mech, const SolutionPlan& plan,
                           std::size_t* passes = nullptr) {
  if (passes) *passes = 1;
  if (!simulate(mech, plan, kLowFidelitySteps).ok()) return false;
  if (passes) *passes = 2;
  return simulate(mech, plan, kHighFidelitySteps).ok();
}

/// Batch solver for many position candidates of one topology.
///
/// Candidates are solved one after another in a reused workspace; within a
/// candidate every dyad step runs over all actuator steps as one flat loop.
/// The crank rotation table is shared by the batch.
class BatchSimulator {
 public:
  BatchSimulator(std::size_t joints, std::vector<PlanStep> steps)
      : n_(joints), steps_(std::move(steps)) {}

  explicit BatchSimulator(const Mechanism& topology)
      : BatchSimulator(topology.size(), compile_order(topology)) {}

  std::size_t joints() const noexcept { return n_; }
  std::span<const PlanStep> steps() const noexcept { return steps_; }

  /// Locking verdict per candidate; `positions0` is B×n row-major.
  std::vector<std::optional<Locking>> classify(std::span<const Vec2> positions0,
                                               std::size_t T) {
    std::vector<std::optional<Locking>> out;
    run(positions0, T, [&](std::size_t, const std::optional<Locking>& v) { out.push_back(v); });
    return out;
  }

  /// Full outcomes per candidate, trajectories included for non-locking ones.
  std::vector<SimOutcome> simulate(std::span<const Vec2> positions0, std::size_t T) {
    std::vector<SimOutcome> out;
    stream(positions0, T, [&](std::size_t, SimOutcome&& o) { out.push_back(std::move(o)); });
    return out;
  }

  /// Hands each candidate's outcome to `on_outcome(b, SimOutcome&&)` as soon
  /// as it is solved.
  template <typename OnOutcome>
  void stream(std::span<const Vec2> positions0, std::size_t T, OnOutcome&& on_outcome) {
    run(positions0, T, [&](std::size_t b, const std::optional<Locking>& v) {
      SimOutcome o;
      if (v) {
        o.locking = v;
      } else {
        Trajectory traj(n_, T);
        for (std::size_t j = 0; j < n_; ++j)
          for (std::size_t t = 0; t < T; ++t) traj.at(j, t) = {xs_[j * T + t], ys_[j * T + t]};
        for (std::size_t t = 0; t < T; ++t) traj.singular_steps += sing_any_[t] != 0.0;
        o.trajectory = std::move(traj);
      }
      on_outcome(b, std::move(o));
    });
  }

 private:
  template <typename OnCandidate>
  void run(std::span<const Vec2> positions0, std::size_t T, OnCandidate&& on_candidate) {
    if (T == 0) throw Error(ErrorCode::Structural, "simulate needs T >= 1");
    if (positions0.size() % n_ != 0)
      throw Error(ErrorCode::Structural, "batch positions not a multiple of joint count");
    const std::size_t B = positions0.size() / n_;
    const std::size_t S = steps_.size();
    xs_.resize(n_ * T);
    ys_.resize(n_ * T);
    lock_rows_.resize(S * T);
    lock_any_.resize(T);
    sing_any_.resize(T);
    if (rot_x_.size() != T) {
      rot_x_.resize(T);
      rot_y_.resize(T);
      for (std::size_t t = 0; t < T; ++t) {
        const Vec2 r = detail::step_rotation(t, T);
        rot_x_[t] = r.x;
        rot_y_[t] = r.y;
      }
    }
    std::vector<bool> solved(n_, false);
    for (const auto& st : steps_) solved[st.target] = true;

    std::vector<StepGeometry> geo;
    double* X = xs_.data();
    double* Y = ys_.data();
    for (std::size_t b = 0; b < B; ++b) {
      const auto pos = positions0.subspan(b * n_, n_);
      std::optional<Locking> verdict;
      // Collinear initial poses are rejected; dummy geometry keeps the loops uniform.
      if (auto bad = derive_geometry(steps_, pos, geo)) {
        verdict = Locking{0, steps_[*bad].target, true};
        geo.assign(S, StepGeometry{1.0, 1.0, 1.0});
      }
      for (std::size_t v = 0; v < n_; ++v) {
        if (solved[v] || v == 1) continue;
        std::fill_n(X + v * T, T, pos[v].x);
        std::fill_n(Y + v * T, T, pos[v].y);
      }
      const Vec2 pivot = pos[0];
      const Vec2 arm = pos[1] - pos[0];
      for (std::size_t t = 0; t < T; ++t) {
        const Vec2 tip = detail::crank_tip(pivot, arm, {rot_x_[t], rot_y_[t]});
        X[T + t] = tip.x;
        Y[T + t] = tip.y;
      }
      std::fill(lock_any_.begin(), lock_any_.end(), 0.0);
      std::fill(sing_any_.begin(), sing_any_.end(), 0.0);
      for (std::size_t s = 0; s < S; ++s) {
        const PlanStep st = steps_[s];
        // Target rows never overlap source rows.
        detail::dyad_row(X + st.a * T, Y + st.a * T, X + st.b * T, Y + st.b * T,
                         X + st.target * T, Y + st.target * T, &lock_rows_[s * T],
                         lock_any_.data(), sing_any_.data(), geo[s], T);
      }
      if (!verdict) {
        for (std::size_t t = 0; t < T && !verdict; ++t) {
          if (lock_any_[t] == 0.0) continue;
          for (std::size_t s = 0; s < S; ++s) {
            if (lock_rows_[s * T + t] != 0.0) {
              verdict = Locking{t, steps_[s].target};
              break;
            }
          }
        }
      }
      on_candidate(b, verdict);
    }
  }

  std::size_t n_;
  std::vector<PlanStep> steps_;
  std::vector<double> xs_, ys_;  // one candidate: [joint][t]
  std::vector<double> lock_rows_, lock_any_, sing_any_;
  std::vector<double> rot_x_, rot_y_;
};

/// B candidates of one topology; `positions0` is B×n row-major.
inline std::vector<SimOutcome> simulate_batch(std::span<const Vec2> positions0,
                                              const Mechanism& topology,
                                              std::span<const PlanStep> steps, std::size_t T) {
  BatchSimulator sim(topology.size(), std::vector<PlanStep>(steps.begin(), steps.end()));
  return sim.simulate(positions0, T);
}

}  // namespace linkage
