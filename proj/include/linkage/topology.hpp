#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "linkage/core.hpp"
#include "linkage/random.hpp"
#include "linkage/solver.hpp"

namespace linkage {

/// Joints the plan needs to place `joint`: the joint itself, its dyad
/// parents recursively, and the ground pivot for the actuator tip.
inline std::vector<bool> plan_ancestry(std::size_t joint_count, std::span<const PlanStep> steps,
                                       std::size_t joint) {
  std::vector<bool> in(joint_count, false);
  std::vector<std::size_t> stack{joint};
  std::vector<std::ptrdiff_t> step_of(joint_count, -1);
  for (std::size_t s = 0; s < steps.size(); ++s)
    step_of[steps[s].target] = static_cast<std::ptrdiff_t>(s);
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    if (in[v]) continue;
    in[v] = true;
    if (v == 1) {
      stack.push_back(0);
    } else if (step_of[v] >= 0) {
      stack.push_back(steps[static_cast<std::size_t>(step_of[v])].a);
      stack.push_back(steps[static_cast<std::size_t>(step_of[v])].b);
    }
  }
  return in;
}

/// The seed's second fixed joint needs a dependent other than the final
/// joint, so no 4-joint topology passes the rules.
inline constexpr std::size_t kMinTopologyJoints = 5;

enum class TopologyRejection { None, NotDyadic, Reducible, GroundedOutput };

/// Checks the generated-topology rules: dyadic plan, last plan joint depends
/// on every joint, and the last plan joint has no fixed neighbour.
inline TopologyRejection check_topology_rules(const Mechanism& topo) {
  std::vector<PlanStep> steps;
  try {
    steps = compile_order(topo);
  } catch (const Error&) {
    return TopologyRejection::NotDyadic;
  }
  if (steps.empty()) return TopologyRejection::Reducible;
  const std::size_t last = steps.back().target;
  const auto anc = plan_ancestry(topo.size(), steps, last);
  for (bool b : anc)
    if (!b) return TopologyRejection::Reducible;
  for (std::size_t u : topo.neighbors(last))
    if (topo.is_fixed(u)) return TopologyRejection::GroundedOutput;
  return TopologyRejection::None;
}

struct TopologySample {
  Mechanism topology;
  std::size_t resamples = 0;  // operator sequences rejected before this one
};

/// One random operator sequence grown from the seed mechanism to `n` joints.
///
/// Each step adds a ground joint with `ground_probability`, otherwise joins a
/// new joint to a uniformly chosen pair that is not two fixed joints. Choices
/// are restricted to those that can still end with a single joint depending on
/// every other one: a joint nothing has been attached to yet is a sink, each
/// operation removes at most one sink net, and the final operation must join
/// the last two sinks, neither of them fixed.
inline Mechanism grow_topology(Rng& rng, std::size_t n, double ground_probability) {
  Mechanism mech = initial_mechanism();
  // Joint 0 carries the actuator tip, so it starts with a dependent.
  std::vector<bool> sink{false, true, true};
  std::size_t sinks = 2;
  std::size_t fixed_sinks = 1;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;

  auto feasible = [&](std::size_t sinks_after, std::size_t fixed_after, std::size_t left) {
    if (left == 0) return sinks_after == 1 && fixed_after == 0;
    return sinks_after <= left + 1 && fixed_after + 1 <= left + (fixed_after == 0);
  };

  while (mech.size() < n) {
    const std::size_t left = n - mech.size() - 1;  // operations after this one
    const std::size_t size = mech.size();
    if (feasible(sinks + 1, fixed_sinks + 1, left) && uniform01(rng) < ground_probability) {
      mech = apply_ground_operator(mech);
      sink.push_back(true);
      ++sinks;
      ++fixed_sinks;
      continue;
    }
    pairs.clear();
    for (std::size_t i = 0; i < size; ++i) {
      for (std::size_t j = i + 1; j < size; ++j) {
        if (mech.is_fixed(i) && mech.is_fixed(j)) continue;
        if (left == 0 && (mech.is_fixed(i) || mech.is_fixed(j))) continue;
        const std::size_t consumed = sink[i] + sink[j];
        const std::size_t fixed_consumed =
            (sink[i] && mech.is_fixed(i)) + (sink[j] && mech.is_fixed(j));
        if (feasible(sinks + 1 - consumed, fixed_sinks - fixed_consumed, left))
          pairs.emplace_back(i, j);
      }
    }
    if (pairs.empty()) break;  // dead end; the caller resamples
    const auto [i, j] = pairs[uniform_int(rng, 0, pairs.size() - 1)];
    mech = apply_simple_operator(mech, i, j);
    sinks = sinks + 1 - sink[i] - sink[j];
    fixed_sinks -= (sink[i] && mech.is_fixed(i)) + (sink[j] && mech.is_fixed(j));
    sink[i] = false;
    sink[j] = false;
    sink.push_back(true);
  }
  return mech.with_positions(std::vector<Vec2>(mech.size(), unset_point()));
}

/// Rejection-samples a topology of `n` joints satisfying every topology rule.
inline TopologySample sample_topology(Rng& rng, std::size_t n, double ground_probability = 0.25,
                                      std::size_t budget = 1'000'000) {
  if (n < kMinTopologyJoints)
    throw Error(ErrorCode::Constraint, "topologies need at least 5 joints");
  for (std::size_t attempt = 0; attempt < budget; ++attempt) {
    Mechanism topo = grow_topology(rng, n, ground_probability);
    if (topo.size() == n && check_topology_rules(topo) == TopologyRejection::None)
      return {std::move(topo), attempt};
  }
  throw Error(ErrorCode::Budget, "topology resample budget exhausted for n=" + std::to_string(n));
}

/// Candidate initial pose: the actuator arm is pinned at its canonical pose,
/// every other joint is uniform on the unit box.
inline std::vector<Vec2> sample_positions(std::size_t n, Rng& rng) {
  std::vector<Vec2> p(n);
  p[0] = kGroundPivot;
  p[1] = kActuatorTip;
  for (std::size_t i = 2; i < n; ++i) {
    const double x = uniform01(rng);
    const double y = uniform01(rng);
    p[i] = {x, y};
  }
  return p;
}

inline std::vector<Vec2> sample_positions(const Mechanism& topology, Rng& rng) {
  return sample_positions(topology.size(), rng);
}

}  // namespace linkage
