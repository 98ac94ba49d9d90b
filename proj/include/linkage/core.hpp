#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "linkage/error.hpp"
#include "linkage/geometry.hpp"

namespace linkage {

/// Integer codes match the stored feature matrix: 0 fixed, 1 simple, 2 actuated.
enum class JointType : std::uint8_t { Fixed = 0, Simple = 1, Actuated = 2 };

inline const char* to_string(JointType t) {
  switch (t) {
    case JointType::Fixed: return "fixed";
    case JointType::Simple: return "simple";
    case JointType::Actuated: return "actuated";
  }
  return "?";
}

inline constexpr Vec2 kGroundPivot{0.5, 0.5};
inline constexpr Vec2 kActuatorTip{0.55, 0.5};
inline constexpr double kActuatorLength = 0.05;
inline constexpr double kPoseTolerance = 1e-9;

/// A planar revolute-joint linkage as a joint graph.
///
/// Joints are nodes, bars are edges. Joint 0 is the actuator's ground pivot,
/// joint 1 the actuator tip; the actuator arm is edge (0,1). Indices are
/// creation-ordered and never renumbered by the operators. Positions may be
/// unset (NaN) for topologies that have not been through position sampling.
class Mechanism {
 public:
  Mechanism() = default;

  /// `adjacency` is row-major n×n. Only shapes are checked here; semantic
  /// invariants are reported by validate().
  Mechanism(std::vector<std::uint8_t> adjacency, std::vector<JointType> types,
            std::vector<Vec2> positions)
      : n_(types.size()),
        adjacency_(std::move(adjacency)),
        types_(std::move(types)),
        positions_(std::move(positions)) {
    if (adjacency_.size() != n_ * n_ || positions_.size() != n_) {
      throw Error(ErrorCode::Structural,
                  "mechanism arrays disagree on joint count");
    }
  }

  /// Topology-only constructor; every position is unset.
  static Mechanism from_edges(std::vector<JointType> types,
                              std::span<const std::pair<std::size_t, std::size_t>> edges) {
    const std::size_t n = types.size();
    std::vector<std::uint8_t> adj(n * n, 0);
    for (auto [i, j] : edges) {
      if (i >= n || j >= n) throw Error(ErrorCode::Structural, "edge index out of range");
      adj[i * n + j] = 1;
      adj[j * n + i] = 1;
    }
    return Mechanism(std::move(adj), std::move(types), std::vector<Vec2>(n, unset_point()));
  }

  std::size_t size() const noexcept { return n_; }
  bool connected(std::size_t i, std::size_t j) const { return adjacency_[i * n_ + j] != 0; }
  std::span<const std::uint8_t> adjacency() const noexcept { return adjacency_; }
  std::span<const JointType> types() const noexcept { return types_; }
  JointType type(std::size_t i) const { return types_[i]; }
  bool is_fixed(std::size_t i) const { return types_[i] == JointType::Fixed; }
  std::span<const Vec2> positions() const noexcept { return positions_; }
  Vec2 position(std::size_t i) const { return positions_[i]; }

  std::size_t degree(std::size_t i) const {
    std::size_t d = 0;
    for (std::size_t j = 0; j < n_; ++j) d += adjacency_[i * n_ + j] != 0;
    return d;
  }

  std::vector<std::size_t> neighbors(std::size_t i) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n_; ++j)
      if (adjacency_[i * n_ + j]) out.push_back(j);
    return out;
  }

  /// Edges (i, j) with i < j in row-major order.
  std::vector<std::pair<std::size_t, std::size_t>> edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j)
        if (adjacency_[i * n_ + j]) out.emplace_back(i, j);
    return out;
  }

  std::size_t fixed_count() const {
    std::size_t c = 0;
    for (auto t : types_) c += t == JointType::Fixed;
    return c;
  }

  bool has_positions() const {
    for (auto p : positions_)
      if (!is_set(p)) return false;
    return true;
  }

  Mechanism with_positions(std::vector<Vec2> positions) const {
    return Mechanism(adjacency_, types_, std::move(positions));
  }

  bool operator==(const Mechanism& o) const {
    if (n_ != o.n_ || adjacency_ != o.adjacency_ || types_ != o.types_) return false;
    for (std::size_t i = 0; i < n_; ++i) {
      const Vec2 a = positions_[i], b = o.positions_[i];
      if (is_set(a) != is_set(b)) return false;
      if (is_set(a) && !(a == b)) return false;
    }
    return true;
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> adjacency_;
  std::vector<JointType> types_;
  std::vector<Vec2> positions_;
};

/// Mobility terms m = 3(n_links - 1) - 2 j1 for lower pairs only.
struct MobilityCount {
  int n_links = 0;
  int j1 = 0;
  int m = 0;
};

/// The 3-joint seed: ground pivot, actuator tip and one floating ground joint
/// whose position is left for sampling.
inline Mechanism initial_mechanism() {
  const std::pair<std::size_t, std::size_t> arm[] = {{0, 1}};
  Mechanism topo = Mechanism::from_edges(
      {JointType::Fixed, JointType::Actuated, JointType::Fixed}, arm);
  return topo.with_positions({kGroundPivot, kActuatorTip, unset_point()});
}

namespace detail {

inline void check_structure(const Mechanism& mech) {
  const std::size_t n = mech.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (mech.connected(i, i))
      throw Error(ErrorCode::Structural, "self-loop on joint " + std::to_string(i));
    for (std::size_t j = i + 1; j < n; ++j)
      if (mech.connected(i, j) != mech.connected(j, i))
        throw Error(ErrorCode::Structural, "asymmetric adjacency at (" + std::to_string(i) +
                                               "," + std::to_string(j) + ")");
  }
}

// A bar joining two ground joints is part of the frame: it is neither a
// moving link nor a pair.
inline bool frame_bar(const Mechanism& mech, std::size_t i, std::size_t j) {
  return mech.is_fixed(i) && mech.is_fixed(j);
}

}  // namespace detail

/// Mobility of the joint graph. A joint shared by `members` rigid bodies
/// contributes members - 1 lower pairs; a fixed joint counts the frame as one
/// member.
inline MobilityCount compute_mobility(const Mechanism& mech) {
  detail::check_structure(mech);
  const std::size_t n = mech.size();
  int bars = 0;
  int j1 = 0;
  for (std::size_t v = 0; v < n; ++v) {
    int members = mech.is_fixed(v) ? 1 : 0;
    for (std::size_t u = 0; u < n; ++u) {
      if (!mech.connected(v, u) || detail::frame_bar(mech, v, u)) continue;
      ++members;
      if (u > v) ++bars;
    }
    if (members > 0) j1 += members - 1;
  }
  MobilityCount out;
  out.n_links = bars + 1;
  out.j1 = j1;
  out.m = 3 * (out.n_links - 1) - 2 * out.j1;
  return out;
}

/// Adds joint k = n joined by bars to i and j. The new joint is fixed only
/// when both operands are fixed.
inline Mechanism apply_joint_operator(const Mechanism& mech, std::size_t i, std::size_t j,
                                      std::optional<Vec2> pos = std::nullopt) {
  const std::size_t n = mech.size();
  if (i >= n || j >= n)
    throw Error(ErrorCode::Structural, "operator index out of range");
  if (i == j) throw Error(ErrorCode::Degenerate, "operator needs two distinct joints");

  const std::size_t k = n;
  const std::size_t m = n + 1;
  std::vector<std::uint8_t> adj(m * m, 0);
  const auto src = mech.adjacency();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) adj[r * m + c] = src[r * n + c];
  adj[k * m + i] = adj[i * m + k] = 1;
  adj[k * m + j] = adj[j * m + k] = 1;

  std::vector<JointType> types(mech.types().begin(), mech.types().end());
  types.push_back(mech.is_fixed(i) && mech.is_fixed(j) ? JointType::Fixed
                                                       : JointType::Simple);
  std::vector<Vec2> positions(mech.positions().begin(), mech.positions().end());
  positions.push_back(pos.value_or(unset_point()));
  return Mechanism(std::move(adj), std::move(types), std::move(positions));
}

/// Joint operator restricted to pairs that are not both fixed.
inline Mechanism apply_simple_operator(const Mechanism& mech, std::size_t i, std::size_t j,
                                       std::optional<Vec2> pos = std::nullopt) {
  if (i < mech.size() && j < mech.size() && mech.is_fixed(i) && mech.is_fixed(j))
    throw Error(ErrorCode::Constraint, "simple operator applied to two fixed joints");
  return apply_joint_operator(mech, i, j, pos);
}

/// Adds an isolated ground joint.
inline Mechanism apply_ground_operator(const Mechanism& mech,
                                       std::optional<Vec2> pos = std::nullopt) {
  const std::size_t n = mech.size();
  const std::size_t m = n + 1;
  std::vector<std::uint8_t> adj(m * m, 0);
  const auto src = mech.adjacency();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) adj[r * m + c] = src[r * n + c];
  std::vector<JointType> types(mech.types().begin(), mech.types().end());
  types.push_back(JointType::Fixed);
  std::vector<Vec2> positions(mech.positions().begin(), mech.positions().end());
  positions.push_back(pos.value_or(unset_point()));
  return Mechanism(std::move(adj), std::move(types), std::move(positions));
}

enum class DiagnosticCode {
  TooFewJoints,
  AsymmetricAdjacency,
  SelfLoop,
  GroundPivotType,
  ActuatorType,
  ActuatorCount,
  MissingActuatorArm,
  PositionUnset,
  PositionOutOfBox,
  GroundPivotPosition,
  ActuatorArmLength,
  ActuatorNotHorizontal,
  Mobility,
};

struct Diagnostic {
  DiagnosticCode code;
  std::string message;
};

/// Every violated mechanism invariant; empty means valid.
inline std::vector<Diagnostic> validate(const Mechanism& mech) {
  std::vector<Diagnostic> out;
  const std::size_t n = mech.size();
  auto add = [&](DiagnosticCode c, std::string msg) { out.push_back({c, std::move(msg)}); };

  if (n < 3) {
    add(DiagnosticCode::TooFewJoints, "mechanism needs at least 3 joints");
    return out;
  }
  bool structural = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (mech.connected(i, i)) {
      add(DiagnosticCode::SelfLoop, "self-loop on joint " + std::to_string(i));
      structural = false;
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      if (mech.connected(i, j) != mech.connected(j, i)) {
        add(DiagnosticCode::AsymmetricAdjacency,
            "asymmetric adjacency at (" + std::to_string(i) + "," + std::to_string(j) + ")");
        structural = false;
      }
    }
  }
  if (!mech.is_fixed(0)) add(DiagnosticCode::GroundPivotType, "joint 0 must be fixed");
  if (mech.type(1) != JointType::Actuated)
    add(DiagnosticCode::ActuatorType, "joint 1 must be actuated");
  std::size_t actuated = 0;
  for (auto t : mech.types()) actuated += t == JointType::Actuated;
  if (actuated != 1)
    add(DiagnosticCode::ActuatorCount,
        "expected exactly one actuated joint, found " + std::to_string(actuated));
  if (!mech.connected(0, 1) || !mech.connected(1, 0))
    add(DiagnosticCode::MissingActuatorArm, "actuator arm (0,1) missing");

  bool positioned = true;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 p = mech.position(i);
    if (!is_set(p)) {
      add(DiagnosticCode::PositionUnset, "position of joint " + std::to_string(i) + " unset");
      positioned = false;
    } else if (p.x < 0.0 || p.x > 1.0 || p.y < 0.0 || p.y > 1.0) {
      add(DiagnosticCode::PositionOutOfBox,
          "position of joint " + std::to_string(i) + " outside the unit box");
    }
  }
  if (positioned) {
    const Vec2 p0 = mech.position(0), p1 = mech.position(1);
    if (distance(p0, kGroundPivot) > kPoseTolerance)
      add(DiagnosticCode::GroundPivotPosition, "joint 0 not at (0.5, 0.5)");
    if (std::abs(distance(p0, p1) - kActuatorLength) > kPoseTolerance)
      add(DiagnosticCode::ActuatorArmLength, "actuator arm length != 0.05");
    if (std::abs(p1.y - p0.y) > kPoseTolerance || p1.x < p0.x)
      add(DiagnosticCode::ActuatorNotHorizontal, "actuator arm not horizontal along +x");
  }
  if (structural && compute_mobility(mech).m != 1)
    add(DiagnosticCode::Mobility, "mobility != 1");
  return out;
}

inline bool has_diagnostic(const std::vector<Diagnostic>& diags, DiagnosticCode code) {
  for (const auto& d : diags)
    if (d.code == code) return true;
  return false;
}

}  // namespace linkage
