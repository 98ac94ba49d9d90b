#include <gtest/gtest.h>

#include <cmath>

#include "linkage/core.hpp"
#include "linkage/random.hpp"
#include "test_support.hpp"

namespace linkage {
namespace {

using enum JointType;
using testing::make;

TEST(InitialMechanism, SeedShape) {
  const Mechanism m = initial_mechanism();
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m.type(0), Fixed);
  EXPECT_EQ(m.type(1), Actuated);
  EXPECT_EQ(m.type(2), Fixed);
  EXPECT_EQ(m.edges(), (std::vector<testing::Edge>{{0, 1}}));
  EXPECT_EQ(m.position(0), kGroundPivot);
  EXPECT_EQ(m.position(1), kActuatorTip);
  EXPECT_FALSE(is_set(m.position(2)));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_FALSE(m.connected(i, i));
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(m.connected(i, j), m.connected(j, i));
  }
}

TEST(Mobility, Examples) {
  const auto seed = compute_mobility(initial_mechanism());
  EXPECT_EQ(seed.n_links, 2);
  EXPECT_EQ(seed.j1, 1);
  EXPECT_EQ(seed.m, 1);

  const auto fb = compute_mobility(Mechanism::from_edges(
      {Fixed, Actuated, Simple, Fixed}, std::vector<testing::Edge>{{0, 1}, {1, 2}, {2, 3}}));
  EXPECT_EQ(fb.n_links, 4);
  EXPECT_EQ(fb.j1, 4);
  EXPECT_EQ(fb.m, 1);

  // 4 bars + ground, 5 revolute pairs.
  const auto five = compute_mobility(Mechanism::from_edges(
      {Fixed, Actuated, Simple, Simple, Fixed},
      std::vector<testing::Edge>{{0, 1}, {1, 2}, {2, 3}, {3, 4}}));
  EXPECT_EQ(five.n_links, 5);
  EXPECT_EQ(five.j1, 5);
  EXPECT_EQ(five.m, 2);
}

TEST(Mobility, RejectsMalformedAdjacency) {
  std::vector<std::uint8_t> adj(9, 0);
  adj[0 * 3 + 1] = 1;  // missing (1,0)
  const Mechanism asym(adj, {Fixed, Actuated, Fixed}, std::vector<Vec2>(3, unset_point()));
  EXPECT_THROW(compute_mobility(asym), Error);

  std::vector<std::uint8_t> loop(9, 0);
  loop[0 * 3 + 1] = loop[1 * 3 + 0] = 1;
  loop[2 * 3 + 2] = 1;
  const Mechanism self(loop, {Fixed, Actuated, Fixed}, std::vector<Vec2>(3, unset_point()));
  try {
    compute_mobility(self);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Structural);
  }
}

TEST(JointOperator, FourBarFromSeed) {
  const Mechanism m = apply_joint_operator(initial_mechanism(), 1, 2);
  ASSERT_EQ(m.size(), 4u);
  EXPECT_EQ(m.edges(), (std::vector<testing::Edge>{{0, 1}, {1, 3}, {2, 3}}));
  EXPECT_EQ(m.type(3), Simple);
  EXPECT_EQ(compute_mobility(m).m, 1);
}

TEST(JointOperator, FixedOperandsGiveFixedJoint) {
  Mechanism m = apply_ground_operator(initial_mechanism());
  const Mechanism out = apply_joint_operator(m, 2, 3);
  EXPECT_EQ(out.type(4), Fixed);
  EXPECT_EQ(compute_mobility(out).m, compute_mobility(m).m);
  EXPECT_EQ(apply_joint_operator(m, 0, 1).type(4), Simple);
  EXPECT_EQ(apply_joint_operator(m, 1, 2).type(4), Simple);
}

TEST(JointOperator, Errors) {
  const Mechanism m = initial_mechanism();
  try {
    apply_joint_operator(m, 1, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Degenerate);
  }
  try {
    apply_joint_operator(m, 1, 7);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Structural);
  }
}

TEST(JointOperator, PositionIsCarried) {
  const Mechanism m = apply_joint_operator(initial_mechanism(), 1, 2, Vec2{0.3, 0.7});
  EXPECT_EQ(m.position(3), (Vec2{0.3, 0.7}));
  EXPECT_FALSE(is_set(apply_joint_operator(initial_mechanism(), 1, 2).position(3)));
}

TEST(SplitOperators, GroundAndSimple) {
  const Mechanism g = apply_ground_operator(initial_mechanism());
  ASSERT_EQ(g.size(), 4u);
  EXPECT_EQ(g.type(3), Fixed);
  EXPECT_EQ(g.edges(), initial_mechanism().edges());
  EXPECT_EQ(compute_mobility(g).m, 1);

  try {
    apply_simple_operator(initial_mechanism(), 0, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Constraint);
  }
  EXPECT_EQ(compute_mobility(apply_simple_operator(initial_mechanism(), 0, 1)).m, 1);
}

// Random operator sequences: the general joint operator on any pair
// (two-fixed pairs included) mixed with ground joints.
TEST(OperatorProperties, ClosureOverRandomSequences) {
  Rng rng(1234);
  for (int trial = 0; trial < 10000; ++trial) {
    Mechanism m = initial_mechanism();
    const std::size_t target = 4 + uniform_int(rng, 0, 16);
    while (m.size() < target) {
      const std::size_t n = m.size();
      if (uniform01(rng) < 0.25) {
        m = apply_ground_operator(m);
        ASSERT_EQ(m.degree(n), 0u);
      } else {
        const std::size_t i = uniform_int(rng, 0, n - 1);
        std::size_t j = uniform_int(rng, 0, n - 2);
        if (j >= i) ++j;
        const bool both_fixed = m.is_fixed(i) && m.is_fixed(j);
        m = apply_joint_operator(m, i, j);
        ASSERT_EQ(m.degree(n), 2u);  // dyadic at creation
        ASSERT_EQ(m.is_fixed(n), both_fixed);
      }
      ASSERT_EQ(compute_mobility(m).m, 1) << "trial " << trial;
    }
  }
}

Mechanism positioned_four_bar() {
  return testing::four_bar({0.6, 0.8}, {0.9, 0.5});
}

TEST(Validate, ValidFourBar) { EXPECT_TRUE(validate(positioned_four_bar()).empty()); }

TEST(Validate, ArmLength) {
  const Mechanism m = make({Fixed, Actuated, Simple, Fixed}, {{0, 1}, {1, 2}, {2, 3}},
                           {kGroundPivot, {0.7, 0.5}, {0.6, 0.8}, {0.9, 0.5}});
  const auto d = validate(m);
  ASSERT_TRUE(has_diagnostic(d, DiagnosticCode::ActuatorArmLength));
  for (const auto& x : d) {
    if (x.code == DiagnosticCode::ActuatorArmLength) {
      EXPECT_EQ(x.message, "actuator arm length != 0.05");
    }
  }
}

TEST(Validate, MobilityTwo) {
  const Mechanism m = make({Fixed, Actuated, Simple, Simple, Fixed},
                           {{0, 1}, {1, 2}, {2, 3}, {3, 4}},
                           {kGroundPivot, kActuatorTip, {0.6, 0.8}, {0.8, 0.8}, {0.9, 0.5}});
  EXPECT_TRUE(has_diagnostic(validate(m), DiagnosticCode::Mobility));
}

TEST(Validate, ReportsEverything) {
  std::vector<std::uint8_t> adj(16, 0);
  adj[0 * 4 + 1] = 1;  // asymmetric arm
  const Mechanism m(adj, {Simple, Simple, Simple, Fixed},
                    {kGroundPivot, kActuatorTip, {1.5, 0.5}, unset_point()});
  const auto d = validate(m);
  EXPECT_TRUE(has_diagnostic(d, DiagnosticCode::AsymmetricAdjacency));
  EXPECT_TRUE(has_diagnostic(d, DiagnosticCode::GroundPivotType));
  EXPECT_TRUE(has_diagnostic(d, DiagnosticCode::ActuatorType));
  EXPECT_TRUE(has_diagnostic(d, DiagnosticCode::ActuatorCount));
  EXPECT_TRUE(has_diagnostic(d, DiagnosticCode::MissingActuatorArm));
  EXPECT_TRUE(has_diagnostic(d, DiagnosticCode::PositionUnset));
  EXPECT_TRUE(has_diagnostic(d, DiagnosticCode::PositionOutOfBox));
}

TEST(Validate, RotatedArm) {
  const Mechanism m = make({Fixed, Actuated, Simple, Fixed}, {{0, 1}, {1, 2}, {2, 3}},
                           {kGroundPivot, {0.5, 0.55}, {0.6, 0.8}, {0.9, 0.5}});
  const auto d = validate(m);
  EXPECT_TRUE(has_diagnostic(d, DiagnosticCode::ActuatorNotHorizontal));
  EXPECT_FALSE(has_diagnostic(d, DiagnosticCode::ActuatorArmLength));
}

}  // namespace
}  // namespace linkage
