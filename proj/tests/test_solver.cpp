#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include "linkage/solver.hpp"
#include "test_support.hpp"

namespace linkage {
namespace {

using enum JointType;
using testing::four_bar;
using testing::make;

TEST(Dyad, UnitCircles) {
  const auto p = dyad_solve({0, 0}, {1, 0}, 1.0, 1.0, 1.0);
  ASSERT_TRUE(p);
  EXPECT_NEAR(p->x, 0.5, 1e-15);
  EXPECT_NEAR(p->y, std::sqrt(3.0) / 2.0, 1e-15);
  const auto q = dyad_solve({0, 0}, {1, 0}, 1.0, 1.0, -1.0);
  ASSERT_TRUE(q);
  EXPECT_NEAR(q->y, -std::sqrt(3.0) / 2.0, 1e-15);
}

TEST(Dyad, Locking) {
  EXPECT_FALSE(dyad_solve({0, 0}, {1, 0}, 0.4, 0.4, 1.0));
  EXPECT_FALSE(dyad_solve({0, 0}, {0.1, 0}, 1.0, 0.5, 1.0));  // one circle inside the other
  EXPECT_FALSE(dyad_solve({0.3, 0.3}, {0.3, 0.3}, 0.2, 0.2, 1.0));
}

TEST(Dyad, Tangency) {
  const auto p = dyad_solve({0, 0}, {1, 0}, 0.5, 0.5, 1.0);
  ASSERT_TRUE(p);
  EXPECT_NEAR(p->x, 0.5, 1e-15);
  EXPECT_NEAR(p->y, 0.0, 1e-7);
  EXPECT_TRUE(dyad_solve({0, 0}, {1, 0}, 0.5, 0.5 - 0.5e-9, 1.0));
  EXPECT_FALSE(dyad_solve({0, 0}, {1, 0}, 0.5, 0.5 - 2e-9, 1.0));
}

TEST(CompileOrder, FourBar) {
  const auto steps = compile_order(four_bar({0.6, 0.75}, {0.8, 0.5}));
  ASSERT_EQ(steps.size(), 1u);
  EXPECT_EQ(steps[0], (PlanStep{2, 1, 3}));
}

TEST(CompileOrder, NotDyadic) {
  const Mechanism five = make({Fixed, Actuated, Simple, Simple, Fixed},
                              {{0, 1}, {1, 2}, {2, 3}, {3, 4}},
                              {kGroundPivot, kActuatorTip, {0.6, 0.8}, {0.8, 0.8}, {0.9, 0.5}});
  try {
    compile_order(five);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotDyadic);
  }
}

TEST(CompilePlan, CollinearDyad) {
  // Coupler joint on the segment from the crank tip to the rocker pivot.
  try {
    compile_plan(four_bar({0.7, 0.5}, {0.8, 0.5}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Degenerate);
  }
}

TEST(CompilePlan, RandomMechanismsCoverEveryJoint) {
  for (std::size_t n = 5; n <= 20; n += 3) {
    const Mechanism m = testing::random_valid(5, n);
    const SolutionPlan plan = compile_plan(m);
    EXPECT_EQ(plan.steps.size(), n - (m.fixed_count() + 1)) << n;
    std::vector<bool> known(n, false);
    for (std::size_t v = 0; v < n; ++v) known[v] = m.type(v) != Simple;
    for (const auto& s : plan.steps) {
      EXPECT_TRUE(known[s.a] && known[s.b]);
      EXPECT_TRUE(m.connected(s.target, s.a) && m.connected(s.target, s.b));
      known[s.target] = true;
    }
    for (bool k : known) EXPECT_TRUE(k);
  }
}

// Crank 0.05, coupler 0.255, rocker 0.32, ground 0.3: s + l <= p + q with the
// crank shortest, so the crank turns fully.
TEST(Simulate, GrashofCrankRocker) {
  const Mechanism m = four_bar({0.6, 0.75}, {0.8, 0.5});
  const SimOutcome out = simulate(m, compile_plan(m), kHighFidelitySteps);
  ASSERT_TRUE(out.ok());
  EXPECT_EQ(out.trajectory.steps(), 200u);
  EXPECT_EQ(out.trajectory.joints(), 4u);
  EXPECT_TRUE(check_feasible(m, compile_plan(m)));
}

// Brute-force closure check: the coupler-rocker dyad exists iff
// |ra - rb| <= |tip - pivot| <= ra + rb.
std::optional<std::size_t> first_open_angle(const Mechanism& m, std::size_t T) {
  const double ra = distance(m.position(1), m.position(2));
  const double rb = distance(m.position(3), m.position(2));
  for (std::size_t t = 0; t < T; ++t) {
    const double th = 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(T);
    const Vec2 tip{0.5 + 0.05 * std::cos(th), 0.5 + 0.05 * std::sin(th)};
    const double d = distance(tip, m.position(3));
    if (d > ra + rb || d < std::abs(ra - rb)) return t;
  }
  return std::nullopt;
}

TEST(Simulate, NonGrashofLocks) {
  const Vec2 pivot{0.78, 0.5};
  const auto coupler = dyad_solve(kActuatorTip, pivot, 0.1, 0.15, 1.0);
  ASSERT_TRUE(coupler);
  const Mechanism m = four_bar(*coupler, pivot);
  const SimOutcome out = simulate(m, compile_plan(m), kHighFidelitySteps);
  ASSERT_FALSE(out.ok());
  const auto expected = first_open_angle(m, kHighFidelitySteps);
  ASSERT_TRUE(expected);
  EXPECT_EQ(out.locking->step, *expected);
  EXPECT_EQ(out.locking->joint, 2u);
  EXPECT_FALSE(out.locking->degenerate);
  EXPECT_FALSE(check_feasible(m, compile_plan(m)));
}

TEST(Simulate, InitialPoseReproduced) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Mechanism m = testing::random_valid(seed, 12);
    const SimOutcome out = simulate(m, compile_plan(m), kHighFidelitySteps);
    ASSERT_TRUE(out.ok());
    for (std::size_t v = 0; v < m.size(); ++v) {
      EXPECT_NEAR(out.trajectory.at(v, 0).x, m.position(v).x, 1e-12);
      EXPECT_NEAR(out.trajectory.at(v, 0).y, m.position(v).y, 1e-12);
    }
  }
}

TEST(Simulate, LinkLengthsConserved) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Mechanism m = testing::random_valid(seed, 8 + seed);
    const SimOutcome out = simulate(m, compile_plan(m), kHighFidelitySteps);
    ASSERT_TRUE(out.ok());
    for (const auto& [i, j] : m.edges()) {
      const double L = distance(m.position(i), m.position(j));
      for (std::size_t t = 0; t < out.trajectory.steps(); ++t)
        ASSERT_NEAR(distance(out.trajectory.at(i, t), out.trajectory.at(j, t)), L, 1e-9);
    }
    for (std::size_t v = 0; v < m.size(); ++v) {
      if (!m.is_fixed(v)) continue;
      for (std::size_t t = 0; t < out.trajectory.steps(); ++t)
        ASSERT_EQ(out.trajectory.at(v, t), m.position(v));
    }
  }
}

// The coupler-rocker dyad opens only for fine steps 1..3, all strictly
// between coarse steps 0 and 1.
Mechanism locks_between_coarse_steps() {
  const double theta_star = 2.0 * std::numbers::pi * 2.0 / 200.0;
  const double L = 0.4, ra = 0.2, slack = 3e-5;
  const double rb = L + 0.05 - slack - ra;
  const Vec2 pivot{0.5 - L * std::cos(theta_star), 0.5 - L * std::sin(theta_star)};
  const auto coupler = dyad_solve(kActuatorTip, pivot, ra, rb, 1.0);
  return four_bar(*coupler, pivot);
}

TEST(CheckFeasible, HighFidelityCatchesNarrowLock) {
  const Mechanism m = locks_between_coarse_steps();
  const SolutionPlan plan = compile_plan(m);
  EXPECT_TRUE(simulate(m, plan, kLowFidelitySteps).ok());
  const SimOutcome hi = simulate(m, plan, kHighFidelitySteps);
  ASSERT_FALSE(hi.ok());
  EXPECT_EQ(hi.locking->step, 1u);
  std::size_t passes = 0;
  EXPECT_FALSE(check_feasible(m, plan, &passes));
  EXPECT_EQ(passes, 2u);
}

TEST(CheckFeasible, CoarseLockSkipsFinePass) {
  const Vec2 pivot{0.78, 0.5};
  const Mechanism m = four_bar(*dyad_solve(kActuatorTip, pivot, 0.1, 0.15, 1.0), pivot);
  std::size_t passes = 0;
  EXPECT_FALSE(check_feasible(m, compile_plan(m), &passes));
  EXPECT_EQ(passes, 1u);
}

// Simultaneous Newton solve of every link-length constraint, continued from
// the previous actuator step. Shares nothing with the dyad solver.
class NewtonOracle {
 public:
  explicit NewtonOracle(const Mechanism& m) : m_(m) {
    for (std::size_t v = 0; v < m.size(); ++v)
      if (m.type(v) == Simple) free_.push_back(v);
    for (const auto& [i, j] : m.edges()) {
      if ((i == 0 && j == 1) || (m.is_fixed(i) && m.is_fixed(j))) continue;
      bars_.push_back({i, j, distance(m.position(i), m.position(j))});
    }
  }

  bool square() const { return bars_.size() == 2 * free_.size(); }

  std::vector<Vec2> solve(std::vector<Vec2> p, Vec2 tip) const {
    p[1] = tip;
    const std::size_t k = free_.size();
    std::vector<std::size_t> slot(m_.size(), k);
    for (std::size_t s = 0; s < k; ++s) slot[free_[s]] = s;
    for (int iter = 0; iter < 50; ++iter) {
      const std::size_t N = 2 * k;
      std::vector<double> J(N * N, 0.0), r(N, 0.0);
      for (std::size_t e = 0; e < N; ++e) {
        const Bar& b = bars_[e];
        const Vec2 d = p[b.i] - p[b.j];
        r[e] = dot(d, d) - b.len * b.len;
        if (slot[b.i] < k) {
          J[e * N + 2 * slot[b.i]] += 2 * d.x;
          J[e * N + 2 * slot[b.i] + 1] += 2 * d.y;
        }
        if (slot[b.j] < k) {
          J[e * N + 2 * slot[b.j]] -= 2 * d.x;
          J[e * N + 2 * slot[b.j] + 1] -= 2 * d.y;
        }
      }
      const std::vector<double> dx = gauss(J, r, N);
      double step = 0;
      for (std::size_t s = 0; s < k; ++s) {
        p[free_[s]].x -= dx[2 * s];
        p[free_[s]].y -= dx[2 * s + 1];
        step = std::max({step, std::abs(dx[2 * s]), std::abs(dx[2 * s + 1])});
      }
      if (step < 1e-15) break;
    }
    return p;
  }

 private:
  struct Bar {
    std::size_t i, j;
    double len;
  };

  static std::vector<double> gauss(std::vector<double> A, std::vector<double> b, std::size_t N) {
    for (std::size_t c = 0; c < N; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < N; ++r)
        if (std::abs(A[r * N + c]) > std::abs(A[piv * N + c])) piv = r;
      for (std::size_t k = 0; k < N; ++k) std::swap(A[c * N + k], A[piv * N + k]);
      std::swap(b[c], b[piv]);
      for (std::size_t r = c + 1; r < N; ++r) {
        const double f = A[r * N + c] / A[c * N + c];
        for (std::size_t k = c; k < N; ++k) A[r * N + k] -= f * A[c * N + k];
        b[r] -= f * b[c];
      }
    }
    std::vector<double> x(N);
    for (std::size_t c = N; c-- > 0;) {
      double s = b[c];
      for (std::size_t k = c + 1; k < N; ++k) s -= A[c * N + k] * x[k];
      x[c] = s / A[c * N + c];
    }
    return x;
  }

  const Mechanism& m_;
  std::vector<std::size_t> free_;
  std::vector<Bar> bars_;
};

TEST(NewtonOracleCheck, AgreesWithPlanReplay) {
  std::size_t checked = 0;
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const Mechanism m = testing::random_valid(seed, 5 + seed % 12);
    const SimOutcome out = simulate(m, compile_plan(m), kHighFidelitySteps);
    ASSERT_TRUE(out.ok());
    if (out.trajectory.singular_steps > 0) continue;
    NewtonOracle oracle(m);
    ASSERT_TRUE(oracle.square());
    std::vector<Vec2> p(m.positions().begin(), m.positions().end());
    double worst = 0;
    for (std::size_t t = 0; t < kHighFidelitySteps; ++t) {
      const double th = 2.0 * std::numbers::pi * static_cast<double>(t) / 200.0;
      p = oracle.solve(p, {0.5 + 0.05 * std::cos(th), 0.5 + 0.05 * std::sin(th)});
      for (std::size_t v = 0; v < m.size(); ++v)
        worst = std::max(worst, distance(p[v], out.trajectory.at(v, t)));
    }
    EXPECT_LT(worst, 1e-7) << "seed " << seed;
    ++checked;
  }
  EXPECT_GE(checked, 20u);
}

TEST(NewtonOracleCheck, FourBarCoupler) {
  const Mechanism m = four_bar({0.6, 0.75}, {0.8, 0.5});
  const SimOutcome out = simulate(m, compile_plan(m), kHighFidelitySteps);
  NewtonOracle oracle(m);
  std::vector<Vec2> p(m.positions().begin(), m.positions().end());
  for (std::size_t t = 0; t < kHighFidelitySteps; ++t) {
    const double th = 2.0 * std::numbers::pi * static_cast<double>(t) / 200.0;
    p = oracle.solve(p, {0.5 + 0.05 * std::cos(th), 0.5 + 0.05 * std::sin(th)});
    EXPECT_LT(distance(p[2], out.trajectory.at(2, t)), 1e-10);
  }
}

bool same_bits(const Trajectory& a, const Trajectory& b) {
  return a.joints() == b.joints() && a.steps() == b.steps() &&
         a.singular_steps == b.singular_steps &&
         std::memcmp(a.data().data(), b.data().data(), a.data().size_bytes()) == 0;
}

TEST(Equivalence, NaiveMatchesPlan) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Mechanism m = testing::random_valid(seed, 6 + seed % 14);
    const SimOutcome a = simulate(m, compile_plan(m), kHighFidelitySteps);
    const SimOutcome b = simulate_naive(m, kHighFidelitySteps);
    ASSERT_TRUE(a.ok() && b.ok());
    EXPECT_TRUE(same_bits(a.trajectory, b.trajectory));
  }
}

TEST(Equivalence, BatchMatchesScalarBitwise) {
  Rng rng = make_stream({77});
  std::size_t locking = 0, ok = 0;
  for (std::size_t n : {5u, 8u, 13u, 20u}) {
    const Mechanism topo = sample_topology(rng, n).topology;
    std::vector<Vec2> batch;
    for (int b = 0; b < 256; ++b) {
      const auto pos = sample_positions(topo, rng);
      batch.insert(batch.end(), pos.begin(), pos.end());
    }
    // A few known-good variants so both verdicts are exercised.
    GenerationConfig cfg;
    cfg.max_attempts = 20000;
    for (int extra = 0; extra < 3; ++extra) {
      SizeStats stats;
      if (auto v = find_valid_variant(topo, rng, cfg, stats))
        batch.insert(batch.end(), v->mechanism.positions().begin(),
                     v->mechanism.positions().end());
    }
    const std::size_t B = batch.size() / n;
    const auto steps = compile_order(topo);
    const auto outs = simulate_batch(batch, topo, steps, kHighFidelitySteps);
    ASSERT_EQ(outs.size(), B);
    for (std::size_t b = 0; b < B; ++b) {
      const Mechanism m = topo.with_positions(
          std::vector<Vec2>(batch.begin() + static_cast<std::ptrdiff_t>(b * n),
                            batch.begin() + static_cast<std::ptrdiff_t>((b + 1) * n)));
      SimOutcome ref;
      try {
        ref = simulate(m, compile_plan(m), kHighFidelitySteps);
      } catch (const Error& e) {
        ASSERT_EQ(e.code(), ErrorCode::Degenerate);
        ASSERT_TRUE(outs[b].locking && outs[b].locking->degenerate);
        continue;
      }
      ASSERT_EQ(ref.locking, outs[b].locking) << "n=" << n << " b=" << b;
      if (ref.ok()) {
        EXPECT_TRUE(same_bits(ref.trajectory, outs[b].trajectory));
        ++ok;
      } else {
        ++locking;
      }
    }
  }
  EXPECT_GT(ok, 0u);
  EXPECT_GT(locking, 0u);
}

TEST(Equivalence, ClassifyMatchesSimulate) {
  Rng rng = make_stream({78});
  const Mechanism topo = sample_topology(rng, 10).topology;
  std::vector<Vec2> batch;
  for (int b = 0; b < 64; ++b) {
    const auto pos = sample_positions(topo, rng);
    batch.insert(batch.end(), pos.begin(), pos.end());
  }
  BatchSimulator sim(topo);
  const auto verdicts = sim.classify(batch, kLowFidelitySteps);
  const auto outs = sim.simulate(batch, kLowFidelitySteps);
  for (std::size_t b = 0; b < verdicts.size(); ++b) EXPECT_EQ(verdicts[b], outs[b].locking);
}

TEST(Determinism, RepeatedSimulation) {
  const Mechanism m = testing::random_valid(9, 16);
  const SolutionPlan plan = compile_plan(m);
  EXPECT_TRUE(same_bits(simulate(m, plan, 200).trajectory, simulate(m, plan, 200).trajectory));
}

TEST(Simulate, RejectsBadArguments) {
  const Mechanism m = four_bar({0.6, 0.75}, {0.8, 0.5});
  EXPECT_THROW(simulate(m, compile_plan(m), 0), Error);
  EXPECT_THROW(compile_plan(Mechanism::from_edges({Fixed, Actuated, Simple, Fixed},
                                                  std::vector<testing::Edge>{{0, 1}, {1, 2}, {2, 3}})),
               Error);
}

}  // namespace
}  // namespace linkage
