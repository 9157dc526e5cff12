#include <gtest/gtest.h>

#include <cmath>

#include "instro/catalog.hpp"
#include "instro/lp.hpp"
#include "instro/sdp.hpp"
#include "test_util.hpp"

using namespace instro;
using namespace instro::sdp;

namespace {

FeasibilityProblem equals_target(const CMatrix& t) {
  FeasibilityProblem p;
  p.add_block("X", t.rows());
  p.add_constraint({"X = T", {{0, {}}}, t});
  return p;
}

FeasibilityProblem unit_trace(std::size_t d) {
  FeasibilityProblem p;
  p.add_block("X", d);
  p.add_constraint({"tr X = 1", {{0, {PartialTrace{{d}, {}}}}}, CMatrix::identity(1)});
  return p;
}

// Joint POVM G(x, x') on C^2 with Σ_x' G = A(x) and Σ_x G = B(x').
FeasibilityProblem joint_povm(const Povm& a, const Povm& b) {
  FeasibilityProblem p;
  for (std::size_t x = 0; x < a.size(); ++x)
    for (std::size_t y = 0; y < b.size(); ++y) p.add_block("G", a.dim_in());
  for (std::size_t x = 0; x < a.size(); ++x) {
    Constraint c{"A", {}, a.effect(x)};
    for (std::size_t y = 0; y < b.size(); ++y) c.terms.push_back({x * b.size() + y, {}});
    p.add_constraint(std::move(c));
  }
  for (std::size_t y = 0; y < b.size(); ++y) {
    Constraint c{"B", {}, b.effect(y)};
    for (std::size_t x = 0; x < a.size(); ++x) c.terms.push_back({x * b.size() + y, {}});
    p.add_constraint(std::move(c));
  }
  return p;
}

// Same problem with every constraint row multiplied by `s`.
FeasibilityProblem scaled(const FeasibilityProblem& p, double s) {
  FeasibilityProblem q;
  for (const auto& b : p.blocks()) q.add_block(b.name, b.dim);
  for (auto c : p.constraints()) {
    for (auto& t : c.terms) t.stages.push_back(Scale{s});
    c.target = c.target * cplx(s);
    q.add_constraint(std::move(c));
  }
  return q;
}

// The joint-instrument problem for two instruments, built here directly
// from blocks and partial traces.
FeasibilityProblem joint_instrument(const Instrument& i, const Instrument& j) {
  const std::size_t d = i.dim_in(), dk = i.dim_out(), dv = j.dim_out();
  FeasibilityProblem p;
  for (std::size_t x = 0; x < i.size(); ++x)
    for (std::size_t y = 0; y < j.size(); ++y) p.add_block("G", d * dk * dv);
  for (std::size_t x = 0; x < i.size(); ++x) {
    Constraint c{"I", {}, i.op(x).choi()};
    for (std::size_t y = 0; y < j.size(); ++y) c.terms.push_back({x * j.size() + y, {PartialTrace{{d, dk, dv}, {0, 1}}}});
    p.add_constraint(std::move(c));
  }
  for (std::size_t y = 0; y < j.size(); ++y) {
    Constraint c{"J", {}, j.op(y).choi()};
    for (std::size_t x = 0; x < i.size(); ++x) c.terms.push_back({x * j.size() + y, {PartialTrace{{d, dk, dv}, {0, 2}}}});
    p.add_constraint(std::move(c));
  }
  return p;
}

}  // namespace

TEST(Solve, NegativeTargetIsInfeasibleWithUnitMargin) {
  const Verdict v = solve(equals_target(CMatrix::diag({1.0, -1.0})));
  ASSERT_EQ(v.status, Status::Infeasible);
  // The affine set is the single point diag(1, -1), at distance 1 from the cone.
  EXPECT_NEAR(v.margin, 1.0, 1e-6);
  EXPECT_LE(v.margin, 1.0 + 1e-9);
}

TEST(Solve, UnitTraceIsFeasible) {
  const FeasibilityProblem p = unit_trace(2);
  const Verdict v = solve(p);
  ASSERT_EQ(v.status, Status::Feasible);
  ASSERT_EQ(v.witness.size(), 1u);
  EXPECT_NEAR(v.witness[0].trace().real(), 1.0, 1e-7);
  EXPECT_GE(min_eig(v.witness[0]), -1e-7);
  EXPECT_EQ(v.margin_kind, "slack");
}

TEST(Solve, CommutingSharpPovmsHaveDiagonalJoint) {
  const Povm x = sharp_x();
  const FeasibilityProblem p = joint_povm(x, x);
  const Verdict v = solve(p);
  ASSERT_EQ(v.status, Status::Feasible);
  // G(x,x') = δ A(x) is the only joint; off-diagonal blocks must vanish.
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b) {
      const CMatrix expect = a == b ? x.effect(a) : CMatrix(2, 2);
      EXPECT_LT(max_abs_diff(v.witness[2 * a + b], expect), 1e-6);
    }
}

TEST(Solve, SharpXAndZHaveNoJoint) {
  const Verdict v = solve(joint_povm(sharp_x(), sharp_z()));
  EXPECT_EQ(v.status, Status::Infeasible);
  EXPECT_GT(v.margin, 1e-4);
}

TEST(Solve, InconsistentEquationsReportAffineMargin) {
  FeasibilityProblem p;
  p.add_block("X", 2);
  p.add_constraint({"a", {{0, {}}}, CMatrix::identity(2)});
  p.add_constraint({"b", {{0, {}}}, CMatrix::identity(2) * cplx(2.0)});
  const Verdict v = solve(p);
  EXPECT_EQ(v.status, Status::Infeasible);
  EXPECT_EQ(v.margin_kind, "affine");
  EXPECT_GT(v.margin, 0.1);
}

TEST(Solve, StrictProbe) {
  SolverConfig cfg;
  cfg.strict_probe = true;
  const Verdict interior = solve(unit_trace(2), cfg);
  ASSERT_EQ(interior.status, Status::Feasible);
  EXPECT_EQ(interior.strictly_feasible, std::optional<bool>(true));
  const Verdict boundary = solve(equals_target(CMatrix::diag({1.0, 0.0})), cfg);
  ASSERT_EQ(boundary.status, Status::Feasible);
  EXPECT_EQ(boundary.strictly_feasible, std::optional<bool>(false));
}

TEST(Problem, ShapeAndHermiticityChecks) {
  FeasibilityProblem p;
  p.add_block("X", 4);
  EXPECT_THROW(p.add_block("Y", 0), DimensionError);
  EXPECT_THROW(p.add_constraint({"c", {{0, {PartialTrace{{2, 2}, {0}}}}}, CMatrix::identity(3)}), DimensionError);
  EXPECT_THROW(p.add_constraint({"c", {{0, {PartialTrace{{2, 3}, {0}}}}}, CMatrix::identity(2)}), DimensionError);
  EXPECT_THROW(p.add_constraint({"c", {{0, {}}}, CMatrix::from_rows({{0, 1, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}})}),
               NumericalError);
  EXPECT_THROW(p.add_constraint({"c", {{3, {}}}, CMatrix::identity(4)}), DimensionError);
}

TEST(Stages, MatchDirectFormulas) {
  std::mt19937_64 rng(1);
  const CMatrix x = instro::testing::random_hermitian(6, rng);
  EXPECT_LT(max_abs_diff(apply_stage(PartialTrace{{2, 3}, {1}}, x), partial_trace(x, {2, 3}, {1})), 1e-14);
  const CMatrix l = instro::testing::random_matrix(2, 6, rng);
  EXPECT_LT(max_abs_diff(apply_stage(Sandwich{l}, x), l * x * l.adjoint()), 1e-13);
  EXPECT_LT(max_abs_diff(apply_stage(Scale{-2.0}, x), x * cplx(-2.0)), 1e-15);
  EXPECT_LT(max_abs_diff(apply_stage(Transpose{}, x), x.transpose()), 1e-15);

  const Instrument f = random_instrument(2, 3, 1, 2, rng), g = random_instrument(3, 2, 1, 2, rng);
  const CMatrix jf = f.op(0).choi(), jg = g.op(0).choi();
  const CMatrix gf = compose(g.op(0), f.op(0)).choi();
  EXPECT_LT(max_abs_diff(apply_stage(LinkFixedFirst{jf, 2, 3, 2}, jg), gf), 1e-12);
  EXPECT_LT(max_abs_diff(apply_stage(LinkFixedSecond{jg, 2, 3, 2}, jf), gf), 1e-12);
  EXPECT_TRUE(stage_is_positive(LinkFixedFirst{jf, 2, 3, 2}));
  EXPECT_FALSE(stage_is_positive(Scale{-1.0}));
}

TEST(Projection, AffineFixesFeasiblePoints) {
  const FeasibilityProblem p = joint_povm(noisy_x(0.5), noisy_z(0.5));
  // G(x, y) = ½(A(x) + B(y) - ½I) has the right sums.
  std::vector<CMatrix> x;
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b)
      x.push_back((noisy_x(0.5).effect(a) + noisy_z(0.5).effect(b) - CMatrix::identity(2) * cplx(0.5)) * cplx(0.5));
  const auto px = project_affine(p, x);
  for (std::size_t k = 0; k < x.size(); ++k) EXPECT_LT(max_abs_diff(px[k], x[k]), 1e-12);
}

TEST(Projection, AffineIsOrthogonal) {
  std::mt19937_64 rng(2);
  const FeasibilityProblem p = joint_povm(noisy_x(0.5), noisy_z(0.5));
  std::vector<CMatrix> x, y;
  for (int k = 0; k < 4; ++k) x.push_back(instro::testing::random_hermitian(2, rng));
  for (int k = 0; k < 4; ++k) y.push_back(instro::testing::random_hermitian(2, rng));
  const auto px = project_affine(p, x), py = project_affine(p, y);
  const auto ppx = project_affine(p, px);
  const WitnessCheck c = check_witness(p, px);
  EXPECT_LT(c.residual, 1e-12);
  double orth = 0.0;
  for (int k = 0; k < 4; ++k) {
    EXPECT_LT(max_abs_diff(ppx[k], px[k]), 1e-12);
    orth += inner_real(x[k] - px[k], px[k] - py[k]);
  }
  EXPECT_NEAR(orth, 0.0, 1e-10);
}

TEST(Projection, PsdBlocks) {
  std::mt19937_64 rng(3);
  const CMatrix p = instro::testing::random_psd(3, rng);
  const auto out = project_psd_blocks({p, CMatrix::identity(2) * cplx(-1.0)});
  EXPECT_LT(max_abs_diff(out[0], p), 1e-10);
  EXPECT_LT(max_abs_diff(out[1], CMatrix(2, 2)), 1e-15);
}

TEST(Witness, IndependentRecheckOfFeasibleVerdicts) {
  std::mt19937_64 rng(4);
  int feasible = 0;
  for (int k = 0; k < 12; ++k) {
    const Instrument i = random_instrument(2, 2, 2, 3 + (k % 3) * 2, rng);
    const Instrument j = random_instrument(2, 2, 2, 3 + (k / 3) % 3 * 2, rng);
    const FeasibilityProblem p = joint_instrument(i, j);
    const SolverConfig cfg;
    const Verdict v = solve(p, cfg);
    if (v.status != Status::Feasible) continue;
    ++feasible;
    // Evaluate the marginals by hand, outside the solver.
    double res = 0.0, lam = INFINITY;
    for (std::size_t x = 0; x < 2; ++x) {
      CMatrix s(4, 4), t(4, 4);
      for (std::size_t y = 0; y < 2; ++y) {
        s += partial_trace(v.witness[x * 2 + y], {2, 2, 2}, {0, 1});
        t += partial_trace(v.witness[y * 2 + x], {2, 2, 2}, {0, 2});
      }
      res = std::max({res, frobenius_distance(s, i.op(x).choi()), frobenius_distance(t, j.op(x).choi())});
    }
    for (const auto& w : v.witness) lam = std::min(lam, min_eig(w.hermitian_part()));
    EXPECT_LE(res, 10 * cfg.feas_tol);
    EXPECT_GE(lam, -10 * cfg.feas_tol);
  }
  EXPECT_GT(feasible, 0);
}

TEST(Stability, RowScalingByTenKeepsVerdicts) {
  std::mt19937_64 rng(5);
  int decided = 0;
  std::vector<FeasibilityProblem> corpus{equals_target(CMatrix::diag({1.0, -1.0})), unit_trace(3),
                                         joint_povm(sharp_x(), sharp_z()), joint_povm(noisy_x(0.6), noisy_z(0.6)),
                                         joint_povm(noisy_x(0.75), noisy_z(0.75))};
  for (int k = 0; k < 8; ++k)
    corpus.push_back(joint_instrument(random_instrument(2, 2, 2, 1 + k % 4, rng), random_instrument(2, 2, 2, 1, rng)));
  for (const auto& p : corpus) {
    const Verdict a = solve(p), b = solve(scaled(p, 10.0));
    if (a.status == Status::Undecided) continue;
    ++decided;
    EXPECT_EQ(a.status, b.status);
  }
  EXPECT_GE(decided, 10);
}

TEST(Dykstra, ConsecutiveIterateDistanceNonIncreasing) {
  std::mt19937_64 rng(6);
  const int burn_in = 10;
  std::size_t points = 0;
  for (int k = 0; k < 16; ++k) {
    const Instrument i = random_instrument(2, 2, 2, 1 + (k % 4) * 2, rng);
    const Instrument j = random_instrument(2, 2, 2, 1 + ((k / 4) % 4) * 2, rng);
    SolverConfig cfg;
    cfg.record_trace = true;
    const Verdict v = solve(joint_instrument(i, j), cfg);
    const auto& t = v.trace;
    for (std::size_t s = burn_in + 1; s < t.size(); ++s) {
      ++points;
      EXPECT_LE(t[s], t[s - 1] * (1 + 1e-9) + 1e-14) << "pair " << k << " iteration " << s;
    }
  }
  EXPECT_GT(points, 500u);
}

TEST(Solve, NoUndecidedOnAnalyticCases) {
  EXPECT_NE(solve(joint_povm(noisy_x(0.7), noisy_z(0.7))).status, Status::Undecided);
  EXPECT_NE(solve(joint_povm(noisy_x(0.72), noisy_z(0.72))).status, Status::Undecided);
  // Unbiased qubit pair: compatible iff a² + b² ≤ 1.
  EXPECT_EQ(solve(joint_povm(noisy_x(0.7), noisy_z(0.7))).status, Status::Feasible);
  EXPECT_EQ(solve(joint_povm(noisy_x(0.72), noisy_z(0.72))).status, Status::Infeasible);
}

TEST(Lp, SimplexBasics) {
  // x1 + x2 = 1, x1 - x2 = 0.5
  const auto s = lp_feasible({1, 1, 1, -1}, 2, 2, {1, 0.5});
  ASSERT_TRUE(s.has_value());
  EXPECT_NEAR((*s)[0], 0.75, 1e-12);
  EXPECT_NEAR((*s)[1], 0.25, 1e-12);
  EXPECT_FALSE(lp_feasible({1, 1}, 1, 2, {-1}).has_value());
  EXPECT_THROW(lp_feasible({1, 1}, 2, 2, {1, 1}), DimensionError);
}

TEST(Lp, IdenticalPovmsGivePermutation) {
  const auto nu = lp_postprocess_povm(sharp_z(), sharp_z());
  ASSERT_TRUE(nu.has_value());
  EXPECT_NEAR((*nu)[0][0], 1.0, 1e-9);
  EXPECT_NEAR((*nu)[1][1], 1.0, 1e-9);
  EXPECT_NEAR((*nu)[0][1], 0.0, 1e-9);
}

TEST(Lp, TrivialTargetIsConstant) {
  const Povm half({CMatrix::identity(2) * cplx(0.5), CMatrix::identity(2) * cplx(0.5)});
  std::mt19937_64 rng(7);
  const auto nu = lp_postprocess_povm(random_povm(2, 3, rng), half);
  ASSERT_TRUE(nu.has_value());
  // The random POVM's effects are linearly independent, so ν is unique.
  for (const auto& row : *nu)
    for (double v : row) EXPECT_NEAR(v, 0.5, 1e-8);
}

TEST(Lp, BinarySymmetricChannel) {
  // ½(I ± vZ) with v = 1 - 2p is sharp Z through a flip with probability p.
  const double p = 0.15;
  const auto nu = lp_postprocess_povm(sharp_z(), noisy_z(1 - 2 * p));
  ASSERT_TRUE(nu.has_value());
  EXPECT_NEAR((*nu)[0][0], 1 - p, 1e-9);
  EXPECT_NEAR((*nu)[0][1], p, 1e-9);
  EXPECT_NEAR((*nu)[1][0], p, 1e-9);
  EXPECT_NEAR((*nu)[1][1], 1 - p, 1e-9);
}

TEST(Lp, NoClassicalRouteBetweenXAndZ) {
  EXPECT_FALSE(lp_postprocess_povm(sharp_z(), sharp_x()).has_value());
  EXPECT_FALSE(lp_postprocess_povm(noisy_z(0.5), sharp_z()).has_value());
  EXPECT_THROW(lp_postprocess_povm(sharp_z(), Povm({CMatrix::identity(3)})), DimensionError);
}

TEST(Lp, SolutionReconstructsTarget) {
  std::mt19937_64 rng(8);
  const Povm a = random_povm(2, 3, rng);
  // B(y) = Σ_x ν_xy A(x) for a known ν.
  const double nu0[3][2] = {{0.2, 0.8}, {1.0, 0.0}, {0.5, 0.5}};
  std::vector<CMatrix> eff(2, CMatrix(2, 2));
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t y = 0; y < 2; ++y) eff[y] += a.effect(x) * cplx(nu0[x][y]);
  const auto nu = lp_postprocess_povm(a, Povm(eff));
  ASSERT_TRUE(nu.has_value());
  for (std::size_t y = 0; y < 2; ++y) {
    CMatrix r(2, 2);
    for (std::size_t x = 0; x < 3; ++x) r += a.effect(x) * cplx((*nu)[x][y]);
    EXPECT_LT(max_abs_diff(r, eff[y]), 1e-8);
  }
  for (const auto& row : *nu) {
    double s = 0.0;
    for (double v : row) {
      EXPECT_GE(v, -1e-12);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}
