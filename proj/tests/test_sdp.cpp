// SPDX-License-Identifier: Apache-2.0
#include "isac/random.hpp"
#include "isac/sdp.hpp"

#include <gtest/gtest.h>

using namespace isac;
using namespace isac::sdp;

namespace {

void expect_feasible(const ConicProblem& p, const ConicSolution& s, double tol) {
  for (const auto& blk : p.lmis) EXPECT_GE(min_eigenvalue(lmi_value(blk, s.x)), -10 * tol);
  for (const auto& r : p.inequalities) EXPECT_LE(row_value(r, s.x), r.rhs + 10 * tol * (1 + std::abs(r.rhs)));
  for (const auto& r : p.equalities) EXPECT_NEAR(row_value(r, s.x), r.rhs, 10 * tol * (1 + std::abs(r.rhs)));
}

}  // namespace

TEST(Sdp, ScalarWithBound) {
  ProblemBuilder pb;
  const int x = pb.add_variables(1);
  pb.add_cost(x, 1.0);
  const int b = pb.add_lmi(1);
  pb.lmi_term(b, 0, 0, x, 1.0);
  pb.add_ge({{{x, 1.0}}, 2.0});
  const auto p = pb.build();
  const auto s = solve(p);
  ASSERT_TRUE(s.ok()) << to_string(s.status);
  EXPECT_NEAR(s.x(0), 2.0, 1e-6);
  expect_feasible(p, s, 1e-8);
}

TEST(Sdp, EpigraphWithFixedU) {
  ProblemBuilder pb;
  const auto e = epigraph_inverse_trace(pb, 2, RVec::Ones(2));
  // Pin U = diag(2, 4) with equalities.
  pb.add_eq({{{e.u.index(0, 0), 1.0}}, 2.0});
  pb.add_eq({{{e.u.index(1, 1), 1.0}}, 4.0});
  pb.add_eq({{{e.u.index(0, 1), 1.0}}, 0.0});
  const auto s = solve(pb.build());
  ASSERT_TRUE(s.ok()) << to_string(s.status);
  EXPECT_NEAR(s.objective, 0.75, 1e-6);
  const RMat v = e.v.value(s.x);
  EXPECT_NEAR(v(0, 0), 0.5, 1e-5);
  EXPECT_NEAR(v(1, 1), 0.25, 1e-5);
}

TEST(Sdp, EpigraphIdentity) {
  for (int t = 1; t <= 4; ++t) {
    ProblemBuilder pb;
    const auto e = epigraph_inverse_trace(pb, t, RVec::Ones(t));
    for (int i = 0; i < t; ++i)
      for (int j = i; j < t; ++j) pb.add_eq({{{e.u.index(i, j), 1.0}}, i == j ? 1.0 : 0.0});
    const auto s = solve(pb.build());
    ASSERT_TRUE(s.ok());
    EXPECT_NEAR(s.objective, t, 1e-6);
  }
}

// min 1/u + c u over u in [0.1, 10] via the epigraph, vs. a 1-D grid.
TEST(Sdp, EpigraphJointMatchesGrid) {
  const double c = 0.3;
  ProblemBuilder pb;
  const auto e = epigraph_inverse_trace(pb, 1, RVec::Ones(1));
  const int u = e.u.index(0, 0);
  pb.add_cost(u, c);
  pb.add_le({{{u, 1.0}}, 10.0});
  pb.add_ge({{{u, 1.0}}, 0.1});
  const auto s = solve(pb.build());
  ASSERT_TRUE(s.ok());
  double best = 1e300;
  for (int i = 0; i <= 200000; ++i) {
    const double uu = 0.1 + 9.9 * i / 200000.0;
    best = std::min(best, 1.0 / uu + c * uu);
  }
  EXPECT_NEAR(s.objective, best, 1e-5);
}

TEST(Sdp, HermitianEmbedding) {
  CMat h(2, 2);
  h << 1.0, kJ, -kJ, 1.0;
  const RMat e = embed_hermitian(h);
  Eigen::SelfAdjointEigenSolver<RMat> es(e);
  EXPECT_NEAR(es.eigenvalues()(0), 0.0, 1e-12);
  EXPECT_NEAR(es.eigenvalues()(1), 0.0, 1e-12);
  EXPECT_NEAR(es.eigenvalues()(2), 2.0, 1e-12);
  EXPECT_NEAR(es.eigenvalues()(3), 2.0, 1e-12);
  EXPECT_TRUE(embed_hermitian(CMat::Identity(3, 3)).isApprox(RMat::Identity(6, 6)));
  CMat bad(2, 2);
  bad << 1.0, kJ, kJ, 1.0;
  EXPECT_THROW(embed_hermitian(bad), Error);
  Rng rng(3);
  const CMat z = rng.complex_normal(4, 4);
  const CMat herm = z * z.adjoint();
  EXPECT_NEAR(embed_hermitian(herm).trace(), 2.0 * herm.trace().real(), 1e-10);
  EXPECT_TRUE(unembed_hermitian(embed_hermitian(herm)).isApprox(herm));
}

TEST(Sdp, HermitianVariableMatchesEmbedding) {
  Rng rng(11);
  const int n = 3;
  ProblemBuilder pb;
  const auto h = pb.add_hermitian(n);
  const int blk = pb.add_lmi(2 * n);
  pb.lmi_hermitian(blk, 0, h, 1.0);
  const auto p = pb.build();
  const RVec x = rng.normal(h.size());
  EXPECT_TRUE(lmi_value(p.lmis[0], x).isApprox(embed_hermitian(h.value(x)), 1e-12));
  const CMat m = rng.complex_normal(n, n);
  EXPECT_NEAR(h.functional(m).dot(x), (m * h.value(x)).trace().real(), 1e-10);
}

// Random feasible SDP with a 3x3 block and five variables, bracketed by
// its dual bound and checked against brute-force search.
TEST(Sdp, RandomSmallMatchesOracle) {
  for (int trial = 0; trial < 5; ++trial) {
    Rng rng(100 + trial);
    const int m = 5;
    std::vector<RMat> f(m + 1);
    for (auto& fi : f) {
      const RMat g = rng.normal(9).reshaped(3, 3);
      fi = symmetric_part(g);
    }
    f[0] = f[0] * 0.1 + 3.0 * RMat::Identity(3, 3);  // x = 0 strictly feasible
    // Bounded: box |x_i| <= 1.
    const RVec c = rng.normal(m);
    ProblemBuilder pb;
    const int x0 = pb.add_variables(m);
    for (int i = 0; i < m; ++i) pb.add_cost(x0 + i, c(i));
    const int b = pb.add_lmi(3);
    for (int r = 0; r < 3; ++r)
      for (int col = r; col < 3; ++col) {
        pb.lmi_constant(b, r, col, f[0](r, col));
        for (int i = 0; i < m; ++i) pb.lmi_term(b, r, col, x0 + i, f[i + 1](r, col));
      }
    for (int i = 0; i < m; ++i) {
      pb.add_le({{{x0 + i, 1.0}}, 1.0});
      pb.add_ge({{{x0 + i, 1.0}}, -1.0});
    }
    const auto p = pb.build();
    const auto s = solve(p);
    ASSERT_TRUE(s.ok()) << to_string(s.status);
    expect_feasible(p, s, 1e-8);

    // Weak duality: the returned multipliers give a lower bound that must
    // meet the primal objective.
    const RMat& z = s.certificates[0];
    EXPECT_GE(min_eigenvalue(z), -1e-9);
    EXPECT_TRUE((s.inequality_duals.array() >= -1e-9).all());
    RVec stationarity = c;
    for (int i = 0; i < m; ++i) stationarity(i) -= (f[i + 1].cwiseProduct(z)).sum();
    for (int i = 0; i < m; ++i) stationarity(i) += s.inequality_duals(2 * i) - s.inequality_duals(2 * i + 1);
    EXPECT_LT(stationarity.norm(), 1e-6);
    const double lower = -(f[0].cwiseProduct(z)).sum() - s.inequality_duals.sum();
    EXPECT_NEAR(s.objective, lower, 1e-5);

    // Brute force: shrinking random search never beats the solver.
    auto feasible = [&](const RVec& x) {
      if ((x.array().abs() > 1.0).any()) return false;
      RMat fx = f[0];
      for (int i = 0; i < m; ++i) fx += x(i) * f[i + 1];
      return min_eigenvalue(fx) >= 0.0;
    };
    RVec best = RVec::Zero(m);
    double fbest = 0.0;
    Rng orng(7 + trial);
    for (double scale = 0.5; scale > 1e-9; scale *= 0.7) {
      for (int k = 0; k < 400; ++k) {
        const RVec cand = best + scale * orng.normal(m);
        if (feasible(cand) && c.dot(cand) < fbest) {
          best = cand;
          fbest = c.dot(cand);
        }
      }
    }
    EXPECT_LE(s.objective, fbest + 1e-7);
  }
}

TEST(Sdp, InfeasibleDetected) {
  // x >= 0 via LMI and x <= -1.
  ProblemBuilder pb;
  const int x = pb.add_variables(1);
  pb.add_cost(x, 1.0);
  const int b = pb.add_lmi(2);
  pb.lmi_term(b, 0, 0, x, 1.0);
  pb.lmi_term(b, 1, 1, x, 1.0);
  pb.add_le({{{x, 1.0}}, -1.0});
  const auto s = solve(pb.build());
  EXPECT_EQ(s.status, Status::infeasible);
  ASSERT_EQ(s.certificates.size(), 1u);
  EXPECT_GE(min_eigenvalue(s.certificates[0]), -1e-8);
}

TEST(Sdp, RowScalingInvariance) {
  auto build = [](double scale) {
    ProblemBuilder pb;
    const auto e = epigraph_inverse_trace(pb, 2, RVec::Ones(2));
    pb.add_le({{{e.u.index(0, 0), scale}, {e.u.index(1, 1), scale}}, 3.0 * scale});
    pb.add_ge({{{e.u.index(0, 0), scale}}, 0.5 * scale});
    return pb.build();
  };
  const auto s1 = solve(build(1.0));
  const auto s2 = solve(build(1e4));
  ASSERT_TRUE(s1.ok());
  ASSERT_TRUE(s2.ok());
  EXPECT_NEAR(s1.objective, s2.objective, 1e-7);
  EXPECT_NEAR(s1.objective, 4.0 / 3.0, 1e-6);
}
