// SPDX-License-Identifier: Apache-2.0
#include "common.hpp"
#include "isac/fim.hpp"

#include <gtest/gtest.h>

using namespace isac;
using namespace isac::fim;
using isac::testing::extended_scene;
using isac::testing::point_scene;
using isac::testing::random_fraction;
using isac::testing::random_psd;

namespace {

double rel_err(const RMat& a, const RMat& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

struct Case {
  ScenarioConfig cfg;
  ChannelSet ch;
  RVec a;
  CMat rw;
  CMat rn_inv;
};

Case make_case(const ScenarioConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  Case c{cfg, make_channels(cfg), random_fraction(cfg.num_antennas, rng), {}, {}};
  c.rw = random_psd(cfg.num_antennas, cfg.power, rng);
  const CMat rn = noise_covariance_from_rw(c.a, c.rw, c.ch.si, cfg.radar_noise);
  c.rn_inv = receive_inverse(c.a, rn, cfg.radar_noise);
  return c;
}

}  // namespace

TEST(PriorFim, Examples) {
  PriorSpec p;
  p.theta_mean = RVec::Zero(3);
  p.theta_cov = 0.09 * RMat::Identity(3, 3);
  p.alpha_mean = CVec::Zero(3);
  p.alpha_cov = 0.01 * CMat::Identity(3, 3);
  const auto f = prior_fim(p);
  EXPECT_TRUE(f.theta.isApprox(RMat::Identity(3, 3) / 0.09));
  EXPECT_TRUE(f.alpha.isApprox(200.0 * RMat::Identity(6, 6)));
  p.theta_cov(0, 0) = 0.0;
  EXPECT_THROW(prior_fim(p), Error);
}

TEST(PriorFim, MatchesLogPriorHessian) {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const int m = 3;
    const CMat z = rng.complex_normal(m, m);
    PriorSpec p;
    p.theta_mean = RVec::Zero(1);
    p.theta_cov = RMat::Identity(1, 1);
    p.alpha_mean = rng.complex_normal(m, 1).col(0);
    p.alpha_cov = z * z.adjoint() + 0.5 * CMat::Identity(m, m);
    const CMat pinv = p.alpha_cov.inverse();
    auto nlp = [&](const RVec& x) {
      CVec al(m);
      for (int i = 0; i < m; ++i) al(i) = cd(x(i), x(m + i));
      const CVec d = al - p.alpha_mean;
      return (d.adjoint() * pinv * d)(0, 0).real();
    };
    RVec x0(2 * m);
    x0 << p.alpha_mean.real(), p.alpha_mean.imag();
    RMat hess(2 * m, 2 * m);
    const double h = 1e-4;
    for (int i = 0; i < 2 * m; ++i)
      for (int j = 0; j < 2 * m; ++j) {
        RVec pp = x0, pm = x0, mp = x0, mm = x0;
        pp(i) += h, pp(j) += h;
        pm(i) += h, pm(j) -= h;
        mp(i) -= h, mp(j) += h;
        mm(i) -= h, mm(j) -= h;
        hess(i, j) = (nlp(pp) - nlp(pm) - nlp(mp) + nlp(mm)) / (4 * h * h);
      }
    EXPECT_LT(rel_err(prior_fim(p).alpha, hess), 1e-5);
  }
}

TEST(LikelihoodFim, PointMatchesOracle) {
  for (int t = 1; t <= 3; ++t) {
    auto c = make_case(point_scene(8, t, 1, 30 + t), 7 + t);
    const auto f = likelihood_fim_point(c.cfg, c.ch, c.a, c.rw, c.rn_inv);
    EXPECT_FALSE(f.empty_receive_support);
    const RMat ref = fim_fd_oracle(c.cfg, c.ch, c.a, c.rw, c.rn_inv, c.cfg.prior.theta_mean, c.cfg.prior.alpha_mean);
    EXPECT_LT(rel_err(f.matrix, ref), 1e-5) << "T=" << t;
    EXPECT_LT((ref - ref.transpose()).norm(), 1e-10 * ref.norm());
  }
}

TEST(LikelihoodFim, ExtendedMatchesOracle) {
  for (int bins = 1; bins <= 3; ++bins) {
    auto c = make_case(extended_scene(8, bins, 1, 50 + bins), 3 + bins);
    const auto f = likelihood_fim_extended(c.cfg, c.ch, c.a, c.rw, c.rn_inv);
    const RMat ref = fim_fd_oracle(c.cfg, c.ch, c.a, c.rw, c.rn_inv, c.cfg.prior.theta_mean, c.cfg.prior.alpha_mean);
    EXPECT_LT(rel_err(f.matrix, ref), 1e-5) << "bins=" << bins;
    EXPECT_EQ(f.matrix.rows(), 2 + 2 * bins);
  }
}

TEST(LikelihoodFim, ExtendedSingleUnitBinDegenerates) {
  auto c = make_case(extended_scene(8, 1, 1, 70), 1);
  const RMat f = likelihood_fim_extended(c.cfg, c.ch, c.a, c.rw, c.rn_inv).matrix;
  EXPECT_NEAR(f(0, 0), f(1, 1), 1e-12 * std::abs(f(0, 0)));
  EXPECT_NEAR(f(0, 0), f(0, 1), 1e-12 * std::abs(f(0, 0)));
}

TEST(LikelihoodFim, AllTransmitIsZero) {
  auto c = make_case(point_scene(8, 2, 1, 3), 3);
  const RVec ones = RVec::Ones(8);
  const auto f = likelihood_fim_point(c.cfg, c.ch, ones, c.rw, CMat::Zero(8, 8));
  EXPECT_TRUE(f.matrix.isZero());
  EXPECT_TRUE(f.empty_receive_support);
  const RMat ref = fim_fd_oracle(c.cfg, c.ch, ones, c.rw, CMat::Zero(8, 8), c.cfg.prior.theta_mean,
                                 c.cfg.prior.alpha_mean);
  EXPECT_TRUE(ref.isZero());
  auto e = make_case(extended_scene(8, 2, 1, 3), 3);
  EXPECT_TRUE(likelihood_fim_extended(e.cfg, e.ch, ones, e.rw, CMat::Zero(8, 8)).matrix.isZero());
}

TEST(LikelihoodFim, LinearInSnapshots) {
  auto c = make_case(point_scene(8, 2, 1, 4), 4);
  const RMat f1 = likelihood_fim_point(c.cfg, c.ch, c.a, c.rw, c.rn_inv).matrix;
  c.cfg.snapshots *= 2;
  const RMat f2 = likelihood_fim_point(c.cfg, c.ch, c.a, c.rw, c.rn_inv).matrix;
  EXPECT_LT(rel_err(f2, 2.0 * f1), 1e-14);
}

TEST(LikelihoodFim, BinaryPartitionMatchesOracle) {
  auto c = make_case(point_scene(8, 2, 1, 6), 6);
  RVec a = RVec::Zero(8);
  a(1) = a(2) = a(6) = 1.0;
  const CMat rn = noise_covariance_from_rw(a, c.rw, c.ch.si, c.cfg.radar_noise);
  const CMat rinv = receive_inverse(a, rn, c.cfg.radar_noise);
  const RMat f = likelihood_fim_point(c.cfg, c.ch, a, c.rw, rinv).matrix;
  const RMat ref = fim_fd_oracle(c.cfg, c.ch, a, c.rw, rinv, c.cfg.prior.theta_mean, c.cfg.prior.alpha_mean);
  EXPECT_LT(rel_err(f, ref), 1e-5);
}

// With S S^H = L I the Kronecker quadratic form reduces to the trace form.
TEST(LikelihoodFim, KroneckerTraceIdentity) {
  Rng rng(12);
  const int n = 5, l = 6;
  const CMat x = rng.complex_normal(n, n), y = rng.complex_normal(n, n);
  const CMat z = rng.complex_normal(n, n);
  const CMat rinv = z * z.adjoint();
  // Unitary-scaled S with S S^H = L I.
  Eigen::HouseholderQR<CMat> qr(rng.complex_normal(l, l));
  const CMat s = std::sqrt(double(l)) * CMat(qr.householderQ()).topRows(n);
  const CMat xs = x * s, ys = y * s;
  const CVec vx = Eigen::Map<const CVec>(xs.data(), xs.size());
  const CVec vy = Eigen::Map<const CVec>(ys.data(), ys.size());
  cd lhs = 0.0;
  for (int c = 0; c < l; ++c) lhs += vx.segment(c * n, n).dot(rinv * vy.segment(c * n, n));
  const cd rhs = double(l) * (rinv * y * x.adjoint()).trace();
  EXPECT_NEAR(std::abs(lhs - rhs), 0.0, 1e-10 * std::abs(rhs));
}

TEST(Bcrb, DecoupledAndWeighted) {
  FimBlocks b;
  b.likelihood = RMat::Zero(6, 6);
  b.likelihood.topLeftCorner(2, 2) << 4.0, 1.0, 1.0, 3.0;
  b.likelihood.bottomRightCorner(4, 4) = RMat::Identity(4, 4);
  b.prior.theta = RMat::Identity(2, 2);
  b.prior.alpha = RMat::Identity(4, 4);
  const RMat j = b.likelihood.topLeftCorner(2, 2) + RMat::Identity(2, 2);
  EXPECT_NEAR(bcrb(b, RVec::Ones(2)).weighted, j.inverse().trace(), 1e-14);
  const RVec w = (RVec(2) << 2.0, 0.5).finished();
  EXPECT_NEAR(bcrb(b, w).weighted, (w.asDiagonal() * j.inverse()).trace(), 1e-14);
  EXPECT_THROW(bcrb(b, RVec::Ones(3)), Error);
}

TEST(Bcrb, SchurMatchesFullInverse) {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const int nt = 1 + trial % 3, na = 2 * (1 + trial % 3);
    const RMat g = rng.normal((nt + na) * (nt + na)).reshaped(nt + na, nt + na);
    FimBlocks b;
    b.likelihood = g * g.transpose();
    const RMat pt = rng.normal(nt * nt).reshaped(nt, nt);
    b.prior.theta = pt * pt.transpose() + 0.1 * RMat::Identity(nt, nt);
    b.prior.alpha = 0.5 * RMat::Identity(na, na);
    RVec w(nt);
    for (int i = 0; i < nt; ++i) w(i) = 0.5 + rng.uniform();
    const RMat full = b.bayesian().inverse();
    const double ref = (w.asDiagonal() * full.topLeftCorner(nt, nt)).trace();
    const auto r = bcrb(b, w);
    EXPECT_NEAR(r.weighted, ref, 1e-10 * ref);
    EXPECT_LT((r.per_angle - full.diagonal().head(nt)).norm(), 1e-9 * full.diagonal().head(nt).norm());
  }
}

TEST(Bcrb, SingularSchurRejected) {
  FimBlocks b;
  b.likelihood = RMat::Zero(3, 3);
  b.likelihood(0, 0) = -1.0;
  b.prior.theta = RMat::Identity(1, 1);
  b.prior.alpha = RMat::Identity(2, 2);
  EXPECT_THROW(bcrb(b, RVec::Ones(1)), Error);
}

TEST(Bcrb, PositiveAndMonotoneInPriorScale) {
  auto c = make_case(point_scene(8, 2, 1, 15), 15);
  double prev = 0.0;
  for (double s : {0.25, 1.0, 4.0}) {
    auto cfg = c.cfg;
    cfg.prior = cfg.prior.with_theta_scale(s);
    const auto blocks = design_fim(cfg, c.ch, c.a, c.rw, c.rn_inv);
    Eigen::SelfAdjointEigenSolver<RMat> es(blocks.bayesian());
    EXPECT_GT(es.eigenvalues()(0), 0.0);
    const double v = bcrb(blocks, cfg.weights).weighted;
    EXPECT_GT(v, 0.0);
    EXPECT_GE(v, prev);
    prev = v;
  }
}
