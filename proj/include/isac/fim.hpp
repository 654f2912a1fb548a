// SPDX-License-Identifier: Apache-2.0
//
// Prior and likelihood Fisher information and the Bayesian CRB for the
// partitioned-array echo model eta = vec{(I - A) G(xi) A W S}.
//
// Parameter ordering is xi = [theta; Re(alpha); Im(alpha)] where theta holds
// the T target DOAs (point targets) or [theta_c, spread] (extended target).
// Every derivative d eta / d xi_i has the form vec{B D_i A W S} with
// D_i = sum_r c_r u_r v_r^T, which is what `Direction` stores. With the
// design convention S S^H = L I this gives
//
//   F_L(i, j) = 2 L Re Tr{ (B D_i A)^H R_n^{-1} (B D_j A) R_w }.

#pragma once

#include "isac/linalg.hpp"
#include "isac/priors.hpp"
#include "isac/scene.hpp"

#include <functional>
#include <vector>

namespace isac::fim {

struct RankOneTerm {
  cd coef;
  CVec left;
  CVec right;
};

/// One derivative direction of the target response, before masking.
using Direction = std::vector<RankOneTerm>;

/// Derivative directions of the target response at (theta, alpha).
inline std::vector<Direction> response_directions(const ScenarioConfig& cfg, const ChannelSet& ch,
                                                  const RVec& theta, const CVec& alpha) {
  const int n = cfg.num_antennas;
  const CVec q = ch.q.cast<cd>();
  std::vector<Direction> dirs;
  if (cfg.model == TargetModel::point) {
    const auto t_count = theta.size();
    std::vector<CVec> h(t_count), hd(t_count);
    for (Eigen::Index t = 0; t < t_count; ++t) {
      const auto d = steering_derivatives(theta(t), n, ch.target_gain);
      h[t] = ch.target(theta(t));
      hd[t] = d.first;
    }
    for (Eigen::Index t = 0; t < t_count; ++t)
      dirs.push_back({{alpha(t), hd[t], h[t]}, {alpha(t), h[t], hd[t]}});
    for (Eigen::Index t = 0; t < t_count; ++t) dirs.push_back({{cd(1.0), h[t], h[t]}});
    for (Eigen::Index t = 0; t < t_count; ++t) dirs.push_back({{kJ, h[t], h[t]}});
    return dirs;
  }
  const RVec angles = scatter_angles(theta(0), theta(1), cfg.bin_offsets);
  const auto bins = angles.size();
  std::vector<CVec> h(bins);
  for (Eigen::Index i = 0; i < bins; ++i) h[i] = ch.target(angles(i));
  Direction center, spread;
  for (Eigen::Index i = 0; i < bins; ++i) {
    const cd c = alpha(i) * (-kJ * kPi * std::cos(angles(i)));
    const CVec qh = q.cwiseProduct(h[i]);
    center.push_back({c, qh, h[i]});
    center.push_back({c, h[i], qh});
    spread.push_back({c * cfg.bin_offsets(i), qh, h[i]});
    spread.push_back({c * cfg.bin_offsets(i), h[i], qh});
  }
  dirs.push_back(std::move(center));
  dirs.push_back(std::move(spread));
  for (Eigen::Index i = 0; i < bins; ++i) dirs.push_back({{cd(1.0), h[i], h[i]}});
  for (Eigen::Index i = 0; i < bins; ++i) dirs.push_back({{kJ, h[i], h[i]}});
  return dirs;
}

/// sum_r c_r u_r v_r^T (unmasked).
inline CMat materialize(const Direction& dir, Eigen::Index n) {
  CMat m = CMat::Zero(n, n);
  for (const auto& t : dir) m.noalias() += t.coef * t.left * t.right.transpose();
  return m;
}

/// diag(b) D diag(a); the ADMM iterates carry b separately from 1 - a.
inline CMat masked(const Direction& dir, const RVec& a, const RVec& b) {
  return b.cast<cd>().asDiagonal() * materialize(dir, a.size()) * a.cast<cd>().asDiagonal();
}

/// B D A for the partition `a` (B = I - A).
inline CMat masked(const Direction& dir, const RVec& a) { return masked(dir, a, RVec::Ones(a.size()) - a); }

/// Threshold below which a receive weight b_n counts as zero.
inline constexpr double kSupportTol = 1e-9;

/// R_n^{-1} on the receive support {n : 1 - a_n > 0}, zero elsewhere. Exact
/// for every FIM term since R_n^{-1} is only ever sandwiched by B.
inline CMat receive_inverse(const RVec& a, const CMat& rn, double sigma2) {
  const Eigen::Array<bool, Eigen::Dynamic, 1> support = (1.0 - a.array()) > kSupportTol;
  return support_inverse(rn, support, 1e-12 * sigma2);
}

struct LikelihoodFim {
  RMat matrix;
  bool empty_receive_support = false;
};

/// Likelihood FIM with separate transmit weights `a` and receive weights
/// `b`; `rn_inv` is the (masked) inverse noise covariance.
inline RMat likelihood_fim_ab(const std::vector<Direction>& dirs, const RVec& a, const RVec& b, const CMat& rw,
                              const CMat& rn_inv, int snapshots) {
  const auto d = static_cast<Eigen::Index>(dirs.size());
  RMat f = RMat::Zero(d, d);
  std::vector<CMat> dm(d), right(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    dm[i] = masked(dirs[i], a, b);
    right[i] = rn_inv * dm[i] * rw;
  }
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i; j < d; ++j) {
      const double v = 2.0 * snapshots * (dm[i].conjugate().cwiseProduct(right[j])).sum().real();
      f(i, j) = v;
      f(j, i) = v;
    }
  return f;
}

/// Likelihood FIM from the generic trace form; `rn_inv` is the masked
/// inverse from receive_inverse.
inline LikelihoodFim likelihood_fim(const std::vector<Direction>& dirs, const RVec& a, const CMat& rw,
                                    const CMat& rn_inv, int snapshots) {
  const auto d = static_cast<Eigen::Index>(dirs.size());
  LikelihoodFim out;
  out.matrix = RMat::Zero(d, d);
  if (((1.0 - a.array()) <= kSupportTol).all() || (a.array() <= kSupportTol).all()) {
    out.empty_receive_support = ((1.0 - a.array()) <= kSupportTol).all();
    return out;
  }
  out.matrix = likelihood_fim_ab(dirs, a, RVec::Ones(a.size()) - a, rw, rn_inv, snapshots);
  return out;
}

/// Point-target likelihood FIM evaluated at the prior means.
inline LikelihoodFim likelihood_fim_point(const ScenarioConfig& cfg, const ChannelSet& ch, const RVec& a,
                                          const CMat& rw, const CMat& rn_inv) {
  if (cfg.model != TargetModel::point) throw Error("likelihood_fim_point: scenario is not a point-target scenario");
  return likelihood_fim(response_directions(cfg, ch, cfg.prior.theta_mean, cfg.prior.alpha_mean), a, rw, rn_inv,
                        cfg.snapshots);
}

/// Extended-target likelihood FIM evaluated at the prior means.
inline LikelihoodFim likelihood_fim_extended(const ScenarioConfig& cfg, const ChannelSet& ch, const RVec& a,
                                             const CMat& rw, const CMat& rn_inv) {
  if (cfg.model != TargetModel::extended)
    throw Error("likelihood_fim_extended: scenario is not an extended-target scenario");
  return likelihood_fim(response_directions(cfg, ch, cfg.prior.theta_mean, cfg.prior.alpha_mean), a, rw, rn_inv,
                        cfg.snapshots);
}

inline LikelihoodFim likelihood_fim_at_means(const ScenarioConfig& cfg, const ChannelSet& ch, const RVec& a,
                                             const CMat& rw, const CMat& rn_inv) {
  return cfg.model == TargetModel::point ? likelihood_fim_point(cfg, ch, a, rw, rn_inv)
                                         : likelihood_fim_extended(cfg, ch, a, rw, rn_inv);
}

struct PriorFim {
  RMat theta;  // Sigma_theta^{-1}
  RMat alpha;  // 2 [[Re P, -Im P], [Im P, Re P]], P = Sigma_alpha^{-1}
};

/// Prior FIM of a Gaussian angle prior and a circular complex Gaussian RCS
/// prior, in [Re(alpha); Im(alpha)] coordinates.
inline PriorFim prior_fim(const PriorSpec& prior) {
  const RMat st = symmetric_part(prior.theta_cov);
  Eigen::LLT<RMat> lt(st);
  if (lt.info() != Eigen::Success) throw Error("prior_fim: angle covariance is singular or indefinite");
  const CMat sa = hermitian_part(prior.alpha_cov);
  Eigen::LLT<CMat> la(sa);
  if (la.info() != Eigen::Success) throw Error("prior_fim: RCS covariance is singular or indefinite");
  PriorFim out;
  out.theta = symmetric_part(lt.solve(RMat::Identity(st.rows(), st.cols())));
  const CMat p = la.solve(CMat::Identity(sa.rows(), sa.cols()));
  const Eigen::Index m = p.rows();
  RMat fa(2 * m, 2 * m);
  fa.topLeftCorner(m, m) = 2.0 * p.real();
  fa.topRightCorner(m, m) = -2.0 * p.imag();
  fa.bottomLeftCorner(m, m) = 2.0 * p.imag();
  fa.bottomRightCorner(m, m) = 2.0 * p.real();
  out.alpha = symmetric_part(fa);
  return out;
}

/// Likelihood and prior information partitioned into angle and RCS blocks.
struct FimBlocks {
  RMat likelihood;  // full F_L
  PriorFim prior;

  Eigen::Index n_theta() const { return prior.theta.rows(); }
  Eigen::Index n_alpha() const { return prior.alpha.rows(); }
  RMat theta_theta() const { return likelihood.topLeftCorner(n_theta(), n_theta()); }
  RMat theta_alpha() const { return likelihood.topRightCorner(n_theta(), n_alpha()); }
  RMat alpha_alpha() const { return likelihood.bottomRightCorner(n_alpha(), n_alpha()); }
  RMat bayesian() const {
    RMat fb = likelihood;
    fb.topLeftCorner(n_theta(), n_theta()) += prior.theta;
    fb.bottomRightCorner(n_alpha(), n_alpha()) += prior.alpha;
    return fb;
  }
};

struct Bcrb {
  double weighted = 0.0;  // Tr{Lambda J^{-1}}
  RVec per_angle;         // diag(J^{-1}), rad^2
  RMat schur;             // J
};

/// Weighted BCRB of the angle block through the Schur complement
/// J = F_tt + F_theta - F_ta (F_aa + F_alpha)^{-1} F_ta^T.
inline Bcrb bcrb(const FimBlocks& blocks, const RVec& weights) {
  const auto nt = blocks.n_theta();
  if (weights.size() != nt) throw Error("bcrb: weight vector has wrong length");
  const RMat faa = symmetric_part(blocks.alpha_alpha() + blocks.prior.alpha);
  Eigen::LLT<RMat> la(faa);
  if (la.info() != Eigen::Success) throw Error("bcrb: RCS information block is not invertible");
  const RMat fta = blocks.theta_alpha();
  RMat j = blocks.theta_theta() + blocks.prior.theta - fta * la.solve(fta.transpose());
  j = symmetric_part(j);
  Eigen::SelfAdjointEigenSolver<RMat> es(j, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0);
  const double hi = es.eigenvalues()(nt - 1);
  if (!(lo > 0.0) || hi / lo > 1e15)
    throw Error("bcrb: Schur complement is singular (condition number " + std::to_string(hi / lo) + ")");
  Bcrb out;
  out.schur = j;
  const RMat inv = j.llt().solve(RMat::Identity(nt, nt));
  out.per_angle = inv.diagonal();
  out.weighted = (weights.asDiagonal() * inv).trace();
  return out;
}

/// Everything needed to evaluate the design-stage BCRB of one (a, R_w).
inline FimBlocks design_fim(const ScenarioConfig& cfg, const ChannelSet& ch, const RVec& a, const CMat& rw,
                            const CMat& rn_inv) {
  FimBlocks blocks;
  blocks.likelihood = likelihood_fim_at_means(cfg, ch, a, rw, rn_inv).matrix;
  blocks.prior = prior_fim(cfg.prior);
  return blocks;
}

/// Finite-difference FIM: differentiates eta(xi) = vec{B G(xi) A X} with
/// X X^H = L R_w numerically and assembles 2 Re{d eta^H R^{-1} d eta}.
/// Independent of the analytic derivative directions.
inline RMat fim_fd_oracle(const ScenarioConfig& cfg, const ChannelSet& ch, const RVec& a, const CMat& rw,
                          const CMat& rn_inv, const RVec& theta0, const CVec& alpha0, double step = 1e-6) {
  if (!(step > 1e-14)) throw Error("fim_fd_oracle: step size underflow");
  const Eigen::Index n = a.size();
  const Eigen::Index nt = theta0.size();
  const Eigen::Index na = alpha0.size();
  const CMat x = std::sqrt(static_cast<double>(cfg.snapshots)) * psd_sqrt(rw);
  const RVec b = RVec::Ones(n) - a;
  auto eta = [&](const RVec& xi) {
    const RVec th = xi.head(nt);
    CVec al(na);
    for (Eigen::Index i = 0; i < na; ++i) al(i) = cd(xi(nt + i), xi(nt + na + i));
    const CMat g = target_response(cfg, ch, th, al);
    return CMat(b.cast<cd>().asDiagonal() * g * a.cast<cd>().asDiagonal() * x);
  };
  RVec xi0(nt + 2 * na);
  xi0.head(nt) = theta0;
  xi0.segment(nt, na) = alpha0.real();
  xi0.tail(na) = alpha0.imag();
  const Eigen::Index d = xi0.size();
  std::vector<CMat> deriv(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double h = step * std::max(1.0, std::abs(xi0(i)));
    RVec xp = xi0, xm = xi0;
    xp(i) += h;
    xm(i) -= h;
    deriv[i] = (eta(xp) - eta(xm)) / (2.0 * h);
  }
  RMat f(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i; j < d; ++j) {
      const double v = 2.0 * (deriv[i].conjugate().cwiseProduct(rn_inv * deriv[j])).sum().real();
      f(i, j) = v;
      f(j, i) = v;
    }
  return f;
}

}  // namespace isac::fim
