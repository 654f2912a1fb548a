// SPDX-License-Identifier: Apache-2.0
//
// Joint MAP estimation of target angles and reflection coefficients from the
// received echo block. The RCS vector enters linearly and is concentrated out
// in closed form; the angles are found by damped Newton iterations with an
// Armijo line search on the concentrated criterion
//
//   L(theta) = -p^H D^-1 p + 1/2 (theta - mu)^T Sigma^-1 (theta - mu),
//   D = V^H R^-1 V + Sigma_alpha^-1,  p = V^H R^-1 y + Sigma_alpha^-1 mu_alpha,
//
// where V stacks vec(B h h^T A W S) per target (or per angle bin) and
// R = I_L (x) R_n. Every inner product is reduced to N x N traces through
// X X^H and R_n^-1 Y X^H with X = A W S, so no NL x NL matrix is formed.

#pragma once

#include "isac/fim.hpp"
#include "isac/linalg.hpp"
#include "isac/priors.hpp"
#include "isac/scene.hpp"

#include <limits>
#include <vector>

namespace isac::est {

struct EstimatorOptions {
  double armijo_c = 1e-4;
  double shrink = 0.5;
  double min_step = 1e-12;
  double step_tol = 1e-7;  // rad
  int max_iter = 100;
  double psd_tol = 1e-10;  // relative to |trace|
};

/// Data and fixed model quantities for one echo block.
struct MapProblem {
  ScenarioConfig cfg;
  ChannelSet ch;
  RVec b;        // receive mask
  CMat rinv;     // R_n^-1 on the receive support
  CMat sx;       // X X^H, X = A W S
  CMat z;        // R_n^-1 Y X^H
  double yy = 0;  // Tr{Y^H R_n^-1 Y}
  RMat theta_prec;
  CMat alpha_prec;
  CVec alpha_shift;  // Sigma_alpha^-1 mu_alpha
  RMat angle_map;    // rows: regressors, cols: angle parameters

  int num_regressors() const { return static_cast<int>(angle_map.rows()); }
  int num_params() const { return static_cast<int>(angle_map.cols()); }
};

inline MapProblem make_problem(const ScenarioConfig& cfg, const ChannelSet& ch, const RVec& a, const CMat& w,
                               const CMat& symbols, const CMat& y, const CMat& rn_inv) {
  const int n = cfg.num_antennas;
  if (a.size() != n || y.rows() != n || w.rows() != n) throw Error("estimator: dimension mismatch");
  MapProblem p;
  p.cfg = cfg;
  p.ch = ch;
  p.b = RVec::Ones(n) - a;
  p.rinv = rn_inv;
  const CMat x = a.cast<cd>().asDiagonal() * (w * symbols);
  p.sx = x * x.adjoint();
  const CMat ry = rn_inv * y;
  p.z = ry * x.adjoint();
  p.yy = (y.conjugate().cwiseProduct(ry)).sum().real();
  p.theta_prec = symmetric_part(cfg.prior.theta_cov).inverse();
  p.alpha_prec = hermitian_part(cfg.prior.alpha_cov).inverse();
  p.alpha_shift = p.alpha_prec * cfg.prior.alpha_mean;
  if (cfg.model == TargetModel::point) {
    p.angle_map = RMat::Identity(cfg.num_angles(), cfg.num_angles());
  } else {
    const auto bins = cfg.bin_offsets.size();
    p.angle_map.resize(bins, 2);
    p.angle_map.col(0).setOnes();
    p.angle_map.col(1) = cfg.bin_offsets;
  }
  return p;
}

/// Echo-block problem with R_n from the self-interference model at the
/// realized beamformer.
inline MapProblem make_problem(const ScenarioConfig& cfg, const ChannelSet& ch, const RVec& a, const CMat& w,
                               const EchoBatch& echo) {
  const CMat rn = noise_covariance(a, w, ch.si, cfg.radar_noise);
  return make_problem(cfg, ch, a, w, echo.symbols, echo.y, fim::receive_inverse(a, rn, cfg.radar_noise));
}

/// Angle of every regressor (target or bin) at theta.
inline RVec regressor_angles(const MapProblem& p, const RVec& theta) {
  if (p.cfg.model == TargetModel::point) return theta;
  return scatter_angles(theta(0), theta(1), p.cfg.bin_offsets);
}

struct MapWorkspace {
  RVec theta;
  std::vector<CMat> m0, m1, m2;  // B h h^T and its first and second angle derivatives
  CMat d;                        // V^H R^-1 V + Sigma_alpha^-1
  CVec p;
  CVec alpha;                    // D^-1 p
  double objective = 0.0;
  RVec gradient;
  RMat hessian;
};

namespace detail {

/// <U X, W X> = Tr{U^H R^-1 W X X^H}.
inline cd ip_xx(const MapProblem& p, const CMat& u, const CMat& w) {
  return (u.conjugate().cwiseProduct(p.rinv * w * p.sx)).sum();
}
/// <U X, Y> = Tr{U^H R^-1 Y X^H}.
inline cd ip_xy(const MapProblem& p, const CMat& u) { return (u.conjugate().cwiseProduct(p.z)).sum(); }

}  // namespace detail

/// Builds the regressors at theta and the closed-form RCS; order 1 adds the
/// gradient, order 2 the Hessian.
inline MapWorkspace evaluate(const MapProblem& p, const RVec& theta, int order = 0) {
  const int n = p.cfg.num_antennas;
  const int m = p.num_regressors();
  const int np = p.num_params();
  if (theta.size() != np) throw Error("estimator: angle vector has the wrong length");
  MapWorkspace ws;
  ws.theta = theta;
  const RVec ang = regressor_angles(p, theta);
  const auto bd = p.b.cast<cd>().asDiagonal();
  for (int k = 0; k < m; ++k) {
    const auto sd = steering_derivatives(ang(k), n, p.ch.target_gain);
    const CVec h = p.ch.target(ang(k));
    ws.m0.push_back(bd * (h * h.transpose()));
    ws.m1.push_back(bd * (sd.first * h.transpose() + h * sd.first.transpose()));
    ws.m2.push_back(bd * (sd.second * h.transpose() + 2.0 * sd.first * sd.first.transpose() + h * sd.second.transpose()));
  }
  ws.d = p.alpha_prec;
  ws.p = p.alpha_shift;
  for (int k = 0; k < m; ++k) {
    ws.p(k) += detail::ip_xy(p, ws.m0[k]);
    for (int l = 0; l < m; ++l) ws.d(k, l) += detail::ip_xx(p, ws.m0[k], ws.m0[l]);
  }
  ws.d = hermitian_part(ws.d);
  const Eigen::LDLT<CMat> dl(ws.d);
  ws.alpha = dl.solve(ws.p);
  const RVec dt = theta - p.cfg.prior.theta_mean;
  ws.objective = -ws.p.dot(ws.alpha).real() + 0.5 * dt.dot(p.theta_prec * dt);
  if (order < 1) return ws;

  // Residual r = Y - V alpha; <r, W X> = <Y, W X> - <V alpha X, W X>.
  CMat ma = CMat::Zero(n, n);
  for (int k = 0; k < m; ++k) ma += ws.alpha(k) * ws.m0[k];
  auto ip_r = [&](const CMat& w) { return std::conj(detail::ip_xy(p, w)) - detail::ip_xx(p, ma, w); };
  std::vector<CMat> mdot(np);
  for (int i = 0; i < np; ++i) {
    mdot[i] = CMat::Zero(n, n);
    for (int k = 0; k < m; ++k) mdot[i] += p.angle_map(k, i) * ws.alpha(k) * ws.m1[k];
  }
  ws.gradient = p.theta_prec * dt;
  for (int i = 0; i < np; ++i) ws.gradient(i) -= 2.0 * ip_r(mdot[i]).real();
  if (order < 2) return ws;

  // d alpha / d theta_j = D^-1 (Vdot_j^H R^-1 r - V^H R^-1 Vdot_j alpha).
  std::vector<CVec> dalpha(np);
  std::vector<cd> r_m1(m);
  for (int k = 0; k < m; ++k) r_m1[k] = std::conj(ip_r(ws.m1[k]));  // <M1_k X, r>
  for (int j = 0; j < np; ++j) {
    CVec rhs(m);
    for (int k = 0; k < m; ++k) rhs(k) = p.angle_map(k, j) * r_m1[k] - detail::ip_xx(p, ws.m0[k], mdot[j]);
    dalpha[j] = dl.solve(rhs);
  }
  ws.hessian = p.theta_prec;
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < np; ++j) {
      CMat mda = CMat::Zero(n, n), mdd = CMat::Zero(n, n), mdi = CMat::Zero(n, n);
      for (int k = 0; k < m; ++k) {
        mda += dalpha[j](k) * ws.m0[k];
        mdd += p.angle_map(k, i) * p.angle_map(k, j) * ws.alpha(k) * ws.m2[k];
        mdi += p.angle_map(k, i) * dalpha[j](k) * ws.m1[k];
      }
      const cd t1 = -detail::ip_xx(p, mdot[j] + mda, mdot[i]);
      const cd t2 = ip_r(mdd);
      const cd t3 = ip_r(mdi);
      ws.hessian(i, j) -= 2.0 * (t1 + t2 + t3).real();
    }
  ws.hessian = symmetric_part(ws.hessian);
  return ws;
}

/// alpha = D^-1 p at theta.
inline CVec concentrate_alpha(const MapProblem& p, const RVec& theta) { return evaluate(p, theta).alpha; }

inline double concentrated_objective(const MapProblem& p, const RVec& theta) { return evaluate(p, theta).objective; }

inline RVec map_gradient(const MapProblem& p, const RVec& theta) { return evaluate(p, theta, 1).gradient; }

inline RMat map_hessian(const MapProblem& p, const RVec& theta) { return evaluate(p, theta, 2).hessian; }

/// Full negative log-posterior up to a constant, for oracles:
/// ||y - V alpha||^2_R + ||alpha - mu_alpha||^2_Sigma + 1/2 ||theta - mu||^2_Sigma.
inline double full_objective(const MapProblem& p, const RVec& theta, const CVec& alpha) {
  const auto ws = evaluate(p, theta);
  const CVec da = alpha - p.cfg.prior.alpha_mean;
  const RVec dt = theta - p.cfg.prior.theta_mean;
  cd quad = 0.0;
  for (int k = 0; k < p.num_regressors(); ++k) {
    quad -= 2.0 * std::conj(alpha(k)) * detail::ip_xy(p, ws.m0[k]);
    for (int l = 0; l < p.num_regressors(); ++l)
      quad += std::conj(alpha(k)) * alpha(l) * detail::ip_xx(p, ws.m0[k], ws.m0[l]);
  }
  return p.yy + quad.real() + da.dot(p.alpha_prec * da).real() + 0.5 * dt.dot(p.theta_prec * dt);
}

struct EstimationResult {
  RVec theta;
  CVec alpha;
  int iterations = 0;
  double objective = 0.0;
  bool converged = false;
  bool line_search_failed = false;
  std::vector<double> steps;       // accepted Armijo step sizes
  std::vector<double> objectives;  // L(theta) at the start and after each accepted step
};

/// Newton iterations with Armijo backtracking from the prior mean.
inline EstimationResult run_algorithm2(const MapProblem& p, const EstimatorOptions& opt = {}) {
  EstimationResult out;
  RVec theta = p.cfg.prior.theta_mean;
  MapWorkspace ws = evaluate(p, theta, 2);
  out.objectives.push_back(ws.objective);
  for (int it = 0; it < opt.max_iter; ++it) {
    RMat h = ws.hessian;
    Eigen::SelfAdjointEigenSolver<RMat> es(h, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) < opt.psd_tol * std::abs(h.trace())) h = RMat::Identity(h.rows(), h.cols());
    const RVec dir = -h.ldlt().solve(ws.gradient);
    if (dir.norm() < opt.step_tol) {
      out.converged = true;
      break;
    }
    const double slope = ws.gradient.dot(dir);
    double d = 1.0;
    bool accepted = false;
    MapWorkspace next;
    while (d >= opt.min_step) {
      const RVec cand = theta + d * dir;
      const double f = concentrated_objective(p, cand);
      if (std::isfinite(f) && f <= ws.objective + opt.armijo_c * d * slope) {
        next = evaluate(p, cand, 2);
        accepted = true;
        break;
      }
      d *= opt.shrink;
    }
    if (!accepted) {
      out.line_search_failed = true;
      break;
    }
    const double step = (d * dir).norm();
    theta = next.theta;
    ws = std::move(next);
    out.steps.push_back(d);
    out.objectives.push_back(ws.objective);
    out.iterations = it + 1;
    if (step < opt.step_tol) {
      out.converged = true;
      break;
    }
  }
  out.theta = theta;
  out.alpha = ws.alpha;
  out.objective = ws.objective;
  return out;
}

}  // namespace isac::est
