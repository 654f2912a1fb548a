// SPDX-License-Identifier: Apache-2.0
//
// Joint array partitioning and transmit beamforming by ADMM-driven
// alternating optimization. Each outer iteration solves three semidefinite
// relaxations (beamformer covariance, lifted transmit mask, lifted receive
// mask), updates the consensus multiplier and refreshes the
// self-interference-plus-noise covariance. Fixed-partition benchmarks reuse
// the beamformer step only.
//
// The BCRB enters every subproblem through the Schur-complement LMI
//
//   [[F_tt + F_theta - L^1/2 U L^1/2, F_ta], [F_ta^T, F_aa + F_alpha]] >= 0
//
// congruence-scaled by the prior information, and Tr{U^-1} through an
// inverse-trace epigraph. The objective is normalized by the prior-only
// bound Tr{Lambda Sigma_theta} so it is comparable with the ADMM penalties.

#pragma once

#include "isac/fim.hpp"
#include "isac/linalg.hpp"
#include "isac/random.hpp"
#include "isac/scene.hpp"
#include "isac/sdp.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace isac::design {

struct DesignParams {
  double rho1 = 1.0;
  double rho2 = 10.0;
  double rho1_growth = 1.5;  // rho1 <- rho1 * growth after each outer iteration
  double rho1_max = 1e3;
  int max_outer = 30;
  double rel_tol = 1e-3;
  int randomization_samples = 100;
  double rounding_threshold = 0.5;
  double rank_one_ratio = 1e4;
  int polish_passes = 2;
  bool threshold_sweep = true;
  int local_search_evals = 400;  // 0 disables the finalization search
  std::uint64_t seed = 1;
  sdp::SolverOptions solver;
  bool verbose = false;

  void validate() const {
    if (!(rho1 > 0.0) || !(rho2 > 0.0)) throw Error("design: penalty weights must be positive");
    if (max_outer < 1) throw Error("design: need at least one outer iteration");
    if (randomization_samples < 0) throw Error("design: randomization count must be non-negative");
  }
};

/// W = [W_c W_r] with R_w = W W^H and R_k = w_k w_k^H.
struct BeamformerSet {
  CMat w;
  CMat rw;
  std::vector<CMat> rk;

  int num_users() const { return static_cast<int>(rk.size()); }
};

/// Immutable per-scenario data shared by all subproblems.
struct DesignContext {
  ScenarioConfig cfg;
  ChannelSet ch;
  std::vector<fim::Direction> dirs;  // at the prior means
  fim::PriorFim prior;
  double prior_bcrb = 0.0;           // Tr{Lambda Sigma_theta}
  double scale = 0.0;                // objective normalizer

  explicit DesignContext(const ScenarioConfig& c) : cfg(c), ch(make_channels(c)) {
    cfg.validate();
    dirs = fim::response_directions(cfg, ch, cfg.prior.theta_mean, cfg.prior.alpha_mean);
    prior = fim::prior_fim(cfg.prior);
    prior_bcrb = (cfg.weights.asDiagonal() * symmetric_part(cfg.prior.theta_cov)).trace();
    scale = prior_bcrb;
  }
  int n() const { return cfg.num_antennas; }
  int k() const { return cfg.num_users(); }
  int t() const { return cfg.num_sensing(); }
};

// ---------------------------------------------------------------------------
// FIM as linear maps of the lifted variables
// ---------------------------------------------------------------------------

/// F_L(r, c) = sum_p coef(pair(r, c), p) x_p for a parameter vector x.
struct FimMap {
  int dim = 0;
  RMat coef;

  int pair(int r, int c) const {
    if (r > c) std::swap(r, c);
    return r * dim - r * (r - 1) / 2 + (c - r);
  }
  RMat evaluate(const RVec& x) const {
    const RVec v = coef * x;
    RMat f(dim, dim);
    for (int r = 0; r < dim; ++r)
      for (int c = r; c < dim; ++c) f(r, c) = f(c, r) = v(pair(r, c));
    return f;
  }
};

/// Parameters of a real symmetric matrix in SymmetricVar order.
inline RVec symmetric_params(const RMat& m) {
  const int n = static_cast<int>(m.rows());
  const sdp::SymmetricVar s{0, n};
  RVec x(s.size());
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) x(s.index(i, j)) = 0.5 * (m(i, j) + m(j, i));
  return x;
}

/// Parameters of a Hermitian matrix in HermitianVar order.
inline RVec hermitian_params(const CMat& m) {
  const int n = static_cast<int>(m.rows());
  const sdp::HermitianVar h{0, n};
  RVec x(h.size());
  for (int i = 0; i < n; ++i) {
    x(h.diag(i)) = m(i, i).real();
    for (int j = i + 1; j < n; ++j) {
      x(h.re(i, j)) = m(i, j).real();
      x(h.im(i, j)) = m(i, j).imag();
    }
  }
  return x;
}

/// Coefficients of x^T C x in SymmetricVar order (C real symmetric).
inline RVec quadratic_coefficients(const RMat& c) {
  const int n = static_cast<int>(c.rows());
  const sdp::SymmetricVar s{0, n};
  RVec out(s.size());
  for (int i = 0; i < n; ++i) {
    out(s.index(i, i)) = c(i, i);
    for (int j = i + 1; j < n; ++j) out(s.index(i, j)) = c(i, j) + c(j, i);
  }
  return out;
}

inline std::vector<int> support_of(const RVec& a) {
  std::vector<int> s;
  for (int i = 0; i < a.size(); ++i)
    if (a(i) > fim::kSupportTol) s.push_back(i);
  return s;
}

/// F_L as a linear map of R_w restricted to `support` (entries of R_w off
/// the support are zero), for fixed a, b and R_n^{-1}.
inline FimMap fim_map_rw(const std::vector<fim::Direction>& dirs, const RVec& a, const RVec& b, const CMat& rinv,
                         int snapshots, const std::vector<int>& support) {
  const int d = static_cast<int>(dirs.size());
  const int ns = static_cast<int>(support.size());
  const sdp::HermitianVar h{0, ns};
  std::vector<CMat> x(d), y(d);
  for (int i = 0; i < d; ++i) {
    const CMat full = fim::masked(dirs[i], a, b);
    x[i] = full(Eigen::all, support);
    y[i] = rinv * x[i];
  }
  FimMap m{d, RMat(d * (d + 1) / 2, h.size())};
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j)
      m.coef.row(m.pair(i, j)) = 2.0 * snapshots * h.functional(x[i].adjoint() * y[j]).transpose();
  return m;
}

/// F_L as a linear map of A_1 = a a^T for fixed b, R_n^{-1} and R_w.
inline FimMap fim_map_a(const std::vector<fim::Direction>& dirs, const RVec& b, const CMat& rinv, const CMat& rw,
                        int snapshots) {
  const int d = static_cast<int>(dirs.size());
  const int n = static_cast<int>(b.size());
  const auto bd = b.cast<cd>().asDiagonal();
  std::vector<CMat> dm(d), left(d);
  for (int i = 0; i < d; ++i) {
    dm[i] = fim::materialize(dirs[i], n);
    left[i] = rinv * (bd * dm[i]);
  }
  FimMap m{d, RMat(d * (d + 1) / 2, n * (n + 1) / 2)};
  const CMat rwt = rw.transpose();
  for (int i = 0; i < d; ++i) {
    const CMat di = (bd * dm[i]).adjoint();
    for (int j = i; j < d; ++j) {
      const RMat c = (2.0 * snapshots) * (di * left[j]).cwiseProduct(rwt).real();
      m.coef.row(m.pair(i, j)) = quadratic_coefficients(symmetric_part(c)).transpose();
    }
  }
  return m;
}

/// F_L as a linear map of B_1 = b b^T for fixed a, R_n^{-1} and R_w.
inline FimMap fim_map_b(const std::vector<fim::Direction>& dirs, const RVec& a, const CMat& rinv, const CMat& rw,
                        int snapshots) {
  const int d = static_cast<int>(dirs.size());
  const int n = static_cast<int>(a.size());
  const auto ad = a.cast<cd>().asDiagonal();
  const CMat arwa = ad * rw * ad;
  std::vector<CMat> dm(d);
  for (int i = 0; i < d; ++i) dm[i] = fim::materialize(dirs[i], n);
  FimMap m{d, RMat(d * (d + 1) / 2, n * (n + 1) / 2)};
  for (int i = 0; i < d; ++i) {
    const CMat tail = arwa * dm[i].adjoint();
    for (int j = i; j < d; ++j) {
      const CMat nij = dm[j] * tail;
      const RMat c = (2.0 * snapshots) * rinv.cwiseProduct(nij.transpose()).real();
      m.coef.row(m.pair(i, j)) = quadratic_coefficients(symmetric_part(c)).transpose();
    }
  }
  return m;
}

/// Normalized weighted BCRB Tr{Lambda J^-1} / Tr{Lambda Sigma_theta} for a
/// likelihood FIM; +inf when the Schur complement is singular.
inline double normalized_bcrb(const DesignContext& ctx, const RMat& fl) {
  fim::FimBlocks blocks{fl, ctx.prior};
  try {
    return fim::bcrb(blocks, ctx.cfg.weights).weighted / ctx.scale;
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

/// Adds the scaled Schur-complement LMI and the inverse-trace epigraph.
/// Variables p of `map` live at var_offset + p and enter multiplied by
/// `param_scale`.
inline sdp::InverseTraceEpigraph add_bcrb_epigraph(sdp::ProblemBuilder& pb, const DesignContext& ctx,
                                                   const FimMap& map, int var_offset, double param_scale) {
  const int nt = static_cast<int>(ctx.prior.theta.rows());
  const int na = static_cast<int>(ctx.prior.alpha.rows());
  const int d = nt + na;
  if (map.dim != d) throw Error("add_bcrb_epigraph: FIM map dimension mismatch");
  RMat fp = RMat::Zero(d, d);
  fp.topLeftCorner(nt, nt) = ctx.prior.theta;
  fp.bottomRightCorner(na, na) = ctx.prior.alpha;
  const RVec ds = fp.diagonal().cwiseSqrt().cwiseInverse();
  RVec w(nt);
  for (int i = 0; i < nt; ++i) w(i) = ctx.cfg.weights(i) * ds(i) * ds(i) / ctx.scale;
  auto e = sdp::epigraph_inverse_trace(pb, nt, w);
  const int blk = pb.add_lmi(d);
  for (int r = 0; r < d; ++r)
    for (int c = r; c < d; ++c) {
      const double s = ds(r) * ds(c);
      if (fp(r, c) != 0.0) pb.lmi_constant(blk, r, c, s * fp(r, c));
      const auto row = map.coef.row(map.pair(r, c));
      for (Eigen::Index p = 0; p < row.size(); ++p)
        if (row(p) != 0.0) pb.lmi_term(blk, r, c, var_offset + static_cast<int>(p), s * param_scale * row(p));
    }
  pb.lmi_symmetric(blk, 0, e.u, -1.0);
  return e;
}

// ---------------------------------------------------------------------------
// Beamformer update
// ---------------------------------------------------------------------------

struct WUpdate {
  BeamformerSet beam;
  double objective = 0.0;        // normalized BCRB of the relaxation
  double residual_min_eig = 0.0; // min eig of R_w - sum R_k over P, before clipping
  sdp::Status status = sdp::Status::optimal;
  int iterations = 0;
};

inline void check_solution(const sdp::ConicSolution& s, const char* what) {
  if (s.status == sdp::Status::optimal) return;
  if ((s.status == sdp::Status::max_iterations || s.status == sdp::Status::numerical_error) && s.gap < 1e-5 &&
      s.primal_infeasibility < 1e-6 && s.dual_infeasibility < 1e-6)
    return;
  throw Error(std::string(what) + ": SDP solve failed (" + sdp::to_string(s.status) + ")");
}

/// w_k = R_k v / sqrt(v^H R_k v) with v = A h_k^*; exact when R_k = w w^H.
inline CVec recover_beam(const CMat& rk, const CVec& v) {
  const CVec rv = rk * v;
  const double s = v.dot(rv).real();
  return s > 0.0 ? CVec(rv / std::sqrt(s)) : CVec::Zero(rk.rows());
}

/// Largest common margin s with every normalized SINR row >= s under the
/// power budget, and the user whose row carries the largest multiplier.
/// The SINR targets are reachable iff s >= 1.
inline std::pair<double, int> sinr_phase1(const DesignContext& ctx, const RVec& a, const DesignParams& params) {
  const auto& cfg = ctx.cfg;
  const int k = ctx.k();
  if (k == 0) return {std::numeric_limits<double>::infinity(), -1};
  const std::vector<int> sup = support_of(a);
  const int ns = static_cast<int>(sup.size());
  sdp::ProblemBuilder pb;
  const auto rw = pb.add_hermitian(ns);
  std::vector<sdp::HermitianVar> rk;
  for (int u = 0; u < k; ++u) rk.push_back(pb.add_hermitian(ns));
  const int s = pb.add_variables(1);
  pb.add_cost(s, -1.0);
  const int res = pb.add_lmi(2 * ns);
  pb.lmi_hermitian(res, 0, rw, 1.0);
  for (const auto& r : rk) pb.lmi_hermitian(res, 0, r, -1.0);
  for (const auto& r : rk) pb.lmi_hermitian(pb.add_lmi(2 * ns), 0, r, 1.0);
  const sdp::HermitianVar local{0, ns};
  for (int u = 0; u < k; ++u) {
    CVec v(ns);
    for (int i = 0; i < ns; ++i) v(i) = a(sup[i]) * ctx.ch.users(sup[i], u);
    const RVec f = local.functional(v.conjugate() * v.transpose()) * (cfg.power / cfg.user_noise[u]);
    const double g = 1.0 + 1.0 / cfg.sinr_threshold[u];
    sdp::LinearRow row;
    row.rhs = 0.0;
    for (int q = 0; q < f.size(); ++q) {
      if (f(q) == 0.0) continue;
      row.coeffs.emplace_back(rk[u].offset + q, g * f(q));
      row.coeffs.emplace_back(rw.offset + q, -f(q));
    }
    row.coeffs.emplace_back(s, -1.0);
    pb.add_ge(std::move(row));
  }
  {
    sdp::LinearRow row;
    row.rhs = 1.0;
    for (int i = 0; i < ns; ++i) row.coeffs.emplace_back(rw.diag(i), a(sup[i]) * a(sup[i]));
    pb.add_le(std::move(row));
  }
  const auto sol = sdp::solve(pb.build(), params.solver);
  int worst = 0;
  for (int u = 1; u < k; ++u)
    if (sol.inequality_duals(u) > sol.inequality_duals(worst)) worst = u;
  return {sol.x(s), worst};
}

/// Solves the beamformer relaxation at fixed (a, b, R_n^{-1}) and recovers
/// rank-one communication beams plus the radar beams.
inline WUpdate update_w(const DesignContext& ctx, const RVec& a, const RVec& b, const CMat& rinv,
                        const DesignParams& params) {
  const auto& cfg = ctx.cfg;
  const int n = ctx.n(), k = ctx.k();
  const std::vector<int> sup = support_of(a);
  const int ns = static_cast<int>(sup.size());
  if (ns == 0) throw Error("update_w: partition has no transmit antennas");
  const double p = cfg.power;

  sdp::ProblemBuilder pb;
  const auto rw = pb.add_hermitian(ns);
  std::vector<sdp::HermitianVar> rk;
  for (int u = 0; u < k; ++u) rk.push_back(pb.add_hermitian(ns));
  const int res = pb.add_lmi(2 * ns);
  pb.lmi_hermitian(res, 0, rw, 1.0);
  for (const auto& r : rk) pb.lmi_hermitian(res, 0, r, -1.0);
  for (const auto& r : rk) pb.lmi_hermitian(pb.add_lmi(2 * ns), 0, r, 1.0);

  const FimMap map = fim_map_rw(ctx.dirs, a, b, rinv, cfg.snapshots, sup);
  const auto epi = add_bcrb_epigraph(pb, ctx, map, rw.offset, p);

  const sdp::HermitianVar local{0, ns};
  for (int u = 0; u < k; ++u) {
    CVec v(ns);
    for (int i = 0; i < ns; ++i) v(i) = a(sup[i]) * ctx.ch.users(sup[i], u);
    const RVec f = local.functional(v.conjugate() * v.transpose()) * (p / cfg.user_noise[u]);
    sdp::LinearRow row;
    row.rhs = 1.0;
    const double g = 1.0 + 1.0 / cfg.sinr_threshold[u];
    for (int q = 0; q < f.size(); ++q) {
      if (f(q) == 0.0) continue;
      row.coeffs.emplace_back(rk[u].offset + q, g * f(q));
      row.coeffs.emplace_back(rw.offset + q, -f(q));
    }
    pb.add_ge(std::move(row));
  }
  {
    sdp::LinearRow row;
    row.rhs = 1.0;
    for (int i = 0; i < ns; ++i) row.coeffs.emplace_back(rw.diag(i), a(sup[i]) * a(sup[i]));
    pb.add_le(std::move(row));
  }

  const auto sol = sdp::solve(pb.build(), params.solver);
  if (sol.status != sdp::Status::optimal) {
    const auto [margin, worst] = sinr_phase1(ctx, a, params);
    if (margin < 1.0 - 1e-6)
      throw Error("update_w: infeasible, SINR target of user " + std::to_string(worst) +
                  " is unreachable with the current partition and power budget");
  }
  check_solution(sol, "update_w");

  auto embed = [&](const CMat& local_m) {
    CMat full = CMat::Zero(n, n);
    for (int i = 0; i < ns; ++i)
      for (int j = 0; j < ns; ++j) full(sup[i], sup[j]) = local_m(i, j);
    return full;
  };
  WUpdate out;
  out.status = sol.status;
  out.iterations = sol.iterations;
  out.objective = sol.objective;
  const CMat rw_full = embed(p * rw.value(sol.x));
  CMat residual = rw_full;
  CMat wc(n, k);
  std::vector<CMat> rks;
  for (int u = 0; u < k; ++u) {
    const CMat rku = embed(p * rk[u].value(sol.x));
    residual -= rku;
    wc.col(u) = recover_beam(rku, a.cast<cd>().cwiseProduct(ctx.ch.users.col(u).conjugate()));
  }
  out.residual_min_eig = min_eigenvalue(hermitian_part(residual)) / p;
  CMat rr = rw_full;
  for (int u = 0; u < k; ++u) {
    rks.push_back(wc.col(u) * wc.col(u).adjoint());
    rr -= rks.back();
  }
  if (out.residual_min_eig < -1e-8)
    throw Error("update_w: radar covariance R_w - sum R_k is indefinite (min eigenvalue " +
                std::to_string(out.residual_min_eig) + " P)");
  // Rank-one recovery can leave a small negative part when the solver stops
  // on a numerical error; clip it and pull the beam back inside the budget.
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(rr));
  const RVec lam = es.eigenvalues().cwiseMax(0.0);
  CMat w(n, n + k);
  w.leftCols(k) = wc;
  w.rightCols(n) = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
  const double used = (a.cast<cd>().asDiagonal() * w).squaredNorm();
  if (used > p) {
    w *= std::sqrt(p / used);
    for (int u = 0; u < k; ++u) wc.col(u) = w.col(u);
    for (int u = 0; u < k; ++u) rks[u] = wc.col(u) * wc.col(u).adjoint();
  }
  out.beam.w = w;
  out.beam.rw = hermitian_part(w * w.adjoint());
  out.beam.rk = std::move(rks);
  return out;
}

// ---------------------------------------------------------------------------
// Partition updates
// ---------------------------------------------------------------------------

/// Everything a partition subproblem holds fixed.
struct AdmmPoint {
  RVec a, b, mu;
  BeamformerSet beam;
  CMat rinv;
};

struct PartitionUpdate {
  RVec x;
  RMat lifted;              // [[X_1, x], [x^T, 1]] from the relaxation
  bool rank_one = false;
  bool stalled = false;     // relaxation infeasible or failed; x is the previous value
  bool randomized = false;
  double objective = 0.0;   // penalized objective at the returned x
};

/// Ratio of the two leading eigenvalues of a PSD matrix.
inline double rank_one_ratio(const RMat& m) {
  Eigen::SelfAdjointEigenSolver<RMat> es(symmetric_part(m), Eigen::EigenvaluesOnly);
  const auto n = es.eigenvalues().size();
  if (n < 2) return std::numeric_limits<double>::infinity();
  const double l2 = std::max(es.eigenvalues()(n - 2), 0.0);
  return l2 > 0.0 ? es.eigenvalues()(n - 1) / l2 : std::numeric_limits<double>::infinity();
}

/// a = X_1 1 / sqrt(1^T X_1 1).
inline RVec extract_rank_one(const RMat& x1) {
  const RVec s = x1.rowwise().sum();
  const double tot = s.sum();
  if (!(tot > 0.0)) return RVec::Zero(x1.rows());
  return s / std::sqrt(tot);
}

/// Binary vector with x_n = [score_n >= threshold], repaired to
/// lo <= 1^T x <= hi by flipping the entries whose scores sit closest to the
/// threshold.
inline RVec round_with_cardinality(const RVec& score, double threshold, int lo, int hi) {
  const int n = static_cast<int>(score.size());
  if (lo > hi || lo > n || hi < 0) throw Error("round_with_cardinality: empty cardinality range");
  RVec x(n);
  for (int i = 0; i < n; ++i) x(i) = score(i) >= threshold ? 1.0 : 0.0;
  int count = static_cast<int>(x.sum());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (count < lo) {
    std::stable_sort(idx.begin(), idx.end(), [&](int i, int j) { return score(i) > score(j); });
    for (int i : idx) {
      if (count >= lo) break;
      if (x(i) == 0.0) x(i) = 1.0, ++count;
    }
  } else if (count > hi) {
    std::stable_sort(idx.begin(), idx.end(), [&](int i, int j) { return score(i) < score(j); });
    for (int i : idx) {
      if (count <= hi) break;
      if (x(i) == 1.0) x(i) = 0.0, --count;
    }
  }
  return x;
}

struct CandidateScore {
  double objective = std::numeric_limits<double>::infinity();
  bool feasible = false;
};

using CandidateEval = std::function<CandidateScore(const RVec&)>;

/// Gaussian randomization: draws `count` samples from N(x, X_1 - x x^T),
/// rounds and repairs each, and returns the best candidate under `eval`
/// (feasible candidates first). The thresholded mean is always a candidate.
inline RVec randomize(const RMat& lifted, int count, double threshold, int lo, int hi, const CandidateEval& eval,
                      Rng& rng) {
  const int n = static_cast<int>(lifted.rows()) - 1;
  const RVec mean = lifted.col(n).head(n);
  const RMat cov = symmetric_part(lifted.topLeftCorner(n, n) - mean * mean.transpose());
  Eigen::SelfAdjointEigenSolver<RMat> es(cov);
  const RMat sq = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  RVec best = round_with_cardinality(mean, threshold, lo, hi);
  CandidateScore bs = eval(best);
  for (int s = 0; s < count; ++s) {
    const RVec z = mean + sq * rng.normal(n);
    const RVec cand = round_with_cardinality(z, threshold, lo, hi);
    const CandidateScore cs = eval(cand);
    if ((cs.feasible && !bs.feasible) || (cs.feasible == bs.feasible && cs.objective < bs.objective)) {
      best = cand;
      bs = cs;
    }
  }
  return best;
}

namespace detail {

struct LiftedVars {
  sdp::SymmetricVar x1;
  int x = 0;
  int block = -1;
};

inline LiftedVars add_lifted(sdp::ProblemBuilder& pb, int n) {
  LiftedVars v;
  v.x1 = pb.add_symmetric(n);
  v.x = pb.add_variables(n);
  v.block = pb.add_lmi(n + 1);
  pb.lmi_symmetric(v.block, 0, v.x1, 1.0);
  for (int i = 0; i < n; ++i) pb.lmi_term(v.block, i, n, v.x + i, 1.0);
  pb.lmi_constant(v.block, n, n, 1.0);
  for (int i = 0; i < n; ++i) {
    pb.add_le({{{v.x1.index(i, i), 1.0}}, 1.0});
    pb.add_le({{{v.x + i, 1.0}}, 1.0});
    pb.add_ge({{{v.x + i, 1.0}}, 0.0});
  }
  return v;
}

inline void add_cardinality(sdp::ProblemBuilder& pb, const sdp::SymmetricVar& x1, int lo, int hi) {
  const int n = x1.n;
  sdp::LinearRow row;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) row.coeffs.emplace_back(x1.index(i, j), i == j ? 1.0 : 2.0);
  sdp::LinearRow lower = row;
  lower.rhs = static_cast<double>(lo) * lo;
  row.rhs = static_cast<double>(hi) * hi;
  pb.add_le(std::move(row));
  pb.add_ge(std::move(lower));
}

inline RMat lifted_value(const LiftedVars& v, const RVec& sol) {
  const int n = v.x1.n;
  RMat m(n + 1, n + 1);
  m.topLeftCorner(n, n) = v.x1.value(sol);
  for (int i = 0; i < n; ++i) m(i, n) = m(n, i) = sol(v.x + i);
  m(n, n) = 1.0;
  return m;
}

/// Quadratic SINR form D_k of the transmit mask for fixed W.
inline RMat sinr_form(const DesignContext& ctx, const BeamformerSet& beam, int u) {
  const CVec h = ctx.ch.users.col(u);
  const CVec v = h.cwiseProduct(beam.w.col(u));
  const CMat all = h.asDiagonal() * beam.rw * h.conjugate().asDiagonal();
  const double g = 1.0 + 1.0 / ctx.cfg.sinr_threshold[u];
  return symmetric_part((g * (v * v.adjoint()) - all).real());
}

}  // namespace detail

/// Penalized objective of a transmit mask at fixed (b, mu, W, R_n).
inline CandidateScore score_a(const DesignContext& ctx, const AdmmPoint& pt, const FimMap& map,
                              const std::vector<RMat>& sinr, const DesignParams& prm, const RVec& x) {
  CandidateScore s;
  const RVec r = pt.b - RVec::Ones(x.size()) + x + pt.mu / prm.rho2;
  s.objective = normalized_bcrb(ctx, map.evaluate(symmetric_params(x * x.transpose()))) +
                prm.rho1 * x.dot(RVec::Ones(x.size()) - x) + prm.rho2 * r.squaredNorm();
  double power = 0.0;
  for (int i = 0; i < x.size(); ++i) power += x(i) * x(i) * pt.beam.rw(i, i).real();
  s.feasible = power <= ctx.cfg.power * (1.0 + 1e-6);
  for (std::size_t u = 0; u < sinr.size(); ++u)
    s.feasible = s.feasible && x.dot(sinr[u] * x) >= ctx.cfg.user_noise[u] * (1.0 - 1e-6);
  return s;
}

/// Penalized objective of a receive mask at fixed (a, mu, W, R_n).
inline CandidateScore score_b(const DesignContext& ctx, const AdmmPoint& pt, const FimMap& map,
                              const DesignParams& prm, const RVec& x) {
  CandidateScore s;
  const RVec r = x - RVec::Ones(x.size()) + pt.a + pt.mu / prm.rho2;
  s.objective = normalized_bcrb(ctx, map.evaluate(symmetric_params(x * x.transpose()))) + prm.rho2 * r.squaredNorm();
  s.feasible = true;
  return s;
}

/// Transmit-mask update: lifted SDP over [[A_1, a], [a^T, 1]].
inline PartitionUpdate update_a(const DesignContext& ctx, const AdmmPoint& pt, const DesignParams& prm, Rng& rng) {
  const auto& cfg = ctx.cfg;
  const int n = ctx.n(), k = ctx.k(), t = ctx.t();
  sdp::ProblemBuilder pb;
  const auto v = detail::add_lifted(pb, n);
  const FimMap map = fim_map_a(ctx.dirs, pt.b, pt.rinv, pt.beam.rw, cfg.snapshots);
  add_bcrb_epigraph(pb, ctx, map, v.x1.offset, 1.0);

  std::vector<RMat> sinr;
  for (int u = 0; u < k; ++u) {
    sinr.push_back(detail::sinr_form(ctx, pt.beam, u));
    const RVec c = quadratic_coefficients(sinr.back()) / cfg.user_noise[u];
    sdp::LinearRow row;
    row.rhs = 1.0;
    for (int q = 0; q < c.size(); ++q)
      if (c(q) != 0.0) row.coeffs.emplace_back(v.x1.offset + q, c(q));
    pb.add_ge(std::move(row));
  }
  {
    sdp::LinearRow row;
    row.rhs = 1.0;
    for (int i = 0; i < n; ++i) row.coeffs.emplace_back(v.x1.index(i, i), pt.beam.rw(i, i).real() / cfg.power);
    pb.add_le(std::move(row));
  }
  detail::add_cardinality(pb, v.x1, k, n - t);
  // Tr{A E_b} = (rho2 - rho1) Tr{A_1} + 2 c_b^T a.
  const RVec cb = 0.5 * prm.rho1 * RVec::Ones(n) + prm.rho2 * (pt.b - RVec::Ones(n) + pt.mu / prm.rho2);
  for (int i = 0; i < n; ++i) {
    pb.add_cost(v.x1.index(i, i), prm.rho2 - prm.rho1);
    pb.add_cost(v.x + i, 2.0 * cb(i));
  }

  PartitionUpdate out;
  auto eval = [&](const RVec& x) { return score_a(ctx, pt, map, sinr, prm, x); };
  const auto sol = sdp::solve(pb.build(), prm.solver);
  try {
    check_solution(sol, "update_a");
  } catch (const Error&) {
    out.x = pt.a;
    out.stalled = true;
    out.objective = eval(pt.a).objective;
    return out;
  }
  out.lifted = detail::lifted_value(v, sol.x);
  out.rank_one = rank_one_ratio(out.lifted) >= prm.rank_one_ratio;
  const RVec eq = extract_rank_one(out.lifted.topLeftCorner(n, n)).cwiseMax(0.0).cwiseMin(1.0);
  out.x = eq;
  if (!out.rank_one) {
    const RVec r = randomize(out.lifted, prm.randomization_samples, prm.rounding_threshold, k, n - t, eval, rng);
    const auto sr = eval(r), se = eval(eq);
    if ((sr.feasible && !se.feasible) || (sr.feasible == se.feasible && sr.objective < se.objective)) {
      out.x = r;
      out.randomized = true;
    }
  }
  out.objective = eval(out.x).objective;
  return out;
}

/// Receive-mask update: lifted SDP over [[B_1, b], [b^T, 1]].
inline PartitionUpdate update_b(const DesignContext& ctx, const AdmmPoint& pt, const DesignParams& prm, Rng& rng) {
  const auto& cfg = ctx.cfg;
  const int n = ctx.n(), k = ctx.k(), t = ctx.t();
  sdp::ProblemBuilder pb;
  const auto v = detail::add_lifted(pb, n);
  const FimMap map = fim_map_b(ctx.dirs, pt.a, pt.rinv, pt.beam.rw, cfg.snapshots);
  add_bcrb_epigraph(pb, ctx, map, v.x1.offset, 1.0);
  detail::add_cardinality(pb, v.x1, t, n - k);
  // Tr{B E_a} = rho2 Tr{B_1} + 2 rho2 (a - 1 + mu / rho2)^T b.
  const RVec ca = prm.rho2 * (pt.a - RVec::Ones(n) + pt.mu / prm.rho2);
  for (int i = 0; i < n; ++i) {
    pb.add_cost(v.x1.index(i, i), prm.rho2);
    pb.add_cost(v.x + i, 2.0 * ca(i));
  }

  PartitionUpdate out;
  auto eval = [&](const RVec& x) { return score_b(ctx, pt, map, prm, x); };
  const auto sol = sdp::solve(pb.build(), prm.solver);
  try {
    check_solution(sol, "update_b");
  } catch (const Error&) {
    out.x = pt.b;
    out.stalled = true;
    out.objective = eval(pt.b).objective;
    return out;
  }
  out.lifted = detail::lifted_value(v, sol.x);
  out.rank_one = rank_one_ratio(out.lifted) >= prm.rank_one_ratio;
  const RVec eq = extract_rank_one(out.lifted.topLeftCorner(n, n)).cwiseMax(0.0).cwiseMin(1.0);
  out.x = eq;
  if (!out.rank_one) {
    const RVec r = randomize(out.lifted, prm.randomization_samples, prm.rounding_threshold, t, n - k, eval, rng);
    if (eval(r).objective < eval(eq).objective) {
      out.x = r;
      out.randomized = true;
    }
  }
  out.objective = eval(out.x).objective;
  return out;
}

/// mu <- mu + rho2 (b - 1 + a).
inline RVec update_dual(const RVec& mu, const RVec& a, const RVec& b, double rho2) {
  return mu + rho2 * (b - RVec::Ones(a.size()) + a);
}

// ---------------------------------------------------------------------------
// Benchmarks, evaluation and the full algorithm
// ---------------------------------------------------------------------------

enum class Strategy { prop, even, heu };

inline Strategy parse_strategy(const std::string& s) {
  if (s == "prop") return Strategy::prop;
  if (s == "even") return Strategy::even;
  if (s == "heu") return Strategy::heu;
  throw Error("unknown strategy '" + s + "' (expected prop, even or heu)");
}

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::prop: return "prop";
    case Strategy::even: return "even";
    case Strategy::heu: return "heu";
  }
  return "?";
}

/// Fixed partitions. Even: first half transmits. Heu.: the outer quarters
/// transmit and the centered receive block takes the rest.
inline RVec benchmark_partition(Strategy kind, int n) {
  if (n < 2) throw Error("benchmark_partition: need at least two antennas");
  RVec a = RVec::Zero(n);
  if (kind == Strategy::even) {
    a.head(n / 2).setOnes();
  } else if (kind == Strategy::heu) {
    const int rx = n - 2 * (n / 4);
    const int left = (n - rx + 1) / 2;
    a.head(left).setOnes();
    a.tail(n - rx - left).setOnes();
  } else {
    throw Error("benchmark_partition: not a fixed strategy");
  }
  return a;
}

struct ConstraintReport {
  std::vector<double> sinr;        // linear, per user
  std::vector<double> sinr_ratio;  // SINR / threshold
  double power = 0.0;              // ||A W||_F^2
  int transmit_count = 0;
  bool binary = false;
  double residual_min_eig = 0.0;   // min eig(R_w - sum R_k) / P from the last relaxation

  bool satisfied(const ScenarioConfig& cfg) const {
    for (double r : sinr_ratio)
      if (r < 1.0 - 1e-4) return false;
    return binary && power <= cfg.power * (1.0 + 1e-6) && transmit_count >= cfg.num_users() &&
           transmit_count <= cfg.num_antennas - cfg.num_sensing() && residual_min_eig >= -1e-8;
  }
};

inline ConstraintReport check_constraints(const DesignContext& ctx, const RVec& a, const BeamformerSet& beam,
                                          double residual_min_eig) {
  ConstraintReport r;
  const CMat aw = a.cast<cd>().asDiagonal() * beam.w;
  for (int u = 0; u < ctx.k(); ++u) {
    const CVec g = aw.transpose() * ctx.ch.users.col(u);  // h_k^T A w_j
    const double sig = std::norm(g(u));
    const double interf = g.squaredNorm() - sig;
    const double s = sig / (interf + ctx.cfg.user_noise[u]);
    r.sinr.push_back(s);
    r.sinr_ratio.push_back(s / ctx.cfg.sinr_threshold[u]);
  }
  r.power = aw.squaredNorm();
  r.binary = is_binary(a);
  r.transmit_count = static_cast<int>(std::lround(a.sum()));
  r.residual_min_eig = residual_min_eig;
  return r;
}

/// Design-stage BCRB of a binary (or fractional) partition with B = I - A and
/// R_n from the self-interference model at R_w.
inline fim::Bcrb evaluate_design(const DesignContext& ctx, const RVec& a, const CMat& rw) {
  const CMat rn = noise_covariance_from_rw(a, rw, ctx.ch.si, ctx.cfg.radar_noise);
  const CMat rinv = fim::receive_inverse(a, rn, ctx.cfg.radar_noise);
  return fim::bcrb(fim::design_fim(ctx.cfg, ctx.ch, a, rw, rinv), ctx.cfg.weights);
}

struct TraceEntry {
  int iteration = 0;
  double objective = 0.0;       // normalized BCRB + penalties
  double normalized_bcrb = 0.0; // at the ADMM iterate
  double bcrb = 0.0;            // weighted, rad^2
  double consensus = 0.0;       // ||b - 1 + a||
};

struct DesignResult {
  Strategy strategy = Strategy::prop;
  RVec a;
  BeamformerSet beam;
  fim::Bcrb bcrb;
  ConstraintReport constraints;
  std::vector<TraceEntry> trace;
  int outer_iterations = 0;
  bool converged = false;
  double seconds = 0.0;
};

/// Beamformer design at a fixed binary partition: alternates update_w with
/// refreshing R_n from the self-interference model.
inline DesignResult design_fixed(const DesignContext& ctx, const RVec& a, const DesignParams& prm,
                                 std::optional<CMat> rw_start = std::nullopt) {
  if (!is_binary(a)) throw Error("design_fixed: partition must be binary");
  const int n = ctx.n();
  const int count = static_cast<int>(std::lround(a.sum()));
  if (count < ctx.k() || count > n - ctx.t())
    throw Error("design_fixed: partition violates K <= 1^T a <= N - T (" + std::to_string(count) + " transmit antennas)");
  const RVec b = RVec::Ones(n) - a;
  CMat rw = rw_start ? *rw_start : CMat((ctx.cfg.power / count) * a.cast<cd>().asDiagonal().toDenseMatrix());
  WUpdate wu;
  for (int pass = 0; pass < std::max(1, prm.polish_passes); ++pass) {
    const CMat rn = noise_covariance_from_rw(a, rw, ctx.ch.si, ctx.cfg.radar_noise);
    const CMat rinv = fim::receive_inverse(a, rn, ctx.cfg.radar_noise);
    wu = update_w(ctx, a, b, rinv, prm);
    rw = wu.beam.rw;
  }
  DesignResult out;
  out.a = a;
  out.beam = wu.beam;
  out.bcrb = evaluate_design(ctx, a, wu.beam.rw);
  out.constraints = check_constraints(ctx, a, wu.beam, wu.residual_min_eig);
  return out;
}

/// First-improvement search over single flips and transmit/receive swaps,
/// scored by the design BCRB with a beamformer re-solve per candidate.
inline DesignResult local_search(const DesignContext& ctx, DesignResult best, const DesignParams& prm) {
  const int n = ctx.n(), lo = ctx.k(), hi = n - ctx.t();
  int evals = 0;
  bool improved = true;
  auto try_move = [&](const RVec& cand) {
    const int c = static_cast<int>(std::lround(cand.sum()));
    if (c < lo || c > hi || evals >= prm.local_search_evals) return false;
    ++evals;
    try {
      DesignResult r = design_fixed(ctx, cand, prm);
      if (r.bcrb.weighted < best.bcrb.weighted * (1.0 - 1e-9)) {
        best = std::move(r);
        return true;
      }
    } catch (const Error&) {
    }
    return false;
  };
  while (improved && evals < prm.local_search_evals) {
    improved = false;
    for (int i = 0; i < n && !improved; ++i) {
      RVec cand = best.a;
      cand(i) = 1.0 - cand(i);
      improved = try_move(cand);
    }
    for (int i = 0; i < n && !improved; ++i)
      for (int j = 0; j < n && !improved; ++j) {
        if (best.a(i) != 1.0 || best.a(j) != 0.0) continue;
        RVec cand = best.a;
        std::swap(cand(i), cand(j));
        improved = try_move(cand);
      }
  }
  return best;
}

/// Surrogate objective of the ADMM iterate.
inline TraceEntry admm_objective(const DesignContext& ctx, const AdmmPoint& pt, const DesignParams& prm) {
  TraceEntry e;
  const RMat fl = fim::likelihood_fim_ab(ctx.dirs, pt.a, pt.b, pt.beam.rw, pt.rinv, ctx.cfg.snapshots);
  e.normalized_bcrb = normalized_bcrb(ctx, fl);
  e.bcrb = e.normalized_bcrb * ctx.scale;
  const RVec ones = RVec::Ones(pt.a.size());
  const RVec r = pt.b - ones + pt.a;
  e.consensus = r.norm();
  e.objective = e.normalized_bcrb + prm.rho1 * pt.a.dot(ones - pt.a) + prm.rho2 * (r + pt.mu / prm.rho2).squaredNorm();
  return e;
}

inline std::string fmt_vec(const RVec& v) {
  std::string s;
  char buf[32];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.3f ", v(i));
    s += buf;
  }
  return s;
}

/// ADMM alternating optimization followed by binary finalization.
inline DesignResult run_algorithm1(const DesignContext& ctx, const DesignParams& prm) {
  prm.validate();
  const int n = ctx.n(), k = ctx.k(), t = ctx.t();
  const double s2 = ctx.cfg.radar_noise;
  Rng rng(derive_seed(prm.seed, 0x61646d6dULL, 0));

  AdmmPoint pt;
  pt.a = RVec::Constant(n, 0.5);
  pt.b = RVec::Constant(n, 0.5);
  pt.mu = RVec::Zero(n);
  pt.rinv = CMat::Identity(n, n) / s2;

  std::vector<TraceEntry> trace;
  std::vector<RVec> scores;
  bool converged = false;
  int it = 0;
  DesignParams cur = prm;
  for (it = 1; it <= prm.max_outer; ++it) {
    pt.beam = update_w(ctx, pt.a, pt.b, pt.rinv, prm).beam;
    const auto ua = update_a(ctx, pt, cur, rng);
    pt.a = ua.x;
    const auto ub = update_b(ctx, pt, cur, rng);
    pt.b = ub.x;
    pt.mu = update_dual(pt.mu, pt.a, pt.b, prm.rho2);
    const RVec score = 0.5 * (pt.a + RVec::Ones(n) - pt.b);
    if (!is_binary(score, 1e-6)) scores.push_back(score);
    const CMat rn = noise_covariance_from_rw(pt.a, pt.beam.rw, ctx.ch.si, s2);
    pt.rinv = fim::receive_inverse(pt.a, rn, s2);
    TraceEntry e = admm_objective(ctx, pt, cur);
    cur.rho1 = std::min(cur.rho1 * cur.rho1_growth, cur.rho1_max);
    e.iteration = it;
    if (prm.verbose)
      std::fprintf(stderr, "outer %2d obj %.6e nbcrb %.4e consensus %.3e a-rank1 %d b-rank1 %d\n", it, e.objective,
                   e.normalized_bcrb, e.consensus, int(ua.rank_one), int(ub.rank_one));
    if (prm.verbose) std::fprintf(stderr, "  a %s\n  b %s\n", fmt_vec(pt.a).c_str(), fmt_vec(pt.b).c_str());
    trace.push_back(e);
    if (trace.size() >= 2) {
      const double prev = trace[trace.size() - 2].objective;
      if (std::abs(e.objective - prev) <= prm.rel_tol * std::max(std::abs(prev), 1e-12)) {
        converged = true;
        break;
      }
    }
  }

  // Binary finalization: every ADMM iterate ranks the antennas by its
  // transmit score (a + 1 - b) / 2; each top-m set with K <= m <= N - T is a
  // candidate partition, scored after a beamformer re-solve.
  std::vector<RVec> candidates;
  auto add_candidate = [&](const RVec& c) {
    if (std::find(candidates.begin(), candidates.end(), c) == candidates.end()) candidates.push_back(c);
  };
  add_candidate(round_with_cardinality(pt.a, prm.rounding_threshold, k, n - t));
  add_candidate(round_with_cardinality(RVec::Ones(n) - pt.b, prm.rounding_threshold, k, n - t));
  if (prm.threshold_sweep)
    for (const RVec& score : scores) {
      std::vector<int> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](int i, int j) { return score(i) > score(j); });
      for (int m = k; m <= n - t; ++m) {
        RVec c = RVec::Zero(n);
        for (int i = 0; i < m; ++i) c(idx[i]) = 1.0;
        add_candidate(c);
      }
    }
  // Swapping transmit and receive roles leaves the sum co-array unchanged,
  // so the complement of every candidate is an equally plausible start.
  for (std::size_t i = 0, m = candidates.size(); i < m; ++i) {
    const RVec c = RVec::Ones(n) - candidates[i];
    const double cnt = c.sum();
    if (cnt >= k && cnt <= n - t) add_candidate(c);
  }
  std::optional<DesignResult> best;
  std::string failure;
  for (const auto& c : candidates) {
    try {
      DesignResult r = design_fixed(ctx, c, prm);
      if (!best || r.bcrb.weighted < best->bcrb.weighted) best = std::move(r);
    } catch (const Error& e) {
      failure = e.what();
    }
  }
  if (!best) throw Error("run_algorithm1: no feasible binary partition after repair: " + failure);
  if (prm.local_search_evals > 0) best = local_search(ctx, std::move(*best), prm);
  best->strategy = Strategy::prop;
  best->trace = std::move(trace);
  best->outer_iterations = std::min(it, prm.max_outer);
  best->converged = converged;
  return *best;
}

/// Runs one strategy on a scenario.
inline DesignResult run_strategy(const DesignContext& ctx, Strategy s, const DesignParams& prm) {
  const auto t0 = std::chrono::steady_clock::now();
  DesignResult r;
  if (s == Strategy::prop) {
    r = run_algorithm1(ctx, prm);
  } else {
    r = design_fixed(ctx, benchmark_partition(s, ctx.n()), prm);
    r.strategy = s;
    r.converged = true;
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace isac::design
