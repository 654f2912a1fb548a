// SPDX-License-Identifier: Apache-2.0
//
// Small dense semidefinite-program solver.
//
// Problems are posed in LMI form
//
//   minimize    c^T x
//   subject to  F0_k + sum_i x_i F_ik  >= 0   (real symmetric blocks k)
//               g_l^T x <= h_l                 (linear inequalities)
//               e_j^T x  = f_j                 (linear equalities)
//
// and solved as the dual of an SDPA-style standard-form pair by an
// infeasible primal-dual path-following method with Nesterov-Todd scaling
// and a Mehrotra predictor-corrector. Coefficient matrices are stored as
// sparse upper-triangular triplets; the Schur complement matrix is dense.
// Complex Hermitian data enters through the real embedding
// [[Re, -Im], [Im, Re]].

#pragma once

#include "isac/linalg.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <tuple>
#include <utility>
#include <vector>

namespace isac::sdp {

/// Upper-triangular (row <= col) entry of a symmetric coefficient matrix;
/// off-diagonal entries stand for both (row, col) and (col, row).
struct Entry {
  int row;
  int col;
  double value;
};

struct LmiBlock {
  int dim = 0;
  RMat constant;  // F0, symmetric
  std::vector<std::pair<int, std::vector<Entry>>> terms;  // (variable, F_i), sorted by variable
};

/// sum coeffs * x  (<= or ==) rhs
struct LinearRow {
  std::vector<std::pair<int, double>> coeffs;
  double rhs = 0.0;
};

struct ConicProblem {
  int num_vars = 0;
  RVec cost;
  std::vector<LmiBlock> lmis;
  std::vector<LinearRow> inequalities;
  std::vector<LinearRow> equalities;
};

enum class Status { optimal, infeasible, unbounded, max_iterations, numerical_error };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::max_iterations: return "max-iterations";
    case Status::numerical_error: return "numerical-error";
  }
  return "unknown";
}

struct SolverOptions {
  double gap_tol = 1e-7;
  double feas_tol = 1e-8;
  int max_iter = 200;
  double step_fraction = 0.98;
  bool verbose = false;
};

struct ConicSolution {
  Status status = Status::numerical_error;
  RVec x;
  double objective = 0.0;
  double gap = 0.0;                  // relative duality gap
  double primal_infeasibility = 0.0; // relative, LMI/inequality side
  double dual_infeasibility = 0.0;   // relative, multiplier side
  int iterations = 0;
  /// Dual matrix per LMI block. When status is infeasible these form the
  /// infeasibility certificate: sum_k <F_ik, Z_k> + sum_l g_li y_l = 0 and
  /// sum_k <F0_k, Z_k> - sum_l h_l y_l < 0 (normalized to -1).
  std::vector<RMat> certificates;
  RVec inequality_duals;
  RVec equality_duals;

  bool ok() const { return status == Status::optimal; }
};

// ---------------------------------------------------------------------------
// Problem construction helpers
// ---------------------------------------------------------------------------

/// Real symmetric n x n matrix variable, parameterized by its upper triangle.
struct SymmetricVar {
  int offset = 0;
  int n = 0;
  int index(int i, int j) const {
    if (i > j) std::swap(i, j);
    return offset + i * n - i * (i - 1) / 2 + (j - i);
  }
  int size() const { return n * (n + 1) / 2; }
  RMat value(const RVec& x) const {
    RMat m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) m(i, j) = m(j, i) = x(index(i, j));
    return m;
  }
};

/// Complex Hermitian n x n matrix variable with n^2 real parameters:
/// n diagonal entries followed by (Re, Im) of every strictly upper entry.
struct HermitianVar {
  int offset = 0;
  int n = 0;
  int diag(int i) const { return offset + i; }
  int pair(int i, int j) const { return offset + n + 2 * (i * n - i * (i + 1) / 2 + (j - i - 1)); }
  int re(int i, int j) const { return pair(i, j); }
  int im(int i, int j) const { return pair(i, j) + 1; }
  int size() const { return n * n; }
  CMat value(const RVec& x) const {
    CMat m(n, n);
    for (int i = 0; i < n; ++i) {
      m(i, i) = x(diag(i));
      for (int j = i + 1; j < n; ++j) {
        m(i, j) = cd(x(re(i, j)), x(im(i, j)));
        m(j, i) = std::conj(m(i, j));
      }
    }
    return m;
  }
  /// Coefficients of the real functional R -> Re Tr{M R}.
  RVec functional(const CMat& m) const {
    RVec c(size());
    for (int i = 0; i < n; ++i) {
      c(i) = m(i, i).real();
      for (int j = i + 1; j < n; ++j) {
        const int p = pair(i, j) - offset;
        c(p) = m(j, i).real() + m(i, j).real();
        c(p + 1) = m(i, j).imag() - m(j, i).imag();
      }
    }
    return c;
  }
};

/// Accumulates an LMI-form problem; entries with the same (block, row, col,
/// variable) are summed.
class ProblemBuilder {
 public:
  int add_variables(int count) {
    const int off = num_vars_;
    num_vars_ += count;
    cost_.conservativeResize(num_vars_);
    cost_.tail(count).setZero();
    return off;
  }
  SymmetricVar add_symmetric(int n) { return {add_variables(n * (n + 1) / 2), n}; }
  HermitianVar add_hermitian(int n) { return {add_variables(n * n), n}; }
  int num_vars() const { return num_vars_; }

  void add_cost(int var, double coef) { cost_(var) += coef; }

  int add_lmi(int dim) {
    blocks_.push_back({dim, RMat::Zero(dim, dim), {}});
    return static_cast<int>(blocks_.size()) - 1;
  }
  void lmi_constant(int block, int r, int c, double v) {
    auto& m = blocks_[block].constant;
    m(r, c) += v;
    if (r != c) m(c, r) += v;
  }
  void lmi_term(int block, int r, int c, int var, double v) {
    if (v == 0.0) return;
    if (r > c) std::swap(r, c);
    blocks_[block].triplets.push_back({var, r, c, v});
  }
  /// Places +/- the real embedding of a Hermitian variable at rows/cols
  /// [at, at + 2n) of an LMI block.
  void lmi_hermitian(int block, int at, const HermitianVar& h, double sign) {
    const int n = h.n;
    for (int i = 0; i < n; ++i) {
      lmi_term(block, at + i, at + i, h.diag(i), sign);
      lmi_term(block, at + n + i, at + n + i, h.diag(i), sign);
      for (int j = i + 1; j < n; ++j) {
        lmi_term(block, at + i, at + j, h.re(i, j), sign);
        lmi_term(block, at + n + i, at + n + j, h.re(i, j), sign);
        lmi_term(block, at + i, at + n + j, h.im(i, j), -sign);
        lmi_term(block, at + j, at + n + i, h.im(i, j), sign);
      }
    }
  }
  /// Places +/- a symmetric variable at rows/cols [at, at + n).
  void lmi_symmetric(int block, int at, const SymmetricVar& s, double sign) {
    for (int i = 0; i < s.n; ++i)
      for (int j = i; j < s.n; ++j) lmi_term(block, at + i, at + j, s.index(i, j), sign);
  }

  void add_le(LinearRow row) { ineq_.push_back(std::move(row)); }
  void add_ge(LinearRow row) {
    for (auto& [v, c] : row.coeffs) c = -c;
    row.rhs = -row.rhs;
    ineq_.push_back(std::move(row));
  }
  void add_eq(LinearRow row) { eq_.push_back(std::move(row)); }

  ConicProblem build() const {
    ConicProblem p;
    p.num_vars = num_vars_;
    p.cost = cost_;
    for (const auto& b : blocks_) {
      LmiBlock out;
      out.dim = b.dim;
      out.constant = b.constant;
      auto trip = b.triplets;
      std::sort(trip.begin(), trip.end(), [](const Triplet& x, const Triplet& y) {
        return std::tie(x.var, x.row, x.col) < std::tie(y.var, y.row, y.col);
      });
      for (std::size_t i = 0; i < trip.size();) {
        const int var = trip[i].var;
        std::vector<Entry> entries;
        while (i < trip.size() && trip[i].var == var) {
          const int r = trip[i].row, c = trip[i].col;
          double v = 0.0;
          while (i < trip.size() && trip[i].var == var && trip[i].row == r && trip[i].col == c) v += trip[i++].value;
          if (v != 0.0) entries.push_back({r, c, v});
        }
        if (!entries.empty()) out.terms.emplace_back(var, std::move(entries));
      }
      p.lmis.push_back(std::move(out));
    }
    p.inequalities = ineq_;
    p.equalities = eq_;
    return p;
  }

 private:
  struct Triplet {
    int var, row, col;
    double value;
  };
  struct BlockData {
    int dim;
    RMat constant;
    std::vector<Triplet> triplets;
  };
  int num_vars_ = 0;
  RVec cost_;
  std::vector<BlockData> blocks_;
  std::vector<LinearRow> ineq_;
  std::vector<LinearRow> eq_;
};

/// Variables of the epigraph of a weighted inverse trace.
struct InverseTraceEpigraph {
  SymmetricVar u;
  SymmetricVar v;
  int block = -1;
};

/// Adds min sum_i w_i V_ii subject to [[V, I], [I, U]] >= 0, so that at the
/// optimum V = U^{-1} and the cost equals Tr{diag(w) U^{-1}}. U is left
/// free for the caller to constrain.
inline InverseTraceEpigraph epigraph_inverse_trace(ProblemBuilder& pb, int t, const RVec& weights) {
  if (t < 1) throw Error("epigraph_inverse_trace: dimension must be positive");
  InverseTraceEpigraph e;
  e.v = pb.add_symmetric(t);
  e.u = pb.add_symmetric(t);
  e.block = pb.add_lmi(2 * t);
  pb.lmi_symmetric(e.block, 0, e.v, 1.0);
  pb.lmi_symmetric(e.block, t, e.u, 1.0);
  for (int i = 0; i < t; ++i) pb.lmi_constant(e.block, i, t + i, 1.0);
  for (int i = 0; i < t; ++i) pb.add_cost(e.v.index(i, i), weights(i));
  return e;
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

namespace detail {

struct BlockScaling {
  RMat g;     // X = G D G^T, Z = G^{-T} D G^{-1}
  RMat ginv;
  RVec d;
  RMat w;     // G G^T
};

inline RMat sym_from_entries(int n, const std::vector<Entry>& e) {
  RMat m = RMat::Zero(n, n);
  for (const auto& x : e) {
    m(x.row, x.col) += x.value;
    if (x.row != x.col) m(x.col, x.row) += x.value;
  }
  return m;
}

inline double inner(const std::vector<Entry>& e, const RMat& y) {
  double s = 0.0;
  for (const auto& x : e) s += x.value * (x.row == x.col ? y(x.row, x.row) : y(x.row, x.col) + y(x.col, x.row));
  return s;
}

inline BlockScaling nt_scaling(const RMat& x, const RMat& z) {
  Eigen::SelfAdjointEigenSolver<RMat> ex(symmetric_part(x));
  const RVec lx = ex.eigenvalues().cwiseMax(std::numeric_limits<double>::min());
  const RMat l = ex.eigenvectors() * lx.cwiseSqrt().asDiagonal();
  const RMat linv = lx.cwiseSqrt().cwiseInverse().asDiagonal() * ex.eigenvectors().transpose();
  Eigen::SelfAdjointEigenSolver<RMat> es(symmetric_part(l.transpose() * z * l));
  const RVec s = es.eigenvalues().cwiseMax(std::numeric_limits<double>::min());
  BlockScaling bs;
  bs.d = s.cwiseSqrt();
  const RVec dq = bs.d.cwiseSqrt();
  bs.g = l * es.eigenvectors() * dq.cwiseInverse().asDiagonal();
  bs.ginv = dq.asDiagonal() * es.eigenvectors().transpose() * linv;
  bs.w = bs.g * bs.g.transpose();
  return bs;
}

/// Largest alpha in (0, inf] with D + alpha * dT >= 0 for diagonal D > 0.
inline double max_step_scaled(const RVec& d, const RMat& dt) {
  const RVec is = d.cwiseSqrt().cwiseInverse();
  const RMat m = is.asDiagonal() * dt * is.asDiagonal();
  Eigen::SelfAdjointEigenSolver<RMat> es(symmetric_part(m), Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0);
  return lo < 0.0 ? -1.0 / lo : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Solves an LMI-form problem. Deterministic given the inputs.
inline ConicSolution solve(const ConicProblem& prob, const SolverOptions& opt = {}) {
  using detail::inner;
  const int m = prob.num_vars;
  if (prob.cost.size() != m) throw Error("sdp::solve: cost vector has wrong length");
  const int nb = static_cast<int>(prob.lmis.size());
  const int nl = static_cast<int>(prob.inequalities.size());
  const int ne = static_cast<int>(prob.equalities.size());

  // ---- Preconditioning: scale every block, row and the objective. --------
  std::vector<double> bscale(nb, 1.0);
  std::vector<RMat> cmat(nb);
  std::vector<std::vector<std::pair<int, std::vector<Entry>>>> amat(nb);  // A_ik = -F_ik / s_k
  for (int k = 0; k < nb; ++k) {
    const auto& blk = prob.lmis[k];
    if (blk.constant.rows() != blk.dim) throw Error("sdp::solve: LMI constant has wrong size");
    double s = blk.constant.cwiseAbs().maxCoeff();
    for (const auto& [var, ents] : blk.terms) {
      if (var < 0 || var >= m) throw Error("sdp::solve: LMI references unknown variable");
      for (const auto& e : ents) {
        if (e.row > e.col || e.col >= blk.dim) throw Error("sdp::solve: malformed LMI entry");
        s = std::max(s, std::abs(e.value));
      }
    }
    if (!(s > 0.0)) s = 1.0;
    bscale[k] = s;
    cmat[k] = symmetric_part(blk.constant) / s;
    for (const auto& [var, ents] : blk.terms) {
      std::vector<Entry> scaled = ents;
      for (auto& e : scaled) e.value = -e.value / s;
      amat[k].emplace_back(var, std::move(scaled));
    }
  }
  std::vector<double> lscale(nl, 1.0);
  RVec clp(nl);
  std::vector<std::vector<std::pair<int, double>>> alp(nl);
  for (int l = 0; l < nl; ++l) {
    const auto& row = prob.inequalities[l];
    double s = 0.0;
    for (const auto& [v, c] : row.coeffs) {
      if (v < 0 || v >= m) throw Error("sdp::solve: inequality references unknown variable");
      s += c * c;
    }
    s = std::sqrt(s);
    if (!(s > 0.0)) s = std::max(1.0, std::abs(row.rhs));
    lscale[l] = s;
    clp(l) = row.rhs / s;
    for (const auto& [v, c] : row.coeffs) alp[l].emplace_back(v, c / s);
  }
  RMat emat = RMat::Zero(ne, m);
  RVec fvec(ne);
  std::vector<double> escale(ne, 1.0);
  for (int j = 0; j < ne; ++j) {
    const auto& row = prob.equalities[j];
    for (const auto& [v, c] : row.coeffs) emat(j, v) += c;
    double s = emat.row(j).norm();
    if (!(s > 0.0)) s = 1.0;
    escale[j] = s;
    emat.row(j) /= s;
    fvec(j) = row.rhs / s;
  }
  double cscale = prob.cost.cwiseAbs().maxCoeff();
  if (!(cscale > 0.0)) cscale = 1.0;
  const RVec bvec = -prob.cost / cscale;

  // Variables appearing in each block, and per-variable entry lists.
  std::vector<std::vector<int>> block_vars(nb);
  for (int k = 0; k < nb; ++k)
    for (const auto& [var, ents] : amat[k]) block_vars[k].push_back(var);

  // ---- Operators ----------------------------------------------------------
  auto apply_a = [&](const std::vector<RMat>& x, const RVec& xl) {
    RVec out = RVec::Zero(m);
    for (int k = 0; k < nb; ++k)
      for (const auto& [var, ents] : amat[k]) out(var) += inner(ents, x[k]);
    for (int l = 0; l < nl; ++l)
      for (const auto& [v, c] : alp[l]) out(v) += c * xl(l);
    return out;
  };
  auto apply_at = [&](const RVec& y, std::vector<RMat>& z, RVec& zl) {
    for (int k = 0; k < nb; ++k) {
      z[k].setZero(prob.lmis[k].dim, prob.lmis[k].dim);
      for (const auto& [var, ents] : amat[k]) {
        const double yv = y(var);
        if (yv == 0.0) continue;
        for (const auto& e : ents) {
          z[k](e.row, e.col) += yv * e.value;
          if (e.row != e.col) z[k](e.col, e.row) += yv * e.value;
        }
      }
    }
    zl = RVec::Zero(nl);
    for (int l = 0; l < nl; ++l)
      for (const auto& [v, c] : alp[l]) zl(l) += c * y(v);
  };

  // ---- Starting point ----------------------------------------------------
  std::vector<RMat> X(nb), Z(nb);
  int ntot = nl;
  for (int k = 0; k < nb; ++k) {
    const int n = prob.lmis[k].dim;
    ntot += n;
    double anorm = 0.0;
    for (const auto& [var, ents] : amat[k]) anorm = std::max(anorm, detail::sym_from_entries(n, ents).norm());
    const double xi = std::max({10.0, std::sqrt(static_cast<double>(n)), n * (1.0 + bvec.cwiseAbs().maxCoeff()) / (1.0 + anorm)});
    const double eta = std::max({10.0, std::sqrt(static_cast<double>(n)), cmat[k].norm(), anorm});
    X[k] = xi * RMat::Identity(n, n);
    Z[k] = eta * RMat::Identity(n, n);
  }
  RVec xl = RVec::Constant(nl, 10.0), zl = RVec::Constant(nl, 10.0);
  for (int l = 0; l < nl; ++l) zl(l) = std::max(10.0, std::abs(clp(l)));
  RVec y = RVec::Zero(m), lam = RVec::Zero(ne);

  double cnorm = 0.0;
  for (int k = 0; k < nb; ++k) cnorm += cmat[k].squaredNorm();
  cnorm = std::sqrt(cnorm + clp.squaredNorm());
  const double bnorm = bvec.norm();
  const double fnorm = fvec.norm();

  ConicSolution best;
  double best_merit = std::numeric_limits<double>::infinity();
  auto package = [&](Status st, int iter, double gap, double pinf, double dinf) {
    ConicSolution s;
    s.status = st;
    s.x = y;
    s.objective = prob.cost.dot(y);
    s.gap = gap;
    s.primal_infeasibility = pinf;
    s.dual_infeasibility = dinf;
    s.iterations = iter;
    for (int k = 0; k < nb; ++k) s.certificates.push_back(X[k] * (cscale / bscale[k]));
    s.inequality_duals = RVec(nl);
    for (int l = 0; l < nl; ++l) s.inequality_duals(l) = xl(l) * cscale / lscale[l];
    s.equality_duals = RVec(ne);
    for (int j = 0; j < ne; ++j) s.equality_duals(j) = lam(j) * cscale / escale[j];
    return s;
  };

  std::vector<RMat> atz(nb), rd(nb), dX(nb), dZ(nb), rc(nb);
  RVec atzl, rdl;
  for (int iter = 0; iter <= opt.max_iter; ++iter) {
    // Residuals.
    apply_at(y, atz, atzl);
    double rdnorm = 0.0;
    for (int k = 0; k < nb; ++k) {
      rd[k] = cmat[k] - atz[k] - Z[k];
      rdnorm += rd[k].squaredNorm();
    }
    rdl = clp - atzl - zl;
    rdnorm = std::sqrt(rdnorm + rdl.squaredNorm());
    const RVec ax = apply_a(X, xl);
    const RVec rp = bvec + emat.transpose() * lam - ax;
    const RVec re = fvec - emat * y;

    double cx = clp.dot(xl), xz = xl.dot(zl);
    for (int k = 0; k < nb; ++k) {
      cx += (cmat[k].cwiseProduct(X[k])).sum();
      xz += (X[k].cwiseProduct(Z[k])).sum();
    }
    const double pobj = cx - fvec.dot(lam);  // multiplier-side objective
    const double dobj = bvec.dot(y);         // LMI-side objective
    const double mu = xz / std::max(1, ntot);
    const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double pinf = std::max(rdnorm / (1.0 + cnorm), re.norm() / (1.0 + fnorm));
    const double dinf = rp.norm() / (1.0 + bnorm);
    if (opt.verbose)
      std::fprintf(stderr, "it %3d pobj %+.8e dobj %+.8e gap %.2e pinf %.2e dinf %.2e mu %.2e\n", iter, pobj, dobj,
                   gap, pinf, dinf, mu);

    const double merit = std::max({gap, pinf, dinf});
    if (merit < best_merit) {
      best_merit = merit;
      best = package(Status::max_iterations, iter, gap, pinf, dinf);
    }
    if (gap <= opt.gap_tol && pinf <= opt.feas_tol && dinf <= opt.feas_tol)
      return package(Status::optimal, iter, gap, pinf, dinf);

    // Infeasibility of the LMI side: a multiplier ray with <C,X> - f^T lam < 0
    // and A(X) - E^T lam ~ 0.
    {
      const double denom = -(cx - fvec.dot(lam));
      if (denom > 0.0) {
        const double ratio = (ax - emat.transpose() * lam).norm() / denom;
        if (ratio < opt.feas_tol && iter > 5) {
          ConicSolution s = package(Status::infeasible, iter, gap, pinf, dinf);
          for (auto& c : s.certificates) c /= denom * cscale;
          s.inequality_duals /= denom * cscale;
          s.equality_duals /= denom * cscale;
          return s;
        }
      }
      if (dobj > 0.0) {
        const double ratio = rdnorm / dobj;
        if (ratio < opt.feas_tol && iter > 5 && dobj > 1e8 * (1.0 + std::abs(pobj)))
          return package(Status::unbounded, iter, gap, pinf, dinf);
      }
    }
    if (iter == opt.max_iter) break;

    // NT scaling and Schur complement.
    std::vector<detail::BlockScaling> sc(nb);
    for (int k = 0; k < nb; ++k) sc[k] = detail::nt_scaling(X[k], Z[k]);
    const RVec wl = xl.cwiseQuotient(zl);

    RMat M = RMat::Zero(m, m);
    for (int k = 0; k < nb; ++k) {
      const RMat& W = sc[k].w;
      const auto& terms = amat[k];
      const int n = prob.lmis[k].dim;
      RMat Y(n, n);
      for (std::size_t ii = 0; ii < terms.size(); ++ii) {
        const auto& [vi, ei] = terms[ii];
        Y.setZero();
        for (const auto& e : ei) {
          if (e.row == e.col) {
            Y.noalias() += e.value * W.col(e.row) * W.row(e.row);
          } else {
            Y.noalias() += e.value * (W.col(e.row) * W.row(e.col) + W.col(e.col) * W.row(e.row));
          }
        }
        for (std::size_t jj = ii; jj < terms.size(); ++jj) {
          const auto& [vj, ej] = terms[jj];
          const double v = inner(ej, Y);
          M(vi, vj) += v;
          if (vi != vj) M(vj, vi) += v;
        }
      }
    }
    for (int l = 0; l < nl; ++l)
      for (const auto& [vi, ci] : alp[l])
        for (const auto& [vj, cj] : alp[l]) M(vi, vj) += wl(l) * ci * cj;

    // Factorization with a tiny diagonal shift on failure.
    Eigen::LLT<RMat> llt;
    {
      const double dmax = std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
      double shift = 0.0;
      for (int attempt = 0; attempt < 8; ++attempt) {
        RMat Ms = M;
        Ms.diagonal().array() += shift;
        llt.compute(Ms);
        if (llt.info() == Eigen::Success) break;
        shift = shift == 0.0 ? 1e-14 * dmax : shift * 100.0;
      }
      if (llt.info() != Eigen::Success) {
        best.status = Status::numerical_error;
        return best;
      }
    }
    RMat minv_et;
    Eigen::LLT<RMat> sllt;
    if (ne > 0) {
      minv_et = llt.solve(emat.transpose());
      sllt.compute(emat * minv_et);
      if (sllt.info() != Eigen::Success) {
        best.status = Status::numerical_error;
        return best;
      }
    }

    // Direction for a complementarity target given per-block R_c.
    RVec dy(m), dlam(ne), dxl(nl), dzl(nl);
    auto direction = [&](const std::vector<RMat>& rcb, const RVec& rcl) {
      std::vector<RMat> tmp(nb);
      for (int k = 0; k < nb; ++k) tmp[k] = rcb[k] - sc[k].w * rd[k] * sc[k].w;
      const RVec tmpl = rcl - wl.cwiseProduct(rdl);
      const RVec h = rp - apply_a(tmp, tmpl);
      RVec mh = llt.solve(h);
      if (ne > 0) {
        dlam = sllt.solve(re - emat * mh);
        dy = mh + minv_et * dlam;
      } else {
        dy = mh;
      }
      std::vector<RMat> aty(nb);
      RVec atyl;
      apply_at(dy, aty, atyl);
      for (int k = 0; k < nb; ++k) {
        dZ[k] = rd[k] - aty[k];
        dX[k] = symmetric_part(rcb[k] - sc[k].w * dZ[k] * sc[k].w);
      }
      dzl = rdl - atyl;
      dxl = rcl - wl.cwiseProduct(dzl);
    };
    auto step_lengths = [&]() {
      double ap = std::numeric_limits<double>::infinity(), ad = ap;
      for (int k = 0; k < nb; ++k) {
        ap = std::min(ap, detail::max_step_scaled(sc[k].d, sc[k].ginv * dX[k] * sc[k].ginv.transpose()));
        ad = std::min(ad, detail::max_step_scaled(sc[k].d, sc[k].g.transpose() * dZ[k] * sc[k].g));
      }
      for (int l = 0; l < nl; ++l) {
        if (dxl(l) < 0.0) ap = std::min(ap, -xl(l) / dxl(l));
        if (dzl(l) < 0.0) ad = std::min(ad, -zl(l) / dzl(l));
      }
      return std::pair{ap, ad};
    };

    // Predictor.
    for (int k = 0; k < nb; ++k) rc[k] = -X[k];
    RVec rcl = -xl;
    direction(rc, rcl);
    auto [ap, ad] = step_lengths();
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double xz_aff = 0.0;
    for (int k = 0; k < nb; ++k) xz_aff += ((X[k] + ap * dX[k]).cwiseProduct(Z[k] + ad * dZ[k])).sum();
    xz_aff += (xl + ap * dxl).dot(zl + ad * dzl);
    const double mu_aff = xz_aff / std::max(1, ntot);
    const double sigma = std::clamp(std::pow(mu_aff / std::max(mu, 1e-300), 3.0), 0.0, 1.0);

    // Corrector.
    for (int k = 0; k < nb; ++k) {
      const auto& s = sc[k];
      const int n = prob.lmis[k].dim;
      const RMat dxt = s.ginv * dX[k] * s.ginv.transpose();
      const RMat dzt = s.g.transpose() * dZ[k] * s.g;
      RMat r = -0.5 * (dxt * dzt + dzt * dxt);
      r.diagonal().array() += sigma * mu;
      r.diagonal() -= s.d.cwiseAbs2();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) r(i, j) *= 2.0 / (s.d(i) + s.d(j));
      rc[k] = s.g * r * s.g.transpose();
    }
    for (int l = 0; l < nl; ++l) rcl(l) = (sigma * mu - xl(l) * zl(l) - dxl(l) * dzl(l)) / zl(l);
    direction(rc, rcl);
    std::tie(ap, ad) = step_lengths();
    ap = std::min(1.0, opt.step_fraction * ap);
    ad = std::min(1.0, opt.step_fraction * ad);

    for (int k = 0; k < nb; ++k) {
      X[k] = symmetric_part(X[k] + ap * dX[k]);
      Z[k] = symmetric_part(Z[k] + ad * dZ[k]);
    }
    xl += ap * dxl;
    zl += ad * dzl;
    y += ad * dy;
    if (ne > 0) lam += ap * dlam;
    if (!y.allFinite()) {
      best.status = Status::numerical_error;
      return best;
    }
  }
  return best;
}

/// Value of block k of the LMI at x (unscaled).
inline RMat lmi_value(const LmiBlock& blk, const RVec& x) {
  RMat f = symmetric_part(blk.constant);
  for (const auto& [var, ents] : blk.terms)
    for (const auto& e : ents) {
      f(e.row, e.col) += x(var) * e.value;
      if (e.row != e.col) f(e.col, e.row) += x(var) * e.value;
    }
  return f;
}

inline double row_value(const LinearRow& row, const RVec& x) {
  double s = 0.0;
  for (const auto& [v, c] : row.coeffs) s += c * x(v);
  return s;
}

}  // namespace isac::sdp
