// SPDX-License-Identifier: Apache-2.0
//
// Dense linear-algebra vocabulary shared by every module: complex/real
// matrix aliases, Hermitian helpers and the receive-support inverse used for
// masked noise covariances.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace isac {

using cd = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr cd kJ{0.0, 1.0};

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }
inline double db2lin(double db) { return std::pow(10.0, db / 10.0); }
inline double lin2db(double lin) { return 10.0 * std::log10(lin); }
/// dBm to watts.
inline double dbm2watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

inline CMat hermitian_part(const CMat& m) { return 0.5 * (m + m.adjoint()); }
inline RMat symmetric_part(const RMat& m) { return 0.5 * (m + m.transpose()); }

/// Largest |M - M^H| entry relative to max(1, |M|).
inline double hermitian_defect(const CMat& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.adjoint()).cwiseAbs().maxCoeff() / scale;
}

/// Principal square root of a Hermitian PSD matrix; negative eigenvalues are
/// clipped to zero.
inline CMat psd_sqrt(const CMat& m) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m));
  RVec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

/// Inverse of a Hermitian matrix restricted to the entries where
/// `support(n)` is true, embedded back with zeros elsewhere. `ridge` is added
/// to the diagonal before inversion.
inline CMat support_inverse(const CMat& m, const Eigen::Array<bool, Eigen::Dynamic, 1>& support,
                            double ridge) {
  const Eigen::Index n = m.rows();
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < n; ++i)
    if (support(i)) idx.push_back(i);
  CMat out = CMat::Zero(n, n);
  if (idx.empty()) return out;
  const auto k = static_cast<Eigen::Index>(idx.size());
  CMat sub(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) sub(i, j) = m(idx[i], idx[j]);
  sub = hermitian_part(sub);
  sub.diagonal().array() += ridge;
  Eigen::LLT<CMat> llt(sub);
  if (llt.info() != Eigen::Success)
    throw Error("support_inverse: covariance is not positive definite on the receive support");
  CMat inv = llt.solve(CMat::Identity(k, k));
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) out(idx[i], idx[j]) = inv(i, j);
  return hermitian_part(out);
}

/// Real symmetric embedding [[Re, -Im], [Im, Re]] of a Hermitian matrix.
inline RMat embed_hermitian(const CMat& h, double tol = 1e-10) {
  if (h.rows() != h.cols()) throw Error("embed_hermitian: matrix is not square");
  if (hermitian_defect(h) > tol) throw Error("embed_hermitian: matrix is not Hermitian");
  const Eigen::Index n = h.rows();
  RMat out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = h.real();
  out.bottomRightCorner(n, n) = h.real();
  out.topRightCorner(n, n) = -h.imag();
  out.bottomLeftCorner(n, n) = h.imag();
  return out;
}

/// Inverse of embed_hermitian (reads the top-left and bottom-left blocks).
inline CMat unembed_hermitian(const RMat& e) {
  const Eigen::Index n = e.rows() / 2;
  CMat out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double re = 0.5 * (e(i, j) + e(i + n, j + n));
      const double im = 0.5 * (e(i + n, j) - e(i, j + n));
      out(i, j) = cd(re, im);
    }
  return out;
}

inline double min_eigenvalue(const RMat& m) {
  Eigen::SelfAdjointEigenSolver<RMat> es(symmetric_part(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline double min_eigenvalue(const CMat& m) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace isac
