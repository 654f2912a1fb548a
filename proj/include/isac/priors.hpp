// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "isac/linalg.hpp"
#include "isac/random.hpp"

namespace isac {

/// Gaussian priors on the angle parameters and complex RCS values.
///
/// Point targets: `theta_mean` holds one DOA per target. Extended target:
/// `theta_mean = [central angle, angular spread]`. All angles in radians.
struct PriorSpec {
  RVec theta_mean;
  RMat theta_cov;
  CVec alpha_mean;
  CMat alpha_cov;

  Eigen::Index num_angles() const { return theta_mean.size(); }
  Eigen::Index num_rcs() const { return alpha_mean.size(); }

  void validate() const {
    if (theta_cov.rows() != theta_mean.size() || theta_cov.cols() != theta_mean.size())
      throw Error("prior: angle covariance dimension mismatch");
    if (alpha_cov.rows() != alpha_mean.size() || alpha_cov.cols() != alpha_mean.size())
      throw Error("prior: RCS covariance dimension mismatch");
    if (min_eigenvalue(symmetric_part(theta_cov)) <= 0.0)
      throw Error("prior: angle covariance is not positive definite");
    if (hermitian_defect(alpha_cov) > 1e-10 || min_eigenvalue(alpha_cov) <= 0.0)
      throw Error("prior: RCS covariance is not Hermitian positive definite");
  }

  /// Copy with the angle covariance multiplied by `factor`.
  PriorSpec with_theta_scale(double factor) const {
    PriorSpec out = *this;
    out.theta_cov *= factor;
    return out;
  }
};

/// One draw of the target parameters.
struct TargetTruth {
  RVec theta;
  CVec alpha;
};

inline TargetTruth draw_truth(const PriorSpec& prior, Rng& rng) {
  TargetTruth t;
  Eigen::LLT<RMat> lt(symmetric_part(prior.theta_cov));
  t.theta = prior.theta_mean + lt.matrixL() * rng.normal(prior.theta_mean.size());
  Eigen::LLT<CMat> la(hermitian_part(prior.alpha_cov));
  const CMat z = rng.complex_normal(prior.alpha_mean.size(), 1);
  t.alpha = prior.alpha_mean + la.matrixL() * z.col(0);
  return t;
}

}  // namespace isac
