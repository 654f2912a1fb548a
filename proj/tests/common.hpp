// SPDX-License-Identifier: Apache-2.0
// Small random scenes shared by the unit and acceptance tests.
#pragma once

#include "isac/fim.hpp"
#include "isac/random.hpp"
#include "isac/scene.hpp"

namespace isac::testing {

inline ScenarioConfig point_scene(int n, int t, int k, std::uint64_t seed) {
  Rng rng(seed);
  ScenarioConfig cfg;
  cfg.num_antennas = n;
  cfg.snapshots = 16;
  for (int u = 0; u < k; ++u) {
    cfg.user_angles.push_back(deg2rad(-60.0 + 30.0 * u + 5.0 * rng.uniform()));
    cfg.user_noise.push_back(dbm2watt(-80.0));
    cfg.sinr_threshold.push_back(db2lin(5.0));
  }
  cfg.prior.theta_mean.resize(t);
  for (int i = 0; i < t; ++i) cfg.prior.theta_mean(i) = deg2rad(10.0 + 20.0 * i + 10.0 * rng.uniform());
  cfg.prior.theta_cov = deg2rad(1.0) * deg2rad(1.0) * RMat::Identity(t, t);
  cfg.prior.alpha_mean = CVec(t);
  for (int i = 0; i < t; ++i) cfg.prior.alpha_mean(i) = std::polar(1.0, 2 * kPi * rng.uniform());
  cfg.prior.alpha_cov = 0.1 * CMat::Identity(t, t);
  cfg.weights = RVec::Ones(t);
  cfg.si_amplitude = 0.2 * std::sqrt(path_loss(cfg.target_distance_m, cfg.target_pathloss_exponent));
  cfg.channel_seed = seed;
  return cfg;
}

inline ScenarioConfig extended_scene(int n, int bins, int k, std::uint64_t seed) {
  Rng rng(seed);
  ScenarioConfig cfg = point_scene(n, 1, k, seed);
  cfg.model = TargetModel::extended;
  cfg.bin_offsets = bins == 1 ? RVec::Constant(1, 1.0) : RVec(RVec::LinSpaced(bins, -1.0, 1.0));
  cfg.prior.theta_mean = RVec(2);
  cfg.prior.theta_mean << deg2rad(25.0 + 10.0 * rng.uniform()), deg2rad(2.0 + 2.0 * rng.uniform());
  cfg.prior.theta_cov = deg2rad(0.5) * deg2rad(0.5) * RMat::Identity(2, 2);
  cfg.prior.alpha_mean = CVec(bins);
  for (int i = 0; i < bins; ++i) cfg.prior.alpha_mean(i) = std::polar(1.0, 2 * kPi * rng.uniform());
  cfg.prior.alpha_cov = 0.1 * CMat::Identity(bins, bins);
  cfg.weights = RVec::Ones(2);
  return cfg;
}

inline RVec random_fraction(int n, Rng& rng, double lo = 0.05, double hi = 0.95) {
  RVec a(n);
  for (int i = 0; i < n; ++i) a(i) = lo + (hi - lo) * rng.uniform();
  return a;
}

inline CMat random_psd(int n, double power, Rng& rng) {
  const CMat z = rng.complex_normal(n, n);
  const CMat r = z * z.adjoint();
  return hermitian_part(r * (power / r.trace().real()));
}

}  // namespace isac::testing
