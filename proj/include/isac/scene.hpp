// SPDX-License-Identifier: Apache-2.0
//
// Channels, waveforms, noise covariances and synthetic radar echoes for a
// half-wavelength ULA that is split into transmit (a_n = 1) and receive
// (a_n = 0) elements.

#pragma once

#include "isac/linalg.hpp"
#include "isac/priors.hpp"
#include "isac/random.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace isac {

enum class TargetModel { point, extended };

/// Scenario description in linear units and radians. Conversion from the
/// dB/degree JSON schema happens once, in the harness loader.
struct ScenarioConfig {
  int num_antennas = 16;
  int snapshots = 32;
  double carrier_freq_hz = 3.5e9;
  double bandwidth_hz = 100e6;

  // Communication users.
  std::vector<double> user_angles;     // rad
  double user_distance_m = 100.0;
  double user_pathloss_exponent = 2.6;
  double rician_factor = db2lin(3.0);  // linear
  std::vector<double> user_noise;      // W, one per user
  std::vector<double> sinr_threshold;  // linear, one per user

  // Sensing.
  TargetModel model = TargetModel::point;
  double target_distance_m = 50.0;
  double target_pathloss_exponent = 2.0;
  PriorSpec prior;
  RVec bin_offsets;  // extended target only, entries in [-1, 1]
  RVec weights;      // diagonal of the BCRB weighting matrix

  double radar_noise = dbm2watt(-80.0);  // W
  double power = db2lin(20.0);           // W

  double pathloss_c0_db = -30.0;
  double pathloss_d0_m = 1.0;

  double si_amplitude = 0.0;
  int si_delay = 4;
  bool si_advance = false;

  std::uint64_t channel_seed = 1;

  int num_users() const { return static_cast<int>(user_angles.size()); }
  /// Number of angle parameters (T for point targets, 2 for an extended target).
  int num_angles() const { return static_cast<int>(prior.theta_mean.size()); }
  /// Number of sensing "streams" the partition must leave room for.
  int num_sensing() const { return model == TargetModel::point ? num_angles() : 1; }
  int num_bins() const { return static_cast<int>(bin_offsets.size()); }
  double wavelength() const { return 299792458.0 / carrier_freq_hz; }

  void validate() const;
};

/// Element positions q_n = n - (N + 1) / 2 in half-wavelengths.
inline RVec array_positions(int n) {
  RVec q(n);
  for (int i = 0; i < n; ++i) q(i) = static_cast<double>(i) - 0.5 * (n - 1);
  return q;
}

/// h(n) = beta * exp(-j pi q_n sin(theta)).
inline CVec steering_vector(double theta, int n, double beta = 1.0) {
  if (n < 1) throw Error("steering_vector: need at least one element");
  const RVec q = array_positions(n);
  const double s = std::sin(theta);
  CVec h(n);
  for (int i = 0; i < n; ++i) h(i) = beta * std::exp(-kJ * kPi * q(i) * s);
  return h;
}

struct SteeringDerivatives {
  CVec first;
  CVec second;
};

/// First and second angular derivatives of steering_vector.
inline SteeringDerivatives steering_derivatives(double theta, int n, double beta = 1.0) {
  const CVec h = steering_vector(theta, n, beta);
  const RVec q = array_positions(n);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  SteeringDerivatives d;
  d.first = (-kJ * kPi * c) * q.cast<cd>().cwiseProduct(h);
  d.second = (kJ * kPi * s) * q.cast<cd>().cwiseProduct(h) -
             (kPi * kPi * c * c) * q.array().square().matrix().cast<cd>().cwiseProduct(h);
  return d;
}

/// Distance-dependent path loss C0 (d / d0)^(-exponent), linear power gain.
inline double path_loss(double d, double exponent, double c0_db = -30.0, double d0 = 1.0) {
  if (!(d > 0.0)) throw Error("path_loss: distance must be positive");
  return db2lin(c0_db) * std::pow(d / d0, -exponent);
}

/// Rician user channel scaled by sqrt(path loss).
inline CVec rician_user_channel(double phi, int n, double kappa, double pathloss, std::uint64_t seed) {
  if (!(kappa > 0.0)) throw Error("rician_user_channel: Rician factor must be positive");
  Rng rng(seed);
  const CVec los = steering_vector(phi, n);
  const CVec nlos = rng.complex_normal(n, 1).col(0);
  return std::sqrt(pathloss) * (std::sqrt(kappa / (1.0 + kappa)) * los + std::sqrt(1.0 / (1.0 + kappa)) * nlos);
}

/// Self-interference channel H(i, j) = amplitude * exp(-j 2 pi d_ij / lambda)
/// with d_ij = |i - j| lambda / 2.
inline CMat si_channel(int n, double amplitude, double wavelength) {
  CMat h(n, n);
  const double spacing = 0.5 * wavelength;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double d = std::abs(i - j) * spacing;
      h(i, j) = amplitude * std::exp(-kJ * 2.0 * kPi * d / wavelength);
    }
  return h;
}

/// (N + K) x L unit-variance circularly-symmetric Gaussian symbols.
inline CMat generate_symbols(int k, int n, int l, std::uint64_t seed) {
  if (l < 1) throw Error("generate_symbols: need at least one snapshot");
  Rng rng(seed);
  return rng.complex_normal(n + k, l);
}

/// Self-interference plus noise covariance
/// R_n = (I - A) [sigma^2 I + H_SI A W W^H A H_SI^H] (I - A).
inline CMat noise_covariance(const RVec& a, const CMat& w, const CMat& h_si, double sigma2) {
  const Eigen::Index n = a.size();
  const RVec b = RVec::Ones(n) - a;
  const CMat aw = a.cast<cd>().asDiagonal() * w;
  CMat inner = sigma2 * CMat::Identity(n, n);
  if (h_si.size() > 0) inner += h_si * aw * aw.adjoint() * h_si.adjoint();
  const CMat rn = b.cast<cd>().asDiagonal() * inner * b.cast<cd>().asDiagonal();
  return hermitian_part(rn);
}

/// Same covariance expressed through R_w = W W^H.
inline CMat noise_covariance_from_rw(const RVec& a, const CMat& rw, const CMat& h_si, double sigma2) {
  const Eigen::Index n = a.size();
  const RVec b = RVec::Ones(n) - a;
  const auto ad = a.cast<cd>().asDiagonal();
  CMat inner = sigma2 * CMat::Identity(n, n);
  if (h_si.size() > 0) inner += h_si * ad * rw * ad * h_si.adjoint();
  const CMat rn = b.cast<cd>().asDiagonal() * inner * b.cast<cd>().asDiagonal();
  return hermitian_part(rn);
}

/// Static channels of a scenario.
struct ChannelSet {
  CMat users;      // N x K, column k is h_k
  double target_gain = 1.0;  // beta, amplitude of every target channel
  CMat si;         // N x N
  RVec q;          // element positions

  int num_antennas() const { return static_cast<int>(q.size()); }
  CVec target(double theta) const { return steering_vector(theta, num_antennas(), target_gain); }
};

inline ChannelSet make_channels(const ScenarioConfig& cfg) {
  ChannelSet ch;
  const int n = cfg.num_antennas;
  const int k = cfg.num_users();
  ch.q = array_positions(n);
  ch.users.resize(n, k);
  const double pl_user = path_loss(cfg.user_distance_m, cfg.user_pathloss_exponent, cfg.pathloss_c0_db,
                                   cfg.pathloss_d0_m);
  for (int u = 0; u < k; ++u)
    ch.users.col(u) = rician_user_channel(cfg.user_angles[u], n, cfg.rician_factor, pl_user,
                                          derive_seed(cfg.channel_seed, 0x75736572ULL, u));
  ch.target_gain = std::sqrt(path_loss(cfg.target_distance_m, cfg.target_pathloss_exponent,
                                       cfg.pathloss_c0_db, cfg.pathloss_d0_m));
  ch.si = si_channel(n, cfg.si_amplitude, cfg.wavelength());
  return ch;
}

/// Scatterer angles theta_c + spread * w of an extended target.
inline RVec scatter_angles(double center, double spread, const RVec& offsets) {
  return (center + spread * offsets.array()).matrix();
}

/// Noise-free target response matrix: sum_t alpha_t h_t h_t^T (point) or
/// sum_i alpha_i h(theta_i) h(theta_i)^T (extended). Not masked.
inline CMat target_response(const ScenarioConfig& cfg, const ChannelSet& ch, const RVec& theta,
                            const CVec& alpha) {
  const int n = cfg.num_antennas;
  CMat g = CMat::Zero(n, n);
  if (cfg.model == TargetModel::point) {
    for (Eigen::Index t = 0; t < theta.size(); ++t) {
      const CVec h = ch.target(theta(t));
      g += alpha(t) * h * h.transpose();
    }
  } else {
    const RVec angles = scatter_angles(theta(0), theta(1), cfg.bin_offsets);
    for (Eigen::Index i = 0; i < angles.size(); ++i) {
      const CVec h = ch.target(angles(i));
      g += alpha(i) * h * h.transpose();
    }
  }
  return g;
}

/// Circular column shift standing in for J_tau: delay (default) moves column
/// l to l + tau; advance moves l + tau to l.
inline CMat time_shift(const CMat& x, int tau, bool advance) {
  const Eigen::Index l = x.cols();
  CMat out(x.rows(), l);
  for (Eigen::Index c = 0; c < l; ++c) {
    const Eigen::Index shift = ((advance ? -tau : tau) % l + l) % l;
    out.col((c + shift) % l) = x.col(c);
  }
  return out;
}

struct EchoBatch {
  CMat y;        // N x L received echoes
  CMat symbols;  // (N + K) x L
  TargetTruth truth;

  CVec vectorized() const { return Eigen::Map<const CVec>(y.data(), y.size()); }
};

inline bool is_binary(const RVec& a, double tol = 0.0) {
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (std::abs(a(i)) > tol && std::abs(a(i) - 1.0) > tol) return false;
  return true;
}

/// Synthesizes Y_r = B G A W S + B H_SI A W S J_tau + B N_r for a binary
/// partition `a`; `noise_seed` drives the receiver noise.
inline EchoBatch synthesize_echoes(const ScenarioConfig& cfg, const ChannelSet& ch, const RVec& a, const CMat& w,
                                   const CMat& symbols, const TargetTruth& truth, std::uint64_t noise_seed) {
  const int n = cfg.num_antennas;
  if (a.size() != n) throw Error("synthesize_echoes: partition length mismatch");
  if (!is_binary(a)) throw Error("synthesize_echoes: partition must be binary");
  if (w.rows() != n || w.cols() != symbols.rows())
    throw Error("synthesize_echoes: beamformer/symbol dimension mismatch");
  const RVec b = RVec::Ones(n) - a;
  const auto ad = a.cast<cd>().asDiagonal();
  const auto bd = b.cast<cd>().asDiagonal();
  const CMat x = ad * (w * symbols);  // transmitted block
  const CMat g = target_response(cfg, ch, truth.theta, truth.alpha);
  EchoBatch out;
  out.symbols = symbols;
  out.truth = truth;
  out.y = bd * (g * x);
  if (cfg.si_amplitude != 0.0) out.y += bd * (ch.si * time_shift(x, cfg.si_delay, cfg.si_advance));
  if (cfg.radar_noise > 0.0) {
    Rng rng(noise_seed);
    out.y += std::sqrt(cfg.radar_noise) * (bd * rng.complex_normal(n, symbols.cols()));
  }
  return out;
}

inline void ScenarioConfig::validate() const {
  if (num_antennas < 1) throw Error("config: num_antennas must be positive");
  if (snapshots < 1) throw Error("config: snapshots must be positive");
  if (user_noise.size() != user_angles.size() || sinr_threshold.size() != user_angles.size())
    throw Error("config: per-user vectors must have one entry per user");
  if (!(power > 0.0)) throw Error("config: transmit power must be positive");
  if (!(radar_noise > 0.0)) throw Error("config: radar noise power must be positive");
  prior.validate();
  if (model == TargetModel::point) {
    if (prior.num_rcs() != prior.num_angles()) throw Error("config: need one RCS per point target");
  } else {
    if (prior.num_angles() != 2) throw Error("config: extended target has exactly two angle parameters");
    if (prior.num_rcs() != bin_offsets.size()) throw Error("config: need one RCS per angle bin");
    if (bin_offsets.size() < 1) throw Error("config: extended target needs at least one bin");
    if ((bin_offsets.array().abs() > 1.0).any()) throw Error("config: bin offsets must lie in [-1, 1]");
  }
  if (num_antennas < num_users() + num_sensing())
    throw Error("config: need N >= K + T antennas (partition cardinality constraint is unsatisfiable)");
  if (weights.size() != prior.num_angles() || (weights.array() <= 0.0).any())
    throw Error("config: BCRB weights must be positive, one per angle parameter");
}

}  // namespace isac
