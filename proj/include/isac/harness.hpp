// SPDX-License-Identifier: Apache-2.0
//
// Experiment plumbing: JSON scenario loading, single designs, parameter
// sweeps with Monte Carlo estimation, and CSV/JSON persistence.
//
// Scenario JSON (every key optional; defaults are the desk-scale preset):
//
//   num_antennas, snapshots, carrier_freq_hz, bandwidth_hz, seed
//   power_db (dBW) | power_w, radar_noise_dbm
//   pathloss   { c0_db, d0_m }
//   users      { count, angles_deg[], distance_m, pathloss_exponent,
//                rician_factor_db, noise_dbm, sinr_db (scalar or array) }
//   target     { model: "point" | "extended", distance_m, pathloss_exponent,
//                point:    angles_deg[], prior_var_deg2 | prior_std_deg
//                extended: center_deg, spread_deg, num_bins, offsets[],
//                          prior_var_deg2 | prior_std_deg (scalar or [c, spread])
//                rcs_mean { magnitude, phase_deg }, rcs_var, weights[] }
//   si         { amplitude | ratio_db, delay, advance }
//   design     { rho1, rho2, rho1_growth, rho1_max, max_outer, rel_tol,
//                randomization_samples, polish_passes, local_search_evals }
//   estimator  { max_iter, step_tol }
//
// Sweep JSON: { param, values[], trials, strategies[], seed,
//               scenario {...} | scenario_file "path" }.

#pragma once

#include "isac/designer.hpp"
#include "isac/estimator.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace isac::harness {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kCsvHeader = "strategy,param,value,root_bcrb_deg,rmse_deg,trials,seed";
inline constexpr const char* kWorkersEnv = "ISAC_WORKERS";

struct RunConfig {
  ScenarioConfig scenario;
  design::DesignParams design;
  est::EstimatorOptions estimator;
  std::uint64_t seed = 1;
  json source;  // the parsed input, for re-derivation under sweeps
};

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

inline const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw Error(std::string("config: '") + key + "' must be an object");
  return j.at(key);
}

// Scalar or array of length n.
inline std::vector<double> per_item(const json& j, const char* key, double fallback, int n) {
  if (!j.contains(key)) return std::vector<double>(n, fallback);
  const json& v = j.at(key);
  if (v.is_number()) return std::vector<double>(n, v.get<double>());
  auto out = v.get<std::vector<double>>();
  if (static_cast<int>(out.size()) != n)
    throw Error(std::string("config: '") + key + "' needs " + std::to_string(n) + " entries");
  return out;
}

inline double default_user_angle(int k) {
  static const double base[] = {-30.0, -10.0, 10.0, 30.0};
  return k < 4 ? base[k] : -50.0 - 20.0 * (k - 4);
}

inline std::vector<double> prior_variances(const json& t, int n, double fallback_var) {
  if (t.contains("prior_std_deg")) {
    auto s = per_item(t, "prior_std_deg", 0.0, n);
    for (double& v : s) v = v * v;
    return s;
  }
  return per_item(t, "prior_var_deg2", fallback_var, n);
}

}  // namespace detail

/// Converts the JSON description to internal units without validating the
/// physics; see violations() for that.
inline RunConfig parse_config(const json& j) {
  using detail::get_or;
  using detail::section;
  if (!j.is_object()) throw Error("config: top level must be a JSON object");
  RunConfig rc;
  rc.source = j;
  ScenarioConfig& c = rc.scenario;
  rc.seed = get_or<std::uint64_t>(j, "seed", 1);
  c.channel_seed = rc.seed;
  c.num_antennas = get_or(j, "num_antennas", 16);
  c.snapshots = get_or(j, "snapshots", 32);
  c.carrier_freq_hz = get_or(j, "carrier_freq_hz", 3.5e9);
  c.bandwidth_hz = get_or(j, "bandwidth_hz", 100e6);
  if (j.contains("power_w"))
    c.power = j.at("power_w").get<double>();
  else
    c.power = db2lin(get_or(j, "power_db", 20.0));
  c.radar_noise = dbm2watt(get_or(j, "radar_noise_dbm", -80.0));

  const json& pl = section(j, "pathloss");
  c.pathloss_c0_db = get_or(pl, "c0_db", -30.0);
  c.pathloss_d0_m = get_or(pl, "d0_m", 1.0);

  const json& u = section(j, "users");
  std::vector<double> angles;
  if (u.contains("angles_deg")) {
    angles = u.at("angles_deg").get<std::vector<double>>();
  } else {
    const int k = get_or(u, "count", 2);
    if (k < 0) throw Error("config: user count must be non-negative");
    for (int i = 0; i < k; ++i) angles.push_back(detail::default_user_angle(i));
  }
  const int k = static_cast<int>(angles.size());
  for (double a : angles) c.user_angles.push_back(deg2rad(a));
  c.user_distance_m = get_or(u, "distance_m", 100.0);
  c.user_pathloss_exponent = get_or(u, "pathloss_exponent", 2.6);
  c.rician_factor = db2lin(get_or(u, "rician_factor_db", 3.0));
  for (double v : detail::per_item(u, "noise_dbm", -80.0, k)) c.user_noise.push_back(dbm2watt(v));
  for (double v : detail::per_item(u, "sinr_db", 10.0, k)) c.sinr_threshold.push_back(db2lin(v));

  const json& t = section(j, "target");
  const std::string model = get_or<std::string>(t, "model", "point");
  c.target_distance_m = get_or(t, "distance_m", 50.0);
  c.target_pathloss_exponent = get_or(t, "pathloss_exponent", 2.0);
  const json& rm = section(t, "rcs_mean");
  const cd rcs = std::polar(get_or(rm, "magnitude", std::sqrt(2.0)), deg2rad(get_or(rm, "phase_deg", 45.0)));
  int n_rcs = 0;
  if (model == "point") {
    c.model = TargetModel::point;
    const auto th = t.contains("angles_deg") ? t.at("angles_deg").get<std::vector<double>>()
                                             : std::vector<double>{50.0, 60.0};
    const int nt = static_cast<int>(th.size());
    c.prior.theta_mean = RVec(nt);
    for (int i = 0; i < nt; ++i) c.prior.theta_mean(i) = deg2rad(th[i]);
    const auto var = detail::prior_variances(t, nt, 0.09);
    c.prior.theta_cov = RMat::Zero(nt, nt);
    for (int i = 0; i < nt; ++i) c.prior.theta_cov(i, i) = var[i] * deg2rad(1.0) * deg2rad(1.0);
    n_rcs = nt;
  } else if (model == "extended") {
    c.model = TargetModel::extended;
    const double spread = get_or(t, "spread_deg", 3.0);
    c.prior.theta_mean = RVec(2);
    c.prior.theta_mean << deg2rad(get_or(t, "center_deg", 30.0)), deg2rad(spread);
    const auto var = detail::prior_variances(t, 2, 0.09);
    c.prior.theta_cov = RMat::Zero(2, 2);
    for (int i = 0; i < 2; ++i) c.prior.theta_cov(i, i) = var[i] * deg2rad(1.0) * deg2rad(1.0);
    if (t.contains("offsets")) {
      const auto w = t.at("offsets").get<std::vector<double>>();
      c.bin_offsets = Eigen::Map<const RVec>(w.data(), static_cast<Eigen::Index>(w.size()));
    } else {
      const int bins = get_or(t, "num_bins", 5);
      if (bins < 1) throw Error("config: extended target needs at least one bin");
      c.bin_offsets = bins == 1 ? RVec::Zero(1) : RVec(RVec::LinSpaced(bins, -1.0, 1.0));
    }
    n_rcs = static_cast<int>(c.bin_offsets.size());
  } else {
    throw Error("config: unknown target model '" + model + "'");
  }
  c.prior.alpha_mean = CVec::Constant(n_rcs, rcs);
  c.prior.alpha_cov = get_or(t, "rcs_var", c.model == TargetModel::point ? 0.01 : 1.0) * CMat::Identity(n_rcs, n_rcs);
  const auto w = detail::per_item(t, "weights", 1.0, static_cast<int>(c.prior.theta_mean.size()));
  c.weights = Eigen::Map<const RVec>(w.data(), static_cast<Eigen::Index>(w.size()));

  // SI amplitude: explicit, or from the SI-to-echo power ratio
  // ||H_SI||_F^2 / ||h_t h_t^T||_F^2 = amp^2 / beta^4.
  const json& si = section(j, "si");
  const double beta2 = path_loss(c.target_distance_m, c.target_pathloss_exponent, c.pathloss_c0_db, c.pathloss_d0_m);
  if (si.contains("amplitude"))
    c.si_amplitude = si.at("amplitude").get<double>();
  else
    c.si_amplitude = beta2 * std::sqrt(db2lin(get_or(si, "ratio_db", 0.0)));
  c.si_delay = get_or(si, "delay", 4);
  c.si_advance = get_or(si, "advance", false);

  const json& d = section(j, "design");
  auto& p = rc.design;
  p.rho1 = get_or(d, "rho1", p.rho1);
  p.rho2 = get_or(d, "rho2", p.rho2);
  p.rho1_growth = get_or(d, "rho1_growth", p.rho1_growth);
  p.rho1_max = get_or(d, "rho1_max", p.rho1_max);
  p.max_outer = get_or(d, "max_outer", p.max_outer);
  p.rel_tol = get_or(d, "rel_tol", p.rel_tol);
  p.randomization_samples = get_or(d, "randomization_samples", p.randomization_samples);
  p.polish_passes = get_or(d, "polish_passes", p.polish_passes);
  p.local_search_evals = get_or(d, "local_search_evals", p.local_search_evals);
  p.seed = get_or<std::uint64_t>(d, "seed", derive_seed(rc.seed, 0x64657367ULL));

  const json& e = section(j, "estimator");
  rc.estimator.max_iter = get_or(e, "max_iter", rc.estimator.max_iter);
  rc.estimator.step_tol = get_or(e, "step_tol", rc.estimator.step_tol);
  return rc;
}

/// Every static problem with the scenario, not just the first.
inline std::vector<std::string> violations(const RunConfig& rc) {
  std::vector<std::string> out;
  const ScenarioConfig& c = rc.scenario;
  if (c.num_antennas < 1) out.push_back("num_antennas must be positive");
  if (c.snapshots < 1) out.push_back("snapshots must be positive");
  if (!(c.power > 0.0) || !std::isfinite(c.power)) out.push_back("transmit power must be positive");
  if (!(c.radar_noise > 0.0)) out.push_back("radar noise power must be positive");
  for (std::size_t k = 0; k < c.user_noise.size(); ++k)
    if (!(c.user_noise[k] > 0.0)) out.push_back("noise power of user " + std::to_string(k) + " must be positive");
  if (!(c.si_amplitude >= 0.0)) out.push_back("SI amplitude must be non-negative");
  if (c.si_delay < 0) out.push_back("SI delay must be non-negative");
  if (!(c.carrier_freq_hz > 0.0)) out.push_back("carrier frequency must be positive");
  try {
    c.prior.validate();
  } catch (const std::exception& e) {
    out.push_back(e.what());
  }
  if (c.model == TargetModel::extended && (c.bin_offsets.array().abs() > 1.0).any())
    out.push_back("extended-target bin offsets must lie in [-1, 1]");
  if ((c.weights.array() <= 0.0).any()) out.push_back("BCRB weights must be positive");
  if (c.num_antennas < c.num_users() + c.num_sensing())
    out.push_back("need N >= K + T: " + std::to_string(c.num_antennas) + " antennas cannot host " +
                  std::to_string(c.num_users()) + " transmit and " + std::to_string(c.num_sensing()) +
                  " receive elements");
  if (out.empty()) {
    try {
      c.validate();
      rc.design.validate();
    } catch (const std::exception& e) {
      out.push_back(e.what());
    }
  }
  return out;
}

inline RunConfig load_config(const json& j) {
  RunConfig rc = parse_config(j);
  const auto v = violations(rc);
  if (!v.empty()) {
    std::string msg = "config: " + v.front();
    for (std::size_t i = 1; i < v.size(); ++i) msg += "; " + v[i];
    throw Error(msg);
  }
  return rc;
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

inline RunConfig load_config(const fs::path& path) { return load_config(read_json(path)); }

// ---------------------------------------------------------------------------
// Validation report
// ---------------------------------------------------------------------------

struct ValidationReport {
  std::vector<std::string> violations;
  double fim_rel_error = std::numeric_limits<double>::quiet_NaN();
  bool ok() const { return violations.empty(); }
};

/// Static checks plus a closed-form vs finite-difference FIM comparison on a
/// shrunken copy of the scenario at a fractional partition.
inline ValidationReport validate(const json& j) {
  ValidationReport rep;
  RunConfig rc;
  try {
    rc = parse_config(j);
  } catch (const std::exception& e) {
    rep.violations.push_back(e.what());
    return rep;
  }
  rep.violations = violations(rc);
  if (!rep.ok()) return rep;
  ScenarioConfig small = rc.scenario;
  small.num_antennas = std::max(small.num_users() + small.num_sensing() + 2, std::min(small.num_antennas, 8));
  const ChannelSet ch = make_channels(small);
  Rng rng(derive_seed(rc.seed, 0x76616c69ULL));
  RVec a(small.num_antennas);
  for (int i = 0; i < a.size(); ++i) a(i) = 0.2 + 0.6 * rng.uniform();
  const CMat z = rng.complex_normal(small.num_antennas, small.num_antennas);
  const CMat rw = hermitian_part(z * z.adjoint() * (small.power / (z.squaredNorm())));
  const CMat rn = noise_covariance_from_rw(a, rw, ch.si, small.radar_noise);
  const CMat rinv = fim::receive_inverse(a, rn, small.radar_noise);
  const RMat closed = fim::likelihood_fim_at_means(small, ch, a, rw, rinv).matrix;
  const RMat fd = fim::fim_fd_oracle(small, ch, a, rw, rinv, small.prior.theta_mean, small.prior.alpha_mean);
  rep.fim_rel_error = (closed - fd).norm() / fd.norm();
  if (!(rep.fim_rel_error <= 1e-4))
    rep.violations.push_back("FIM smoke test: closed form and finite differences differ by " +
                             std::to_string(rep.fim_rel_error));
  return rep;
}

// ---------------------------------------------------------------------------
// Workers
// ---------------------------------------------------------------------------

inline int worker_count() {
  if (const char* s = std::getenv(kWorkersEnv)) {
    const int v = std::atoi(s);
    if (v >= 1) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on `workers` threads. Results must be
/// written by index so the schedule cannot change them. The first exception
/// is rethrown after all workers stop.
template <class Fn>
void parallel_for(int count, int workers, Fn&& fn) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex mu;
  auto body = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lk(mu);
        if (!err) err = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

// ---------------------------------------------------------------------------
// Monte Carlo evaluation of one design
// ---------------------------------------------------------------------------

inline double wrap_deg(double e) { return std::remainder(e, 360.0); }

struct TrialOutcome {
  RVec error_deg;  // wrapped estimate - truth, per angle parameter
  int iterations = 0;
  bool converged = false;
};

inline TrialOutcome run_trial(const design::DesignContext& ctx, const design::DesignResult& d, std::uint64_t seed,
                              const est::EstimatorOptions& opt) {
  Rng rng(derive_seed(seed, 0));
  const TargetTruth truth = draw_truth(ctx.cfg.prior, rng);
  const CMat sym = generate_symbols(ctx.k(), ctx.n(), ctx.cfg.snapshots, derive_seed(seed, 1));
  const EchoBatch echo = synthesize_echoes(ctx.cfg, ctx.ch, d.a, d.beam.w, sym, truth, derive_seed(seed, 2));
  const est::MapProblem prob = est::make_problem(ctx.cfg, ctx.ch, d.a, d.beam.w, echo);
  const est::EstimationResult r = est::run_algorithm2(prob, opt);
  TrialOutcome out;
  out.error_deg = (r.theta - truth.theta).unaryExpr([](double x) { return wrap_deg(rad2deg(x)); });
  out.iterations = r.iterations;
  out.converged = r.converged;
  return out;
}

struct PointStats {
  double root_bcrb_deg = 0.0;  // mean over angle parameters of sqrt(BCRB_i)
  double rmse_deg = 0.0;       // mean over angle parameters of per-parameter RMSE
  RVec root_bcrb_per_angle;    // deg
  RVec rmse_per_angle;         // deg
  double mean_iterations = 0.0;
  int trials = 0;
  int unconverged = 0;
};

/// Trials share seeds across strategies (common random numbers): trial t of
/// every design sees the same target draw, symbols and noise.
inline PointStats evaluate_design(const design::DesignContext& ctx, const design::DesignResult& d, int trials,
                                  std::uint64_t seed, const est::EstimatorOptions& opt, int workers) {
  if (trials < 1) throw Error("evaluate_design: need at least one trial");
  std::vector<TrialOutcome> res(trials);
  parallel_for(trials, workers, [&](int t) { res[t] = run_trial(ctx, d, derive_seed(seed, 0x7472ULL, t), opt); });
  const Eigen::Index na = ctx.cfg.num_angles();
  PointStats s;
  s.trials = trials;
  RVec sq = RVec::Zero(na);
  for (const auto& r : res) {
    sq += r.error_deg.cwiseAbs2();
    s.mean_iterations += r.iterations;
    if (!r.converged) ++s.unconverged;
  }
  s.mean_iterations /= trials;
  s.rmse_per_angle = (sq / trials).cwiseSqrt();
  s.root_bcrb_per_angle = d.bcrb.per_angle.cwiseSqrt().unaryExpr([](double x) { return rad2deg(x); });
  s.rmse_deg = s.rmse_per_angle.mean();
  s.root_bcrb_deg = s.root_bcrb_per_angle.mean();
  return s;
}

// ---------------------------------------------------------------------------
// Designs
// ---------------------------------------------------------------------------

inline json to_json(const RVec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline json to_json(const CMat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json re = json::array(), im = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      re.push_back(m(i, j).real());
      im.push_back(m(i, j).imag());
    }
    rows.push_back({{"re", re}, {"im", im}});
  }
  return rows;
}

/// Design artifact. Wall time is deliberately left out so that repeated
/// runs produce identical bytes.
inline json design_artifact(const RunConfig& rc, const design::DesignResult& r) {
  json trace = json::array();
  for (const auto& e : r.trace)
    trace.push_back({{"iteration", e.iteration},
                     {"objective", e.objective},
                     {"normalized_bcrb", e.normalized_bcrb},
                     {"bcrb", e.bcrb},
                     {"consensus", e.consensus}});
  const auto& c = r.constraints;
  return {{"strategy", design::to_string(r.strategy)},
          {"seed", rc.seed},
          {"a", to_json(r.a)},
          {"W", to_json(r.beam.w)},
          {"bcrb", r.bcrb.weighted},
          {"bcrb_per_angle", to_json(r.bcrb.per_angle)},
          {"root_bcrb_deg", to_json(RVec(r.bcrb.per_angle.cwiseSqrt().unaryExpr([](double x) { return rad2deg(x); })))},
          {"outer_iterations", r.outer_iterations},
          {"converged", r.converged},
          {"trace", trace},
          {"constraints",
           {{"sinr", c.sinr},
            {"sinr_ratio", c.sinr_ratio},
            {"power", c.power},
            {"power_budget", rc.scenario.power},
            {"transmit_count", c.transmit_count},
            {"binary", c.binary},
            {"residual_min_eig", c.residual_min_eig},
            {"satisfied", c.satisfied(rc.scenario)}}}};
}

/// Runs one strategy and throws if the finalized design breaks a constraint.
inline design::DesignResult design_checked(const design::DesignContext& ctx, design::Strategy s,
                                           const design::DesignParams& prm) {
  design::DesignResult r = design::run_strategy(ctx, s, prm);
  const auto& c = r.constraints;
  if (!c.satisfied(ctx.cfg)) {
    std::ostringstream msg;
    msg << design::to_string(s) << " design violates a constraint:";
    for (std::size_t k = 0; k < c.sinr_ratio.size(); ++k)
      if (c.sinr_ratio[k] < 1.0 - 1e-4) msg << " SINR of user " << k << " at " << c.sinr_ratio[k] << " of target;";
    if (c.power > ctx.cfg.power * (1 + 1e-6)) msg << " power " << c.power << " > " << ctx.cfg.power << ";";
    if (!c.binary) msg << " partition not binary;";
    msg << " transmit count " << c.transmit_count;
    throw Error(msg.str());
  }
  return r;
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

/// Writes <out_dir>/design_<strategy>.json and returns the result.
inline design::DesignResult run_design(const fs::path& config_path, design::Strategy s, const fs::path& out_dir) {
  const RunConfig rc = load_config(config_path);
  const design::DesignContext ctx(rc.scenario);
  const design::DesignResult r = design_checked(ctx, s, rc.design);
  write_text(out_dir / (std::string("design_") + design::to_string(s) + ".json"),
             design_artifact(rc, r).dump(2) + "\n");
  return r;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

enum class SweepParam { power, num_users, prior_std, target1_doa, si_strength, angular_spread };

inline SweepParam parse_param(const std::string& s) {
  if (s == "power") return SweepParam::power;
  if (s == "num_users") return SweepParam::num_users;
  if (s == "prior_std") return SweepParam::prior_std;
  if (s == "target1_doa") return SweepParam::target1_doa;
  if (s == "si_strength") return SweepParam::si_strength;
  if (s == "angular_spread") return SweepParam::angular_spread;
  throw Error("sweep: unknown parameter '" + s + "'");
}

inline const char* to_string(SweepParam p) {
  switch (p) {
    case SweepParam::power: return "power";
    case SweepParam::num_users: return "num_users";
    case SweepParam::prior_std: return "prior_std";
    case SweepParam::target1_doa: return "target1_doa";
    case SweepParam::si_strength: return "si_strength";
    case SweepParam::angular_spread: return "angular_spread";
  }
  return "?";
}

/// Defaults per swept parameter (units: dBW, users, deg, deg, dB, deg).
inline std::vector<double> default_grid(SweepParam p) {
  switch (p) {
    case SweepParam::power: return {5, 10, 15, 20};
    case SweepParam::num_users: return {1, 2, 3, 4};
    case SweepParam::prior_std: return {0.1, 0.3, 0.5, 0.7};
    case SweepParam::target1_doa: return {50, 52, 54, 56, 58, 60};
    case SweepParam::si_strength: return {0, 10, 20, 30};
    case SweepParam::angular_spread: return {1.5, 3, 4.5, 6};
  }
  return {};
}

/// Applies one sweep value to a scenario JSON.
inline json apply_sweep_value(json j, SweepParam p, double v) {
  json& t = j["target"];
  if (t.is_null()) t = json::object();
  switch (p) {
    case SweepParam::power:
      j.erase("power_w");
      j["power_db"] = v;
      break;
    case SweepParam::num_users: {
      json& u = j["users"];
      if (u.is_null()) u = json::object();
      const int k = static_cast<int>(std::lround(v));
      if (u.contains("angles_deg")) {
        auto a = u["angles_deg"].get<std::vector<double>>();
        for (int i = static_cast<int>(a.size()); i < k; ++i) a.push_back(detail::default_user_angle(i));
        a.resize(k);
        u["angles_deg"] = a;
      } else {
        u["count"] = k;
      }
      for (const char* key : {"noise_dbm", "sinr_db"})
        if (u.contains(key) && u[key].is_array()) u[key] = u[key].front();
      break;
    }
    case SweepParam::prior_std:
      t.erase("prior_var_deg2");
      t["prior_std_deg"] = v;
      break;
    case SweepParam::target1_doa: {
      if (t.value("model", "point") != "point") throw Error("sweep: target1_doa needs point targets");
      auto a = t.contains("angles_deg") ? t["angles_deg"].get<std::vector<double>>() : std::vector<double>{50, 60};
      a.at(0) = v;
      t["angles_deg"] = a;
      break;
    }
    case SweepParam::si_strength: {
      json& si = j["si"];
      if (si.is_null()) si = json::object();
      si.erase("amplitude");
      si["ratio_db"] = v;
      break;
    }
    case SweepParam::angular_spread: {
      if (t.value("model", "point") != "extended") throw Error("sweep: angular_spread needs an extended target");
      // Bins stay 1.5 deg apart: 2 * spread / (bins - 1) = 1.5.
      const int bins = std::max(1, static_cast<int>(std::lround(2.0 * v / 1.5)) + 1);
      t["spread_deg"] = v;
      t["num_bins"] = bins;
      t.erase("offsets");
      break;
    }
  }
  return j;
}

struct SweepSpec {
  SweepParam param = SweepParam::power;
  std::vector<double> values;
  int trials = 100;
  std::vector<design::Strategy> strategies{design::Strategy::prop, design::Strategy::even, design::Strategy::heu};
  json scenario = json::object();
  std::uint64_t seed = 1;
};

inline SweepSpec parse_sweep(const json& j, const fs::path& base_dir = {}) {
  SweepSpec s;
  s.param = parse_param(j.value("param", std::string("power")));
  s.values = j.contains("values") ? j.at("values").get<std::vector<double>>() : default_grid(s.param);
  s.trials = j.value("trials", 100);
  if (j.contains("strategies")) {
    s.strategies.clear();
    for (const auto& v : j.at("strategies")) s.strategies.push_back(design::parse_strategy(v.get<std::string>()));
  }
  if (j.contains("scenario"))
    s.scenario = j.at("scenario");
  else if (j.contains("scenario_file"))
    s.scenario = read_json(base_dir / j.at("scenario_file").get<std::string>());
  s.seed = j.value("seed", s.scenario.value("seed", std::uint64_t{1}));
  if (s.values.empty()) throw Error("sweep: grid is empty");
  if (s.trials < 1) throw Error("sweep: trials must be at least 1");
  if (s.strategies.empty()) throw Error("sweep: no strategies");
  return s;
}

struct ResultRow {
  design::Strategy strategy = design::Strategy::prop;
  SweepParam param = SweepParam::power;
  double value = 0.0;
  PointStats stats;
  std::uint64_t seed = 0;
  int outer_iterations = 0;
  double design_seconds = 0.0;
  bool ok = true;
  std::string error;
  design::DesignResult design;
};

inline std::string format_row(const ResultRow& r) {
  std::ostringstream o;
  o.precision(10);
  o << design::to_string(r.strategy) << ',' << to_string(r.param) << ',' << r.value << ',';
  if (r.ok)
    o << r.stats.root_bcrb_deg << ',' << r.stats.rmse_deg << ',' << r.stats.trials;
  else
    o << "nan,nan,0";
  o << ',' << r.seed;
  return o.str();
}

struct SweepOutput {
  std::vector<ResultRow> rows;  // point-major, strategy-minor
  std::vector<fs::path> files;
};

/// Designs once per (point, strategy), then runs `trials` Monte Carlo
/// estimations per design. Failed points are logged and flagged with nan
/// and zero trials; the sweep continues.
inline SweepOutput run_sweep(const SweepSpec& spec, const fs::path& out_dir, const std::string& prefix = "",
                             int workers = worker_count(), std::ostream* log = &std::cerr) {
  const int np = static_cast<int>(spec.values.size());
  const int ns = static_cast<int>(spec.strategies.size());
  SweepOutput out;
  out.rows.resize(static_cast<std::size_t>(np) * ns);
  std::mutex log_mu;
  auto note = [&](const std::string& msg) {
    if (!log) return;
    std::lock_guard lk(log_mu);
    *log << msg << std::endl;
  };
  parallel_for(np * ns, workers, [&](int idx) {
    const int pi = idx / ns;
    ResultRow& row = out.rows[idx];
    row.strategy = spec.strategies[idx % ns];
    row.param = spec.param;
    row.value = spec.values[pi];
    row.seed = derive_seed(spec.seed, 0x7074ULL, pi);
    try {
      json sj = apply_sweep_value(spec.scenario, spec.param, row.value);
      sj["seed"] = spec.seed;
      const RunConfig rc = load_config(sj);
      const design::DesignContext ctx(rc.scenario);
      const auto t0 = std::chrono::steady_clock::now();
      row.design = design_checked(ctx, row.strategy, rc.design);
      row.design_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      row.outer_iterations = row.design.outer_iterations;
      // Trials run serially here; parallelism is across points and strategies.
      row.stats = evaluate_design(ctx, row.design, spec.trials, row.seed, rc.estimator, 1);
      std::ostringstream m;
      m << to_string(spec.param) << '=' << row.value << ' ' << design::to_string(row.strategy)
        << ": root-BCRB " << row.stats.root_bcrb_deg << " deg, RMSE " << row.stats.rmse_deg << " deg ("
        << row.design_seconds << " s design)";
      note(m.str());
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
      std::ostringstream m;
      m << to_string(spec.param) << '=' << row.value << ' ' << design::to_string(row.strategy)
        << " failed: " << e.what();
      note(m.str());
    }
  });

  json summary = json::array();
  for (int s = 0; s < ns; ++s) {
    std::string csv = std::string(kCsvHeader) + "\n";
    for (int p = 0; p < np; ++p) csv += format_row(out.rows[p * ns + s]) + "\n";
    const fs::path path =
        out_dir / (prefix + to_string(spec.param) + "_" + design::to_string(spec.strategies[s]) + ".csv");
    write_text(path, csv);
    out.files.push_back(path);
  }
  for (const auto& r : out.rows) {
    json j = {{"strategy", design::to_string(r.strategy)},
              {"param", to_string(r.param)},
              {"value", r.value},
              {"seed", r.seed},
              {"ok", r.ok}};
    if (r.ok) {
      j["root_bcrb_deg"] = to_json(r.stats.root_bcrb_per_angle);
      j["rmse_deg"] = to_json(r.stats.rmse_per_angle);
      j["mean_estimator_iterations"] = r.stats.mean_iterations;
      j["unconverged_trials"] = r.stats.unconverged;
      j["outer_iterations"] = r.outer_iterations;
      j["a"] = to_json(r.design.a);
    } else {
      j["error"] = r.error;
    }
    summary.push_back(j);
  }
  write_text(out_dir / (prefix + to_string(spec.param) + "_summary.json"), summary.dump(2) + "\n");
  return out;
}

/// Extended-target campaign: the scenario must describe an extended target.
/// An optional "campaign" object holds the sweep fields (param, values,
/// trials, strategies); the default is a power sweep.
inline SweepOutput run_et_campaign(const json& config, const fs::path& out_dir, int workers = worker_count(),
                                   std::ostream* log = &std::cerr) {
  json scen = config;
  json camp = scen.contains("campaign") ? scen.at("campaign") : json::object();
  scen.erase("campaign");
  if (!scen.contains("target") || scen["target"].value("model", "point") != "extended")
    throw Error("et: config must describe an extended target (target.model = \"extended\")");
  camp["scenario"] = scen;
  if (!camp.contains("trials")) camp["trials"] = 200;
  const SweepSpec spec = parse_sweep(camp);
  return run_sweep(spec, out_dir, "et_", workers, log);
}

}  // namespace isac::harness
