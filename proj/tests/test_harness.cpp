// SPDX-License-Identifier: Apache-2.0
#include "isac/harness.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace isac;
using namespace isac::harness;

namespace {

json small_scenario() {
  return json::parse(R"({
    "num_antennas": 6, "snapshots": 16, "power_db": 15, "seed": 3,
    "users": {"count": 1},
    "target": {"angles_deg": [40]},
    "design": {"local_search_evals": 40}
  })");
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("isac_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Config, DefaultsArePresetInInternalUnits) {
  const RunConfig rc = load_config(json::object());
  const auto& c = rc.scenario;
  EXPECT_EQ(c.num_antennas, 16);
  EXPECT_EQ(c.num_users(), 2);
  EXPECT_EQ(c.num_angles(), 2);
  EXPECT_DOUBLE_EQ(c.power, 100.0);
  EXPECT_NEAR(c.radar_noise, 1e-11, 1e-25);
  EXPECT_NEAR(c.user_angles[0], deg2rad(-30.0), 1e-15);
  EXPECT_NEAR(c.prior.theta_mean(1), deg2rad(60.0), 1e-15);
  EXPECT_NEAR(c.prior.theta_cov(0, 0), std::pow(deg2rad(0.3), 2), 1e-18);
  EXPECT_NEAR(std::abs(c.prior.alpha_mean(0)), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(std::arg(c.prior.alpha_mean(0)), kPi / 4, 1e-15);
  EXPECT_NEAR(c.sinr_threshold[1], 10.0, 1e-12);
  EXPECT_NEAR(c.si_amplitude, path_loss(50.0, 2.0), 1e-18);
}

TEST(Config, SiRatioAndVarianceKeys) {
  auto j = json::parse(R"({"si": {"ratio_db": 20}, "target": {"prior_std_deg": 0.5}})");
  const auto c = load_config(j).scenario;
  const double beta2 = path_loss(50.0, 2.0);
  EXPECT_NEAR(c.si_amplitude, 10.0 * beta2, 1e-12 * beta2);
  EXPECT_NEAR(c.prior.theta_cov(1, 1), std::pow(deg2rad(0.5), 2), 1e-18);
}

TEST(Config, ExtendedTargetDefaults) {
  const auto c = load_config(json::parse(R"({"target": {"model": "extended"}})")).scenario;
  EXPECT_EQ(c.model, TargetModel::extended);
  EXPECT_EQ(c.num_bins(), 5);
  EXPECT_NEAR(c.prior.theta_mean(0), deg2rad(30.0), 1e-15);
  EXPECT_NEAR(c.prior.theta_mean(1), deg2rad(3.0), 1e-15);
  EXPECT_NEAR(c.bin_offsets(1), -0.5, 1e-15);
  EXPECT_NEAR(c.prior.alpha_cov(0, 0).real(), 1.0, 0.0);
}

TEST(Config, Violations) {
  auto small = json::parse(R"({"num_antennas": 3, "users": {"count": 2}})");
  auto v = validate(small);
  ASSERT_FALSE(v.ok());
  EXPECT_NE(v.violations.front().find("N >= K + T"), std::string::npos);
  EXPECT_THROW(load_config(small), Error);

  v = validate(json::parse(R"({"power_w": -1})"));
  ASSERT_FALSE(v.ok());
  EXPECT_NE(v.violations.front().find("power"), std::string::npos);

  v = validate(json::parse(R"({"target": {"prior_var_deg2": -1}})"));
  EXPECT_FALSE(v.ok());
  v = validate(json::parse(R"({"target": {"model": "blob"}})"));
  EXPECT_FALSE(v.ok());
  v = validate(json::parse(R"({"users": {"angles_deg": [0, 10], "sinr_db": [1, 2, 3]}})"));
  EXPECT_FALSE(v.ok());
}

TEST(Config, DefaultsPassWithFimSmokeTest) {
  for (const char* s : {"{}", R"({"target": {"model": "extended"}})"}) {
    const auto v = validate(json::parse(s));
    EXPECT_TRUE(v.ok()) << (v.violations.empty() ? "" : v.violations.front());
    EXPECT_LT(v.fim_rel_error, 1e-4);
  }
}

TEST(Sweep, ApplyValues) {
  const json base = json::object();
  EXPECT_DOUBLE_EQ(load_config(apply_sweep_value(base, SweepParam::power, 5)).scenario.power, db2lin(5));
  EXPECT_EQ(load_config(apply_sweep_value(base, SweepParam::num_users, 3)).scenario.num_users(), 3);
  const auto doa = load_config(apply_sweep_value(base, SweepParam::target1_doa, 55)).scenario;
  EXPECT_NEAR(doa.prior.theta_mean(0), deg2rad(55), 1e-15);
  EXPECT_NEAR(doa.prior.theta_mean(1), deg2rad(60), 1e-15);
  const json et = json::parse(R"({"target": {"model": "extended"}})");
  for (auto [spread, bins] : {std::pair{1.5, 3}, {3.0, 5}, {4.5, 7}, {6.0, 9}}) {
    const auto c = load_config(apply_sweep_value(et, SweepParam::angular_spread, spread)).scenario;
    EXPECT_EQ(c.num_bins(), bins);
    EXPECT_NEAR(rad2deg(c.prior.theta_mean(1)) * (c.bin_offsets(1) - c.bin_offsets(0)), 1.5, 1e-12);
  }
  EXPECT_THROW(apply_sweep_value(base, SweepParam::angular_spread, 3), Error);
  const auto withs = json::parse(R"({"users": {"angles_deg": [-20], "sinr_db": [7]}})");
  const auto two = load_config(apply_sweep_value(withs, SweepParam::num_users, 2)).scenario;
  EXPECT_NEAR(two.user_angles[0], deg2rad(-20), 1e-15);
  EXPECT_NEAR(two.sinr_threshold[1], db2lin(7), 1e-12);
}

TEST(Workers, ParallelForIsScheduleIndependent) {
  std::vector<std::uint64_t> a(50), b(50);
  parallel_for(50, 1, [&](int i) { a[i] = derive_seed(9, 1, i); });
  parallel_for(50, 4, [&](int i) { b[i] = derive_seed(9, 1, i); });
  EXPECT_EQ(a, b);
  EXPECT_THROW(parallel_for(10, 3, [](int i) { if (i == 7) throw Error("boom"); }), Error);
}

TEST(Workers, EnvOverride) {
  setenv(kWorkersEnv, "3", 1);
  EXPECT_EQ(worker_count(), 3);
  setenv(kWorkersEnv, "garbage", 1);
  EXPECT_GE(worker_count(), 1);
  unsetenv(kWorkersEnv);
}

TEST(MonteCarlo, WrappedErrors) {
  EXPECT_NEAR(wrap_deg(359.0), -1.0, 1e-12);
  EXPECT_NEAR(wrap_deg(-181.0), 179.0, 1e-12);
  EXPECT_NEAR(wrap_deg(0.25), 0.25, 0.0);
}

TEST(MonteCarlo, CommonRandomNumbersAcrossDesigns) {
  const RunConfig rc = load_config(small_scenario());
  const design::DesignContext ctx(rc.scenario);
  const auto even = design::run_strategy(ctx, design::Strategy::even, rc.design);
  const auto heu = design::run_strategy(ctx, design::Strategy::heu, rc.design);
  const std::uint64_t seed = 77;
  // Same trial seed -> same truth draw regardless of the design.
  Rng r1(derive_seed(derive_seed(seed, 0x7472ULL, 0), 0)), r2(derive_seed(derive_seed(seed, 0x7472ULL, 0), 0));
  EXPECT_EQ(draw_truth(ctx.cfg.prior, r1).theta, draw_truth(ctx.cfg.prior, r2).theta);
  const auto s1 = evaluate_design(ctx, even, 20, seed, rc.estimator, 1);
  const auto s2 = evaluate_design(ctx, even, 20, seed, rc.estimator, 3);
  EXPECT_EQ(s1.rmse_deg, s2.rmse_deg);
  const auto s3 = evaluate_design(ctx, heu, 20, seed, rc.estimator, 1);
  for (const auto& s : {s1, s3}) {
    EXPECT_GT(s.rmse_deg, 0.0);
    EXPECT_GT(s.root_bcrb_deg, 0.0);
    EXPECT_TRUE(std::isfinite(s.rmse_deg));
  }
}

TEST(Design, ArtifactIsDeterministic) {
  const fs::path dir = scratch("design");
  const fs::path cfg = dir / "cfg.json";
  write_text(cfg, small_scenario().dump());
  const auto r = run_design(cfg, design::Strategy::prop, dir / "a");
  run_design(cfg, design::Strategy::prop, dir / "b");
  const std::string x = slurp(dir / "a" / "design_prop.json");
  EXPECT_FALSE(x.empty());
  EXPECT_EQ(x, slurp(dir / "b" / "design_prop.json"));
  const json j = json::parse(x);
  EXPECT_TRUE(j["constraints"]["satisfied"].get<bool>());
  EXPECT_EQ(j["a"].size(), 6u);
  EXPECT_FALSE(j["trace"].empty());
  EXPECT_TRUE(is_binary(r.a));

  const auto e = run_design(cfg, design::Strategy::even, dir / "a");
  EXPECT_EQ(e.a, design::benchmark_partition(design::Strategy::even, 6));
  EXPECT_TRUE(e.trace.empty());
}

TEST(Design, InfeasibleNamesConstraint) {
  const fs::path dir = scratch("infeasible");
  auto j = small_scenario();
  j["power_db"] = -60;
  j["users"]["sinr_db"] = 40;
  write_text(dir / "cfg.json", j.dump());
  try {
    run_design(dir / "cfg.json", design::Strategy::even, dir);
    FAIL() << "expected an infeasibility error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("user"), std::string::npos) << e.what();
  }
}

TEST(Sweep, CsvContractAndDeterminism) {
  SweepSpec spec;
  spec.param = SweepParam::power;
  spec.values = {10, 20};
  spec.trials = 8;
  spec.scenario = small_scenario();
  spec.seed = 11;
  const fs::path d1 = scratch("sweep1"), d2 = scratch("sweep2");
  const auto o1 = run_sweep(spec, d1, "", 1, nullptr);
  const auto o2 = run_sweep(spec, d2, "", 3, nullptr);
  ASSERT_EQ(o1.files.size(), 3u);
  for (std::size_t i = 0; i < o1.files.size(); ++i) {
    const std::string a = slurp(o1.files[i]);
    EXPECT_EQ(a, slurp(o2.files[i]));
    EXPECT_EQ(a.substr(0, a.find('\n')), "strategy,param,value,root_bcrb_deg,rmse_deg,trials,seed");
    EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 3);
  }
  for (int p = 0; p < 2; ++p) {
    const auto& prop = o1.rows[p * 3];
    ASSERT_TRUE(prop.ok);
    for (int s = 1; s < 3; ++s) {
      ASSERT_TRUE(o1.rows[p * 3 + s].ok);
      EXPECT_LE(prop.stats.root_bcrb_deg, o1.rows[p * 3 + s].stats.root_bcrb_deg + 1e-6);
    }
  }
}

TEST(Sweep, FailedPointIsFlaggedAndSweepContinues) {
  SweepSpec spec;
  spec.param = SweepParam::num_users;
  spec.values = {1, 6};  // 6 users + 1 target do not fit on 6 antennas
  spec.trials = 2;
  spec.strategies = {design::Strategy::even};
  spec.scenario = small_scenario();
  const fs::path d = scratch("fail");
  const auto o = run_sweep(spec, d, "", 1, nullptr);
  ASSERT_EQ(o.rows.size(), 2u);
  EXPECT_TRUE(o.rows[0].ok);
  EXPECT_FALSE(o.rows[1].ok);
  const std::string csv = slurp(o.files[0]);
  EXPECT_NE(csv.find("even,num_users,6,nan,nan,0,"), std::string::npos) << csv;
}

TEST(Sweep, SpecParsing) {
  const auto s = parse_sweep(json::parse(R"({"param": "prior_std", "trials": 5, "strategies": ["even"]})"));
  EXPECT_EQ(s.values, (std::vector<double>{0.1, 0.3, 0.5, 0.7}));
  EXPECT_EQ(s.strategies.size(), 1u);
  EXPECT_THROW(parse_sweep(json::parse(R"({"param": "colour"})")), Error);
  EXPECT_THROW(parse_sweep(json::parse(R"({"values": []})")), Error);
  EXPECT_THROW(parse_sweep(json::parse(R"({"trials": 0})")), Error);
}

TEST(Sweep, EtCampaignNeedsExtendedTarget) {
  EXPECT_THROW(run_et_campaign(json::object(), scratch("et"), 1, nullptr), Error);
}
