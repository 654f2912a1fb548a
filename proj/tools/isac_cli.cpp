// SPDX-License-Identifier: Apache-2.0
// Command-line front end. Worker threads default to the hardware
// concurrency; set ISAC_WORKERS to override.

#include "isac/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace isac;
using namespace isac::harness;

namespace {

int cmd_design(const std::string& config, const std::string& strategy, const std::string& out) {
  const auto s = design::parse_strategy(strategy);
  const auto r = run_design(config, s, out);
  std::cout << design::to_string(s) << ": a = ";
  for (Eigen::Index i = 0; i < r.a.size(); ++i) std::cout << static_cast<int>(r.a(i));
  std::cout << ", BCRB " << r.bcrb.weighted << " rad^2, " << r.outer_iterations << " outer iterations, "
            << r.seconds << " s\n";
  return 0;
}

int report(const SweepOutput& o) {
  int failed = 0;
  for (const auto& r : o.rows) failed += r.ok ? 0 : 1;
  for (const auto& f : o.files) std::cout << f.string() << "\n";
  if (failed) std::cerr << failed << " sweep point(s) failed; see the rows marked nan\n";
  return failed ? 3 : 0;
}

int cmd_sweep(const std::string& spec_path, const std::string& out) {
  const fs::path p(spec_path);
  return report(run_sweep(parse_sweep(read_json(p), p.parent_path()), out));
}

int cmd_et(const std::string& config, const std::string& out) { return report(run_et_campaign(read_json(config), out)); }

int cmd_validate(const std::string& config) {
  const auto rep = validate(read_json(config));
  for (const auto& v : rep.violations) std::cout << "violation: " << v << "\n";
  if (!std::isnan(rep.fim_rel_error)) std::cout << "FIM smoke test relative error: " << rep.fim_rel_error << "\n";
  std::cout << (rep.ok() ? "ok" : "invalid") << "\n";
  return rep.ok() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic transmit/receive array partitioning for ISAC"};
  app.require_subcommand(1);
  std::string config, strategy = "prop", out, spec;

  auto* d = app.add_subcommand("design", "Design one partition and beamformer");
  d->add_option("--config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
  d->add_option("--strategy", strategy, "prop | even | heu")->check(CLI::IsMember({"prop", "even", "heu"}));
  d->add_option("--out", out, "Output directory")->required();

  auto* s = app.add_subcommand("sweep", "Parameter sweep with Monte Carlo estimation");
  s->add_option("--spec", spec, "Sweep JSON")->required()->check(CLI::ExistingFile);
  s->add_option("--out", out, "Output directory")->required();

  auto* e = app.add_subcommand("et", "Extended-target campaign");
  e->add_option("--config", config, "Extended-target scenario JSON")->required()->check(CLI::ExistingFile);
  e->add_option("--out", out, "Output directory")->required();

  auto* v = app.add_subcommand("validate", "Static checks and FIM smoke test");
  v->add_option("--config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (d->parsed()) return cmd_design(config, strategy, out);
    if (s->parsed()) return cmd_sweep(spec, out);
    if (e->parsed()) return cmd_et(config, out);
    if (v->parsed()) return cmd_validate(config);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
