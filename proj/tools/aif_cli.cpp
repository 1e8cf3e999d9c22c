// Command line front end: run experiments, parameter sweeps and the session server.

#include "aif/experiments.hpp"
#include "aif/scenario.hpp"
#include "aif/session.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

int print_checks(const aif::Report& report) {
  std::cout << report.name << " (" << aif::to_string(report.experiment) << ")\n";
  for (const auto& [name, pass] : report.checks.items()) {
    std::cout << "  " << (pass.get<bool>() ? "ok   " : "FAIL ") << name << '\n';
  }
  if (report.numeric_failure) std::cout << "  numeric failure in at least one trial\n";
  return report.numeric_failure ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active inference reaching and tracking simulator"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out_dir = "out";
  std::string formats = "csv,json,dat";
  std::uint64_t seed = 0;
  int trials = 0;

  auto* run = app.add_subcommand("run", "Run the experiment described by a scenario file");
  run->add_option("scenario", scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--trials", trials, "Override the number of trials");
  run->add_option("--format", formats, "Comma list of csv, json, dat");

  auto* sweep = app.add_subcommand("sweep", "Grid-search action gain, attractor gain and dynamics variance");
  sweep->add_option("scenario", scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--seed", seed, "Override the scenario seed");
  sweep->add_option("--out", out_dir, "Output directory");
  sweep->add_option("--format", formats, "Comma list of csv, json, dat");

  int port = 8080;
  std::string host = "127.0.0.1";
  std::string static_dir;
  auto* serve = app.add_subcommand("serve", "Serve live sessions over HTTP");
  serve->add_option("--port", port, "TCP port");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--scenario", scenario, "Default scenario for new sessions")->check(CLI::ExistingFile);
  serve->add_option("--static", static_dir, "Directory served at /")->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run || *sweep) {
      aif::ScenarioConfig cfg = aif::load_scenario(scenario);
      if (seed != 0) cfg.seed = seed;
      if (trials > 0) cfg.trials = trials;
      const aif::ReportFormats fmt = aif::parse_formats(formats);
      const aif::Report report = *run ? aif::run_experiment(cfg) : aif::run_sweep(cfg);
      const auto files = aif::emit_report(report, out_dir, fmt);
      std::cout << "wrote " << files.size() << " files to " << out_dir << '\n';
      return print_checks(report);
    }
    if (*serve) {
      aif::ServerOptions opt;
      opt.host = host;
      opt.port = port;
      opt.static_dir = static_dir;
      if (!scenario.empty()) opt.default_scenario = nlohmann::json::parse(std::ifstream(scenario));
      return aif::serve(opt);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
