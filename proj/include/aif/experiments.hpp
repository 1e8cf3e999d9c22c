#pragma once

#include "aif/scenario.hpp"
#include "aif/simulation.hpp"
#include "aif/trace.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace aif {

/// Per-cycle sample used for reach metrics: time, reach error and the marker
/// position (pixel or metres) used for the path length.
struct ReachSample {
  double time = 0.0;
  double error = 0.0;
  Vec point;
  bool point_valid = true;
};

struct ReachMetrics {
  bool reached = false;
  /// Time at which the dwell requirement was first met; the trial duration if never.
  double time_to_reach = 0.0;
  /// Marker path up to the reach time (whole trial if unreached).
  double path_length = 0.0;
  double final_error = 0.0;
  double duration = 0.0;
};

ReachMetrics reach_metrics(const std::vector<ReachSample>& samples, const ReachCriterion& criterion, double dt);

/// Reach samples reconstructed from a written arm trace (s_v against the target
/// columns). Equal to the live samples whenever vision is noiseless.
std::vector<ReachSample> reach_samples_from_trace(const std::vector<TraceRow>& rows, ReachUnits units);

struct TrialTrace {
  std::string name;
  TraceLayout layout;
  std::vector<TraceRow> rows;
};

/// Whitespace-separated numeric table written as <name>.dat.
struct DataTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct Report {
  std::string name;
  Experiment experiment = Experiment::trial;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<TrialTrace> traces;
  std::vector<DataTable> tables;
  bool numeric_failure = false;
  /// Acceptance-style verdicts computed by the experiment, name -> pass.
  nlohmann::json checks = nlohmann::json::object();
};

/// Deterministic per-trial seed from the scenario seed and trial coordinates.
std::uint64_t trial_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// Initial arm configuration with uniform jitter on active joints, clamped to limits.
Vec jittered_initial(const ScenarioConfig& cfg, std::uint64_t seed);

Report run_trial(const ScenarioConfig& cfg);
Report run_reaching_2d(const ScenarioConfig& cfg);
Report run_noise_sweep(const ScenarioConfig& cfg);
Report run_adaptation(const ScenarioConfig& cfg);
Report run_comparison(const ScenarioConfig& cfg);
Report run_moving_target(const ScenarioConfig& cfg);
/// Grid search over (k_a, attractor gain, sigma_smu) on the first target.
Report run_sweep(const ScenarioConfig& cfg);

/// Dispatches on cfg.experiment.
Report run_experiment(const ScenarioConfig& cfg);

struct ReportFormats {
  bool csv = true;
  bool json = true;
  bool dat = true;
};

ReportFormats parse_formats(const std::string& list);

/// Writes <trace>.csv, <table>.dat and summary.json into dir (created if needed).
/// Returns the paths written, in order.
std::vector<std::filesystem::path> emit_report(const Report& report, const std::filesystem::path& dir,
                                               const ReportFormats& formats);

}  // namespace aif
