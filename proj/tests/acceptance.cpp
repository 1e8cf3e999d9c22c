// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "aif/experiments.hpp"
#include "aif/scenario.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

using namespace aif;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kGradientTolerance = 1e-5;
constexpr double kGradientSeconds = 10.0;
constexpr int kGradientStates = 1000;
constexpr double kPinvTolerance = 1e-9;
constexpr int kReachRepetitions = 10;
constexpr int kSweepTrials = 40;
constexpr double kSweepSeconds = 120.0;
constexpr std::size_t kPrismVertices = 8;
constexpr double kComparisonSeconds = 60.0;

const char* const kScenarios[] = {"reaching_2d", "noise_sweep", "adaptation", "comparison", "moving_target"};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

ScenarioConfig load(const std::string& name) {
  std::ifstream in(fs::path(AIF_SCENARIO_DIR) / (name + ".json"));
  if (!in) throw ConfigError("missing scenario " + name);
  return parse_scenario(json::parse(in));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

// All named checks of a report must hold.
Verdict from_checks(const Report& r, const std::string& extra, bool extra_ok) {
  Verdict v{!r.numeric_failure && extra_ok, ""};
  std::ostringstream d;
  for (const auto& [k, ok] : r.checks.items()) {
    d << k << '=' << (ok.get<bool>() ? "yes" : "no") << ' ';
    v.pass = v.pass && ok.get<bool>();
  }
  if (r.checks.empty()) v.pass = false;
  if (r.numeric_failure) d << "numeric_failure ";
  d << extra;
  v.detail = d.str();
  return v;
}

Verdict gradients() {
  std::mt19937_64 rng(2024);
  const Vec home = Eigen::Vector4d(0, deg2rad(30), deg2rad(-15), 0);
  const Vec head = Vec3(deg2rad(40), deg2rad(-15), 0);
  double worst = 0.0;
  const auto t0 = Clock::now();
  for (VisualMode mode : {VisualMode::stereo3d, VisualMode::pixel2d}) {
    const GenerativeModel m(default_arm_chain(), default_head_chain(), default_rig(), mode);
    for (int k = 0; k < kGradientStates / 2; ++k) {
      const test::EngineState s = test::random_engine_state(m, head, home, rng);
      worst = std::max(worst, test::scaled_error(grad_mu(m, s.belief, s.sensors, s.rho, s.prec),
                                                 test::numeric_neg_gradient(m, s, 0)));
      worst = std::max(worst, test::scaled_error(grad_mu_prime(m, s.belief, s.rho, s.prec, head),
                                                 test::numeric_neg_gradient(m, s, 1)));
    }
  }
  const double secs = seconds_since(t0);
  char d[160];
  std::snprintf(d, sizeof d, "%d states, worst relative error %.2e (tol %.0e), %.2f s", kGradientStates, worst,
                kGradientTolerance, secs);
  return {worst < kGradientTolerance && secs < kGradientSeconds, d};
}

Verdict moore_penrose() {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0.0, worst_abs = 0.0;
  int count = 0;
  auto score = [&](const Mat& m) {
    const Mat p = pseudoinverse(m);
    worst = std::max(worst, test::moore_penrose_relative_residual(m, p));
    worst_abs = std::max(worst_abs, test::moore_penrose_residual(m, p));
    ++count;
  };
  for (int rows = 1; rows <= 3; ++rows)
    for (int cols = 1; cols <= 4; ++cols)
      for (int rank = 0; rank <= std::min(rows, cols); ++rank)
        for (int k = 0; k < 50; ++k) {
          Mat a = Mat::NullaryExpr(rows, rank, [&] { return n(rng); });
          Mat b = Mat::NullaryExpr(rank, cols, [&] { return n(rng); });
          const Mat m = rank == 0 ? Mat(Mat::Zero(rows, cols)) : Mat(a * b);
          score(m);
        }
  const KinematicChain arm = default_arm_chain();
  for (int k = 0; k < 200; ++k) {
    score(geometric_jacobian(arm, test::random_q(arm, rng)));
  }
  char d[160];
  std::snprintf(d, sizeof d, "%d matrices incl. 3x4 arm jacobians, worst relative residual %.2e (tol %.0e), absolute %.2e",
                count, worst, kPinvTolerance, worst_abs);
  return {worst < kPinvTolerance, d};
}

Verdict reaching() {
  const ScenarioConfig cfg = load("reaching_2d");
  const Report r = run_reaching_2d(cfg);
  const bool noiseless = cfg.noise.encoder_sigma == 0.0 && cfg.noise.pixel_sigma == 0.0;
  return from_checks(r, "repetitions=" + std::to_string(cfg.trials),
                     cfg.trials >= kReachRepetitions && noiseless);
}

Verdict noise_sweep() {
  const ScenarioConfig cfg = load("noise_sweep");
  const auto t0 = Clock::now();
  const Report r = run_noise_sweep(cfg);
  const double secs = seconds_since(t0);
  int trials = 0;
  for (const json& level : r.summary.at("levels")) trials += static_cast<int>(level.at("times").size());
  char d[80];
  std::snprintf(d, sizeof d, "trials=%d %.2f s", trials, secs);
  return from_checks(r, d, trials >= kSweepTrials && secs < kSweepSeconds);
}

Verdict adaptation() { return from_checks(run_adaptation(load("adaptation")), "", true); }

Verdict comparison() {
  const auto t0 = Clock::now();
  const Report r = run_comparison(load("comparison"));
  const double secs = seconds_since(t0);
  const std::size_t vertices = r.summary.at("active_inference").at("per_vertex").size();
  char d[120];
  std::snprintf(d, sizeof d, "ik_mean=%.4f m ai_mean=%.4f m vertices=%zu %.2f s",
                r.summary.at("ik").at("mean").get<double>(), r.summary.at("active_inference").at("mean").get<double>(),
                vertices, secs);
  return from_checks(r, d, vertices == kPrismVertices && secs < kComparisonSeconds);
}

Verdict moving_target() { return from_checks(run_moving_target(load("moving_target")), "", true); }

Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / "aif_acceptance_determinism";
  fs::remove_all(root);
  int files = 0;
  std::string mismatch;
  for (const char* name : kScenarios) {
    ScenarioConfig cfg = load(name);
    if (cfg.noise.encoder_sigma == 0.0 && cfg.noise.pixel_sigma == 0.0) {
      cfg.noise.encoder_sigma = deg2rad(5.0);
      cfg.noise.pixel_sigma = cfg.visual_mode == VisualMode::pixel2d ? 1.0 : 0.5;
    }
    const auto a = emit_report(run_experiment(cfg), root / name / "a", {true, false, false});
    const auto b = emit_report(run_experiment(cfg), root / name / "b", {true, false, false});
    if (a.size() != b.size() || a.empty()) mismatch += std::string(name) + " ";
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
      ++files;
      if (a[i].filename() != b[i].filename() || slurp(a[i]) != slurp(b[i])) {
        mismatch += a[i].string() + " ";
        break;
      }
    }
  }
  fs::remove_all(root);
  return {mismatch.empty(), std::to_string(files) + " csv pairs compared, noise on" +
                                (mismatch.empty() ? "" : ", differing: " + mismatch)};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Verdict()>> criteria[] = {
      {"gradient_correctness", gradients}, {"moore_penrose", moore_penrose},
      {"reaching_2d", reaching},           {"noise_sweep", noise_sweep},
      {"adaptation", adaptation},          {"ik_comparison", comparison},
      {"moving_target", moving_target},    {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
