#include "aif/experiments.hpp"

#include "aif/ik.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace aif {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

long steps_for(double seconds, double dt) { return static_cast<long>(std::llround(seconds / dt)); }

long dwell_samples(const ReachCriterion& c, double dt) { return std::max(1L, steps_for(c.dwell, dt)); }

ReachSample sample_of(const CycleRecord& rec, ReachUnits units) {
  ReachSample s;
  s.time = rec.arm.time;
  s.error = rec.visual_error;
  if (units == ReachUnits::px) {
    s.point = rec.marker_pixel;
    s.point_valid = rec.marker_in_view;
  } else {
    s.point = rec.marker_world;
  }
  return s;
}

/// Result of driving one Simulation.
struct LoopResult {
  std::vector<TraceRow> arm;
  std::vector<TraceRow> head;
  std::vector<ReachSample> samples;
  std::vector<CycleRecord> records;
  bool failed = false;
  std::string error;
};

struct LoopOptions {
  long steps = 0;
  bool stop_on_reach = false;
  /// Reach stops only count after this time.
  double stop_after = 0.0;
  bool keep_records = false;
};

LoopResult drive(Simulation& sim, const LoopOptions& opt) {
  const ScenarioConfig& cfg = sim.config();
  LoopResult out;
  out.arm.reserve(static_cast<std::size_t>(opt.steps));
  const long need = dwell_samples(cfg.reach, cfg.dt);
  long inside = 0;
  for (long k = 0; k < opt.steps; ++k) {
    CycleRecord rec;
    try {
      rec = sim.step();
    } catch (const NumericError& e) {
      out.failed = true;
      out.error = e.what();
      break;
    }
    out.samples.push_back(sample_of(rec, cfg.reach.units));
    inside = rec.visual_error < cfg.reach.radius ? inside + 1 : 0;
    out.arm.push_back(rec.arm);
    out.head.push_back(rec.head);
    if (opt.keep_records) out.records.push_back(rec);
    if (opt.stop_on_reach && inside >= need && rec.arm.time >= opt.stop_after) break;
  }
  return out;
}

json metrics_json(const ReachMetrics& m) {
  return {{"reached", m.reached},
          {"time_to_reach", m.time_to_reach},
          {"path_length", m.path_length},
          {"final_error", m.final_error},
          {"duration", m.duration}};
}

Report base_report(const ScenarioConfig& cfg) {
  Report r;
  r.name = cfg.name;
  r.experiment = cfg.experiment;
  r.summary["experiment"] = to_string(cfg.experiment);
  r.summary["name"] = cfg.name;
  r.summary["seed"] = cfg.seed;
  r.summary["config"] = cfg.source;
  return r;
}

std::vector<Vec3> static_targets(const ScenarioConfig& cfg) {
  std::vector<Vec3> out;
  for (const Waypoint& w : cfg.targets.waypoints()) out.push_back(w.position);
  if (out.empty()) throw ConfigError("experiment needs at least one target waypoint");
  return out;
}

ScenarioConfig with_static_target(const ScenarioConfig& cfg, const Vec3& target) {
  ScenarioConfig sub = cfg;
  sub.targets = TargetSchedule::constant(target, cfg.targets.space());
  return sub;
}

struct TrialOutcome {
  ReachMetrics metrics;
  LoopResult loop;
};

TrialOutcome reach_trial(const ScenarioConfig& cfg, std::uint64_t seed, const Vec& q0) {
  Simulation sim(cfg, seed, q0);
  TrialOutcome t;
  t.loop = drive(sim, {cfg.max_steps, cfg.stop_on_reach, 0.0, false});
  t.metrics = reach_metrics(t.loop.samples, cfg.reach, cfg.dt);
  return t;
}

std::string trial_name(const std::string& prefix, int a, int b) {
  return prefix + "_r" + std::to_string(a) + "_t" + std::to_string(b);
}

}  // namespace

ReachMetrics reach_metrics(const std::vector<ReachSample>& samples, const ReachCriterion& criterion, double dt) {
  ReachMetrics m;
  m.duration = static_cast<double>(samples.size()) * dt;
  m.time_to_reach = m.duration;
  if (samples.empty()) return m;
  const long need = dwell_samples(criterion, dt);
  long inside = 0;
  std::size_t end = samples.size();
  for (std::size_t k = 0; k < samples.size(); ++k) {
    inside = samples[k].error < criterion.radius ? inside + 1 : 0;
    if (inside >= need) {
      m.reached = true;
      m.time_to_reach = samples[k].time;
      end = k + 1;
      break;
    }
  }
  for (std::size_t k = 1; k < end; ++k) {
    if (samples[k].point_valid && samples[k - 1].point_valid) {
      m.path_length += (samples[k].point - samples[k - 1].point).norm();
    }
  }
  m.final_error = samples.back().error;
  return m;
}

std::vector<ReachSample> reach_samples_from_trace(const std::vector<TraceRow>& rows, ReachUnits units) {
  std::vector<ReachSample> out;
  out.reserve(rows.size());
  for (const TraceRow& row : rows) {
    ReachSample s;
    s.time = row.time;
    s.point = row.s_v;
    s.point_valid = row.s_v_valid;
    if (!row.s_v_valid) {
      s.error = kInf;
    } else if (units == ReachUnits::px) {
      s.error = (row.s_v.head<2>() - row.target.head<2>()).norm();
    } else {
      s.error = (row.s_v.head<3>() - row.target).norm();
    }
    out.push_back(s);
  }
  return out;
}

std::uint64_t trial_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  // splitmix64 over the three coordinates
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

Vec jittered_initial(const ScenarioConfig& cfg, std::uint64_t seed) {
  Vec q = cfg.arm_initial;
  if (cfg.initial_jitter <= 0.0) return q;
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::uniform_real_distribution<double> u(-cfg.initial_jitter, cfg.initial_jitter);
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const double d = u(rng);
    if (cfg.arm_active(i) != 0.0) q(i) += d;
  }
  return cfg.arm.clamp_to_limits(q);
}

Report run_trial(const ScenarioConfig& cfg) {
  Report r = base_report(cfg);
  Simulation sim(cfg, cfg.seed);
  const LoopResult loop = drive(sim, {cfg.max_steps, cfg.stop_on_reach, 0.0, false});
  const ReachMetrics m = reach_metrics(loop.samples, cfg.reach, cfg.dt);
  r.numeric_failure = loop.failed;
  r.summary["metrics"] = metrics_json(m);
  if (loop.failed) r.summary["error"] = loop.error;
  r.traces.push_back({"arm", sim.arm_layout(), loop.arm});
  r.traces.push_back({"head", sim.head_layout(), loop.head});
  return r;
}

Report run_reaching_2d(const ScenarioConfig& cfg) {
  if (cfg.targets.space() != TargetSpace::pixel) throw ConfigError("reaching_2d needs pixel-space targets");
  Report r = base_report(cfg);
  const std::vector<Vec3> targets = static_targets(cfg);

  struct Variant {
    std::string name;
    Precisions prec;
  };
  std::vector<Variant> variants{{"fusion", cfg.arm_precisions},
                                {"vision_only", cfg.arm_precisions},
                                {"encoders_only", cfg.arm_precisions}};
  variants[1].prec.sigma_sp = kInf;
  variants[2].prec.sigma_sv = kInf;

  DataTable table{"trials", {"variant", "repetition", "target", "reached", "time_to_reach", "path_length", "final_error"}, {}};
  json vsum = json::object();
  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    const Variant& v = variants[vi];
    std::vector<double> times, paths;
    std::vector<int> reached_per_target(targets.size(), 0);
    int reached = 0;
    json trials = json::array();
    for (int rep = 0; rep < cfg.trials; ++rep) {
      for (std::size_t ti = 0; ti < targets.size(); ++ti) {
        ScenarioConfig sub = with_static_target(cfg, targets[ti]);
        sub.arm_precisions = v.prec;
        const std::uint64_t seed = trial_seed(cfg.seed, static_cast<std::uint64_t>(rep), ti);
        TrialOutcome t = reach_trial(sub, seed, jittered_initial(cfg, seed));
        r.numeric_failure = r.numeric_failure || t.loop.failed;
        const ReachMetrics& m = t.metrics;
        if (m.reached) {
          ++reached;
          ++reached_per_target[ti];
        }
        times.push_back(m.time_to_reach);
        paths.push_back(m.path_length);
        json tj = metrics_json(m);
        tj["repetition"] = rep;
        tj["target"] = ti;
        if (t.loop.failed) tj["error"] = t.loop.error;
        trials.push_back(tj);
        table.rows.push_back({static_cast<double>(vi), static_cast<double>(rep), static_cast<double>(ti),
                              m.reached ? 1.0 : 0.0, m.time_to_reach, m.path_length, m.final_error});
        r.traces.push_back({trial_name(v.name, rep, static_cast<int>(ti)), {sub.arm.dof(), 2}, std::move(t.loop.arm)});
      }
    }
    vsum[v.name] = {{"reached", reached},
                    {"trials", static_cast<int>(times.size())},
                    {"reached_per_target", reached_per_target},
                    {"mean_time_to_reach", mean_of(times)},
                    {"mean_path_length", mean_of(paths)},
                    {"trials_detail", trials}};
  }
  r.summary["variants"] = vsum;
  r.summary["targets"] = json::array();
  for (const Vec3& t : targets) r.summary["targets"].push_back(vec_json(t.head<2>()));
  r.tables.push_back(std::move(table));

  const int total = static_cast<int>(targets.size()) * cfg.trials;
  const json& fu = vsum["fusion"];
  const json& vo = vsum["vision_only"];
  const json& eo = vsum["encoders_only"];
  r.checks["fusion_all_reached"] = fu["reached"].get<int>() == total;
  r.checks["encoders_only_misses_a_target"] = eo["reached"].get<int>() < total;
  r.checks["vision_only_all_reached"] = vo["reached"].get<int>() == total;
  r.checks["vision_only_path_not_shorter"] =
      vo["mean_path_length"].get<double>() >= fu["mean_path_length"].get<double>();
  return r;
}

Report run_noise_sweep(const ScenarioConfig& cfg) {
  if (cfg.noise_levels.empty()) throw ConfigError("noise_sweep needs noise_levels_deg");
  Report r = base_report(cfg);
  const std::vector<Vec3> targets = static_targets(cfg);
  DataTable table{"levels", {"sigma_deg", "mean_time_to_reach", "success_rate"}, {}};
  json levels = json::array();
  std::vector<double> means;
  for (std::size_t li = 0; li < cfg.noise_levels.size(); ++li) {
    const double sigma = cfg.noise_levels[li];
    std::vector<double> times;
    int reached = 0;
    for (int trial = 0; trial < cfg.trials; ++trial) {
      const std::size_t ti = static_cast<std::size_t>(trial) % targets.size();
      ScenarioConfig sub = with_static_target(cfg, targets[ti]);
      sub.noise.encoder_sigma = sigma;
      // paired across levels: same seed, same start, same noise draws
      const std::uint64_t seed = trial_seed(cfg.seed, static_cast<std::uint64_t>(trial), ti);
      TrialOutcome t = reach_trial(sub, seed, jittered_initial(cfg, seed));
      r.numeric_failure = r.numeric_failure || t.loop.failed;
      times.push_back(t.metrics.time_to_reach);
      if (t.metrics.reached) ++reached;
      r.traces.push_back({"sigma" + std::to_string(li) + "_trial" + std::to_string(trial), {sub.arm.dof(), sub.visual_mode == VisualMode::pixel2d ? 2 : 3},
                          std::move(t.loop.arm)});
    }
    const double mean = mean_of(times);
    means.push_back(mean);
    const double rate = static_cast<double>(reached) / static_cast<double>(cfg.trials);
    levels.push_back({{"sigma_deg", rad2deg(sigma)},
                      {"mean_time_to_reach", mean},
                      {"success_rate", rate},
                      {"times", times}});
    table.rows.push_back({rad2deg(sigma), mean, rate});
  }
  r.summary["levels"] = levels;
  r.tables.push_back(std::move(table));

  bool monotone = true;
  for (std::size_t i = 1; i < means.size(); ++i) monotone = monotone && means[i] >= means[i - 1];
  r.checks["mean_time_non_decreasing"] = monotone;
  if (means.size() >= 2) {
    bool slowest = true;
    for (std::size_t i = 0; i + 1 < means.size(); ++i) slowest = slowest && means.back() > means[i];
    r.checks["largest_sigma_strictly_slowest"] = slowest;
    r.checks["second_level_within_25pct"] = means[0] > 0.0 && means[1] / means[0] <= 1.25;
  }
  return r;
}

Report run_adaptation(const ScenarioConfig& cfg) {
  if (cfg.adaptation.presets.empty()) throw ConfigError("adaptation needs presets");
  Report r = base_report(cfg);
  const Vec3 target = static_targets(cfg).front();
  const ScenarioConfig sub = with_static_target(cfg, target);
  DataTable table{"presets", {"preset", "inner_product", "residual_before", "residual_after"}, {}};
  json presets = json::array();
  bool all_oppose = true;
  bool forearm_unreached = true;
  bool any_forearm = false;

  for (std::size_t pi = 0; pi < cfg.adaptation.presets.size(); ++pi) {
    const MarkerPreset& preset = cfg.adaptation.presets[pi];
    Simulation sim(sub, trial_seed(cfg.seed, pi));
    LoopResult settle = drive(sim, {steps_for(cfg.adaptation.settle_time, cfg.dt), false, 0.0, false});
    r.numeric_failure = r.numeric_failure || settle.failed;
    const double residual_before = sim.reach_error();

    Vec3 offset = preset.offset;
    if (preset.toward_elbow > 0.0) {
      const auto frames = chain_frames(sim.plant().true_arm(), sim.plant().state().q_arm);
      const Vec3 hand = frames.back().translation();
      const Vec3 elbow = frames[frames.size() - 2].translation();
      offset = preset.toward_elbow * (elbow - hand).normalized();
    }
    const Vec q_head = sim.plant().state().q_head;
    const Vec3 marker_old = sim.plant().marker_world();
    sim.set_marker_offset(offset);
    const Vec3 marker_new = sim.plant().marker_world();
    Vec delta;
    if (cfg.visual_mode == VisualMode::pixel2d) {
      delta = project(cfg.rig.left, cfg.head, q_head, marker_new).pixel -
              project(cfg.rig.left, cfg.head, q_head, marker_old).pixel;
    } else {
      delta = marker_new - marker_old;
    }

    const Vec a_before = sim.arm_belief().action;
    LoopResult first = drive(sim, {1, false, 0.0, false});
    const Vec da = sim.arm_belief().action - a_before;
    const Mat jv = visual_jacobian(sim.arm_model(), sim.arm_belief().mu, q_head);
    const double inner = (jv * da).dot(delta);

    LoopResult after = drive(sim, {steps_for(cfg.adaptation.observe_time, cfg.dt), false, 0.0, false});
    r.numeric_failure = r.numeric_failure || first.failed || after.failed;
    const double residual_after = sim.reach_error();

    const bool oppose = inner < 0.0;
    all_oppose = all_oppose && oppose;
    if (preset.toward_elbow > 0.0) {
      any_forearm = true;
      forearm_unreached = forearm_unreached && residual_after > cfg.reach.radius;
    }
    presets.push_back({{"name", preset.name},
                       {"offset", vec_json(offset)},
                       {"visual_displacement", vec_json(delta)},
                       {"action_change", vec_json(da)},
                       {"inner_product", inner},
                       {"opposes", oppose},
                       {"residual_before", residual_before},
                       {"residual_after", residual_after}});
    table.rows.push_back({static_cast<double>(pi), inner, residual_before, residual_after});

    std::vector<TraceRow> rows = std::move(settle.arm);
    rows.insert(rows.end(), first.arm.begin(), first.arm.end());
    rows.insert(rows.end(), after.arm.begin(), after.arm.end());
    r.traces.push_back({"preset_" + preset.name, sim.arm_layout(), std::move(rows)});
  }
  r.summary["presets"] = presets;
  r.tables.push_back(std::move(table));
  r.checks["every_preset_opposes"] = all_oppose;
  r.checks["forearm_offset_unreached"] = any_forearm && forearm_unreached;
  return r;
}

namespace {

struct VertexErrors {
  std::vector<double> rms;
};

VertexErrors vertex_rms(const std::vector<double>& times, const std::vector<double>& errors, std::size_t vertices,
                        double dwell, double window) {
  VertexErrors out;
  for (std::size_t v = 0; v < vertices; ++v) {
    const double lo = static_cast<double>(v + 1) * dwell - window;
    const double hi = static_cast<double>(v + 1) * dwell;
    double sum = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (times[k] >= lo - 1e-9 && times[k] < hi - 1e-9) {
        sum += errors[k] * errors[k];
        ++n;
      }
    }
    out.rms.push_back(n > 0 ? std::sqrt(sum / n) : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

}  // namespace

Report run_comparison(const ScenarioConfig& cfg) {
  Report r = base_report(cfg);
  const ComparisonConfig& cc = cfg.comparison;
  const std::vector<Vec3> vertices = prism_vertices(cc.prism_center, cc.prism_size);
  ScenarioConfig sub = cfg;
  sub.targets = prism_schedule(cc.prism_center, cc.prism_size, cc.dwell);
  const long steps = steps_for(cc.dwell * static_cast<double>(vertices.size()), cfg.dt);

  // active inference
  Simulation sim(sub, cfg.seed);
  const LoopResult ai = drive(sim, {steps, false, 0.0, false});
  r.numeric_failure = ai.failed;
  std::vector<double> ai_t, ai_e;
  for (const ReachSample& s : ai.samples) {
    ai_t.push_back(s.time);
    ai_e.push_back(s.error);
  }

  // open-loop IK on the same plant stream
  NoiseSpec noise = cfg.noise;
  noise.seed = cfg.seed;
  PlantState init;
  init.q_arm = cfg.arm_initial;
  init.q_head = cfg.head_initial;
  Plant plant(cfg.arm, cfg.head, cfg.rig, noise, cfg.mismatch, init);
  std::vector<double> ik_t, ik_e;
  std::vector<TraceRow> ik_rows;
  json ik_solutions = json::array();
  for (const Vec3& v : vertices) {
    Vec start = plant.state().q_arm;
    if (cfg.mismatch.encoder_offset.size() == start.size()) start += cfg.mismatch.encoder_offset;
    const IkSolution sol = solve_ik(cfg.arm, v, start);
    ik_solutions.push_back({{"residual", sol.residual}, {"iterations", sol.iterations}, {"converged", sol.converged}});
    const double move = cc.ik_move_fraction * cc.dwell;
    std::vector<TraceRow> rows =
        execute_position_trajectory(plant, sol.q_goal, move, cc.dwell - move, cfg.dt, cfg.visual_mode, v);
    for (const TraceRow& row : rows) {
      PlantState s = plant.state();
      s.q_arm = row.q;
      ik_t.push_back(row.time);
      ik_e.push_back((marker_position(s, plant.true_arm()) - v).norm());
    }
    ik_rows.insert(ik_rows.end(), rows.begin(), rows.end());
  }

  const VertexErrors ai_rms = vertex_rms(ai_t, ai_e, vertices.size(), cc.dwell, cc.error_window);
  const VertexErrors ik_rms = vertex_rms(ik_t, ik_e, vertices.size(), cc.dwell, cc.error_window);
  auto stats = [](const std::vector<double>& xs) {
    return json{{"mean", mean_of(xs)}, {"min", *std::min_element(xs.begin(), xs.end())},
                {"max", *std::max_element(xs.begin(), xs.end())}, {"per_vertex", xs}};
  };
  r.summary["active_inference"] = stats(ai_rms.rms);
  r.summary["ik"] = stats(ik_rms.rms);
  r.summary["ik"]["solutions"] = ik_solutions;
  r.summary["vertices"] = json::array();
  for (const Vec3& v : vertices) r.summary["vertices"].push_back(vec_json(v));

  DataTable table{"vertices", {"vertex", "ai_rms", "ik_rms"}, {}};
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    table.rows.push_back({static_cast<double>(i), ai_rms.rms[i], ik_rms.rms[i]});
  }
  r.tables.push_back(std::move(table));
  r.traces.push_back({"active_inference", sim.arm_layout(), ai.arm});
  r.traces.push_back({"ik", sim.arm_layout(), std::move(ik_rows)});

  const double ai_mean = mean_of(ai_rms.rms);
  const double ik_mean = mean_of(ik_rms.rms);
  const double threshold = cfg.reach.radius;
  r.checks["ik_error_in_calibration_band"] = ik_mean >= 0.01 && ik_mean <= 0.02;
  r.checks["ai_mean_below_ik_mean"] = ai_mean < ik_mean;
  r.checks["ai_mean_below_sphere"] = ai_mean < threshold;
  r.checks["ai_min_below_sphere_ik_min_above"] =
      r.summary["active_inference"]["min"].get<double>() < threshold && r.summary["ik"]["min"].get<double>() > threshold;
  return r;
}

Report run_moving_target(const ScenarioConfig& cfg) {
  Report r = base_report(cfg);
  const double half_width = 0.5 * cfg.rig.left.width;
  const Vec2 centre(cfg.rig.left.cx, cfg.rig.left.cy);

  struct Run {
    LoopResult loop;
    double max_target_px_error = 0.0;
  };
  auto run_one = [&](bool tracking) {
    ScenarioConfig sub = cfg;
    sub.head_tracking = tracking;
    Simulation sim(sub, cfg.seed);
    Run run;
    run.loop = drive(sim, {cfg.max_steps, cfg.stop_on_reach, cfg.targets.end_time(), true});
    for (const CycleRecord& rec : run.loop.records) {
      const double e = rec.target_in_view ? (rec.target_pixel - centre).norm() : kInf;
      run.max_target_px_error = std::max(run.max_target_px_error, e);
    }
    return run;
  };
  Run on = run_one(true);
  Run off = run_one(false);
  r.numeric_failure = on.loop.failed || off.loop.failed;

  const std::vector<CycleRecord>& recs = on.loop.records;
  double f_peak = 0.0;
  double first_in_view = -1.0;
  for (const CycleRecord& rec : recs) {
    f_peak = std::max(f_peak, rec.arm.free_energy);
    if (first_in_view < 0.0 && rec.arm.s_v_valid) first_in_view = rec.arm.time;
  }
  const double f_final = recs.empty() ? kInf : recs.back().arm.free_energy;
  const bool starts_out_of_view = !recs.empty() && !recs.front().arm.s_v_valid;

  DataTable table{"tracking", {"time", "target_px_error", "F_arm", "F_head", "marker_in_view", "reach_error"}, {}};
  for (const CycleRecord& rec : recs) {
    table.rows.push_back({rec.arm.time, rec.target_in_view ? (rec.target_pixel - centre).norm() : kInf,
                          rec.arm.free_energy, rec.head_free_energy, rec.arm.s_v_valid ? 1.0 : 0.0, rec.visual_error});
  }
  r.tables.push_back(std::move(table));

  const ReachMetrics m = reach_metrics(on.loop.samples, cfg.reach, cfg.dt);
  r.summary["tracking"] = {{"max_target_pixel_error", on.max_target_px_error},
                           {"free_energy_peak", f_peak},
                           {"free_energy_final", f_final},
                           {"starts_out_of_view", starts_out_of_view},
                           {"first_in_view_time", first_in_view},
                           {"metrics", metrics_json(m)}};
  r.summary["no_tracking"] = {{"max_target_pixel_error", off.max_target_px_error}};
  if (on.loop.failed) r.summary["error"] = on.loop.error;

  r.traces.push_back({"arm", {cfg.arm.dof(), cfg.visual_mode == VisualMode::pixel2d ? 2 : 3}, std::move(on.loop.arm)});
  r.traces.push_back({"head", {cfg.head.dof(), 2}, std::move(on.loop.head)});

  r.checks["target_pixel_within_half_width"] = on.max_target_px_error < half_width;
  r.checks["final_free_energy_below_5pct_of_peak"] = f_peak > 0.0 && f_final < 0.05 * f_peak;
  r.checks["proprioception_until_in_view"] = !on.loop.failed && starts_out_of_view && first_in_view > 0.0;
  return r;
}

Report run_sweep(const ScenarioConfig& cfg) {
  Report r = base_report(cfg);
  const ParameterGrid& g = cfg.sweep;
  auto or_default = [](const std::vector<double>& v, double d) { return v.empty() ? std::vector<double>{d} : v; };
  const auto kas = or_default(g.action_gain, cfg.arm_precisions.action_gain);
  const auto rhos = or_default(g.attractor_gain, cfg.attractor_gain);
  const auto smus = or_default(g.sigma_smu, cfg.arm_precisions.sigma_smu);
  const ScenarioConfig base = with_static_target(cfg, static_targets(cfg).front());

  DataTable table{"grid", {"action_gain", "attractor_gain", "sigma_smu", "converged", "time_to_reach", "path_length"}, {}};
  json grid = json::array();
  json best = nullptr;
  double best_time = kInf;
  for (double ka : kas) {
    for (double rho : rhos) {
      for (double smu : smus) {
        ScenarioConfig sub = base;
        sub.arm_precisions.action_gain = ka;
        sub.arm_precisions.sigma_smu = smu;
        sub.attractor_gain = rho;
        sub.arm_precisions.validate();
        const TrialOutcome t = reach_trial(sub, cfg.seed, cfg.arm_initial);
        const bool converged = !t.loop.failed && t.metrics.reached && t.metrics.final_error < cfg.reach.radius;
        json entry = {{"action_gain", ka}, {"attractor_gain", rho}, {"sigma_smu", smu}, {"converged", converged},
                      {"numeric_failure", t.loop.failed}, {"metrics", metrics_json(t.metrics)}};
        grid.push_back(entry);
        table.rows.push_back({ka, rho, smu, converged ? 1.0 : 0.0, t.metrics.time_to_reach, t.metrics.path_length});
        if (converged && t.metrics.time_to_reach < best_time) {
          best_time = t.metrics.time_to_reach;
          best = entry;
        }
      }
    }
  }
  r.summary["grid"] = grid;
  r.summary["chosen"] = best;
  r.tables.push_back(std::move(table));
  r.checks["some_setting_converges"] = !best.is_null();
  return r;
}

Report run_experiment(const ScenarioConfig& cfg) {
  switch (cfg.experiment) {
    case Experiment::trial: return run_trial(cfg);
    case Experiment::reaching_2d: return run_reaching_2d(cfg);
    case Experiment::noise_sweep: return run_noise_sweep(cfg);
    case Experiment::adaptation: return run_adaptation(cfg);
    case Experiment::comparison: return run_comparison(cfg);
    case Experiment::moving_target: return run_moving_target(cfg);
  }
  throw ConfigError("unknown experiment");
}

ReportFormats parse_formats(const std::string& list) {
  ReportFormats f{false, false, false};
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "csv") f.csv = true;
    else if (item == "json") f.json = true;
    else if (item == "dat") f.dat = true;
    else if (!item.empty()) throw ConfigError("unknown format '" + item + "' (expected csv, json, dat)");
  }
  return f;
}

std::vector<std::filesystem::path> emit_report(const Report& report, const std::filesystem::path& dir,
                                               const ReportFormats& formats) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto open = [&](const std::string& file) {
    const std::filesystem::path p = dir / file;
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    written.push_back(p);
    return os;
  };
  if (formats.csv) {
    for (const TrialTrace& t : report.traces) {
      std::ofstream os = open(t.name + ".csv");
      write_trace_csv(os, t.layout, t.rows);
    }
  }
  if (formats.dat) {
    for (const DataTable& t : report.tables) {
      std::ofstream os = open(t.name + ".dat");
      os << '#';
      for (const std::string& c : t.columns) os << ' ' << c;
      os << '\n';
      for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? " " : "") << format_double(row[i]);
        os << '\n';
      }
    }
  }
  if (formats.json) {
    json doc = report.summary;
    doc["checks"] = report.checks;
    doc["numeric_failure"] = report.numeric_failure;
    std::ofstream os = open("summary.json");
    os << doc.dump(2) << '\n';
  }
  return written;
}

}  // namespace aif
