#include "reorient/controller.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "reorient/config.hpp"
#include "reorient/dataset.hpp"
#include "reorient/error.hpp"
#include "reorient/parallel.hpp"

namespace reorient {

namespace {

constexpr double kAssumedMaxInitialDeg = 30.0;
constexpr std::uint64_t kTrialSalt = 0x7c3a9e15d2b4f061ULL;

}  // namespace

Composition parse_composition(const std::string& name) {
  if (name == "right") return Composition::Right;
  if (name == "left") return Composition::Left;
  throw ConfigError("composition must be 'right' or 'left', got '" + name + "'");
}

std::string to_string(Composition c) { return c == Composition::Right ? "right" : "left"; }

std::string to_string(ControllerStatus s) {
  switch (s) {
    case ControllerStatus::Converged: return "converged";
    case ControllerStatus::MaxIterations: return "max_iterations";
    case ControllerStatus::Failed: return "failed";
  }
  return "unknown";
}

void ControllerConfig::validate() const {
  if (max_iterations < 1) throw ConfigError("K must be at least 1");
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in (0, 1]");
  if (!(delta_deg > 0.0)) throw ConfigError("delta must be positive");
}

SimEnvironment::SimEnvironment(TriangleMesh mesh, UnitQuaternion start, UnitQuaternion goal,
                               CameraModel cam, RenderSize size)
    : mesh_(std::move(mesh)), orientation_(start), goal_(goal), camera_(cam), size_(size) {
  validate_mesh(mesh_);
  camera_.validate();
}

UnitQuaternion SimEnvironment::true_relative_rotation() const {
  return rotation_difference(goal_, orientation_);
}

Radians SimEnvironment::true_error() const { return angle_between(orientation_, goal_); }

DepthImage SimEnvironment::capture() {
  DepthImage img = render_depth(mesh_, orientation_, camera_, size_);
  if (randomize_) {
    img = occlude_rectangle(img, rng_, occlusion_);
    img = dropout_pixels(img, dropout_, rng_);
  }
  return img;
}

DepthImage SimEnvironment::render_goal() const { return render_depth(mesh_, goal_, camera_, size_); }

void SimEnvironment::enable_randomization(std::uint64_t seed, OcclusionConfig occlusion, double dropout) {
  randomize_ = true;
  occlusion_ = occlusion;
  dropout_ = dropout;
  rng_.seed(seed);
}

ControllerTrace run_controller(SimEnvironment& env, RotationEstimator& estimator,
                               const DepthImage& goal_image, const ControllerConfig& cfg,
                               ControllerTrace* partial) {
  cfg.validate();
  ControllerTrace trace;
  trace.initial_angle_flagged = env.true_error().degrees() > kAssumedMaxInitialDeg + 1e-9;
  const double delta = deg2rad(cfg.delta_deg);

  for (int k = 1; k <= cfg.max_iterations; ++k) {
    TraceEntry entry;
    entry.k = k - 1;
    entry.orientation = env.orientation();
    entry.true_err_deg = env.true_error().degrees();
    try {
      const DepthImage current = env.capture();
      const RotationEstimate est = estimator.estimate(current, goal_image);
      entry.prediction = est.q_hat;
      entry.pred_angle_deg = quat_to_angle(est.q_hat).degrees();
      trace.entries.push_back(entry);
      trace.loop_iterations = k;
      if (quat_to_angle(est.q_hat).value <= delta) {
        trace.status = ControllerStatus::Converged;
        trace.converged_at = k - 1;
        return trace;
      }
      const UnitQuaternion target = cfg.composition == Composition::Left
                                        ? est.q_hat * env.orientation()
                                        : env.orientation() * est.q_hat;
      env.set_orientation(slerp(env.orientation(), target, cfg.eta));
    } catch (const std::exception& e) {
      if (partial) {
        *partial = trace;
        partial->entries.push_back(entry);
        partial->loop_iterations = k;
        partial->status = ControllerStatus::Failed;
        partial->error = e.what();
      }
      throw;
    }
  }
  TraceEntry last;
  last.k = cfg.max_iterations;
  last.orientation = env.orientation();
  last.true_err_deg = env.true_error().degrees();
  trace.entries.push_back(last);
  trace.status = ControllerStatus::MaxIterations;
  return trace;
}

void write_trace_csv(const ControllerTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "k,qr,qi,qj,qk,pred_angle_deg,true_err_deg\n";
  out.precision(12);
  for (const auto& e : trace.entries) {
    const auto& q = e.orientation;
    out << e.k << ',' << q.r() << ',' << q.i() << ',' << q.j() << ',' << q.k() << ',';
    if (e.prediction) out << e.pred_angle_deg;
    out << ',' << e.true_err_deg << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

EvaluationSummary evaluate_controller(const std::vector<NamedMesh>& meshes, const EstimatorFactory& factory,
                                      std::uint64_t seed, const EvaluationConfig& cfg) {
  if (cfg.trials_per_object < 1) throw ConfigError("trials must be at least 1");
  if (meshes.empty()) throw TooFewObjects("no meshes to evaluate");
  cfg.controller.validate();
  const std::size_t per = static_cast<std::size_t>(cfg.trials_per_object);
  EvaluationSummary summary;
  summary.trials.resize(meshes.size() * per);

  parallel_for(summary.trials.size(), cfg.threads, [&](std::size_t n) {
    const NamedMesh& named = meshes[n / per];
    const int trial = static_cast<int>(n % per);
    const std::uint64_t trial_seed = record_seed(seed ^ kTrialSalt, named.id, static_cast<std::uint64_t>(trial));
    Rng rng(trial_seed);
    const UnitQuaternion goal = sample_uniform_so3(rng);
    const UnitQuaternion offset =
        UnitQuaternion::from_axis_angle(sample_unit_vector(rng), deg2rad(cfg.initial_angle_deg));
    const UnitQuaternion start = offset * goal;

    SimEnvironment env(named.mesh, start, goal, cfg.camera, cfg.size);
    if (cfg.randomize_captures) env.enable_randomization(rng(), cfg.occlusion, cfg.dropout);
    const DepthImage goal_image = env.render_goal();
    auto estimator = factory(env, rng());

    TrialResult r;
    r.object_id = named.id;
    r.trial = trial;
    r.initial_err_deg = env.true_error().degrees();
    const ControllerTrace trace = run_controller(env, *estimator, goal_image, cfg.controller);
    r.final_err_deg = env.true_error().degrees();
    r.loop_iterations = trace.loop_iterations;
    r.status = trace.status;
    r.converged_at = trace.converged_at.value_or(-1);
    if (!cfg.trace_dir.empty()) {
      write_trace_csv(trace, cfg.trace_dir / (named.id + "_" + std::to_string(trial) + ".csv"));
    }
    summary.trials[n] = r;
  });

  std::vector<double> finals;
  std::size_t converged = 0;
  for (const auto& t : summary.trials) {
    finals.push_back(t.final_err_deg);
    if (t.status == ControllerStatus::Converged) ++converged;
  }
  summary.median_final_err_deg = percentile(finals, 50.0);
  summary.p90_final_err_deg = percentile(finals, 90.0);
  summary.mean_final_err_deg =
      std::accumulate(finals.begin(), finals.end(), 0.0) / static_cast<double>(finals.size());
  summary.convergence_rate = static_cast<double>(converged) / static_cast<double>(finals.size());
  return summary;
}

void write_trials_csv(const EvaluationSummary& summary, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "object_id,trial,initial_err_deg,final_err_deg,iterations,converged_at,status\n";
  out.precision(12);
  for (const auto& t : summary.trials) {
    out << t.object_id << ',' << t.trial << ',' << t.initial_err_deg << ',' << t.final_err_deg << ','
        << t.loop_iterations << ',' << t.converged_at << ',' << to_string(t.status) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void write_summary_json(const EvaluationSummary& summary, const EvaluationConfig& cfg,
                        const std::string& estimator, std::uint64_t seed,
                        const std::filesystem::path& path) {
  nlohmann::json j;
  j["estimator"] = estimator;
  j["seed"] = seed;
  j["trials"] = summary.trials.size();
  j["median_final_err_deg"] = summary.median_final_err_deg;
  j["mean_final_err_deg"] = summary.mean_final_err_deg;
  j["p90_final_err_deg"] = summary.p90_final_err_deg;
  j["convergence_rate"] = summary.convergence_rate;
  j["config"] = {
      {"K", cfg.controller.max_iterations},
      {"eta", cfg.controller.eta},
      {"delta_deg", cfg.controller.delta_deg},
      {"composition", to_string(cfg.controller.composition)},
      {"trials_per_object", cfg.trials_per_object},
      {"initial_angle_deg", cfg.initial_angle_deg},
      {"image_width", cfg.size.width},
      {"image_height", cfg.size.height},
      {"randomize_captures", cfg.randomize_captures},
  };
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace reorient
