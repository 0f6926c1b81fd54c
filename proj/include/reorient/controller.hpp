#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "reorient/dataset.hpp"
#include "reorient/depth_image.hpp"
#include "reorient/estimator.hpp"
#include "reorient/mesh.hpp"
#include "reorient/render.hpp"

namespace reorient {

/// Side on which the predicted rotation is composed with the current
/// orientation when forming the slerp target.
enum class Composition {
  Right,  // q_prev * q_hat
  Left,   // q_hat * q_prev; matches a world-frame prediction
};

Composition parse_composition(const std::string& name);
std::string to_string(Composition c);

struct ControllerConfig {
  int max_iterations = 100;
  double eta = 0.2;
  double delta_deg = 0.5;
  Composition composition = Composition::Left;

  /// Throws ConfigError unless K >= 1, 0 < eta <= 1 and delta > 0.
  void validate() const;
};

/**
 * Simulated object on the turntable. The goal orientation is kept for error
 * reporting and for the simulation oracle; the controller itself only sees
 * rendered images.
 */
class SimEnvironment {
 public:
  SimEnvironment(TriangleMesh mesh, UnitQuaternion start, UnitQuaternion goal, CameraModel cam,
                 RenderSize size = {});

  const UnitQuaternion& orientation() const { return orientation_; }
  void set_orientation(const UnitQuaternion& q) { orientation_ = q; }
  const UnitQuaternion& goal_orientation() const { return goal_; }
  const CameraModel& camera() const { return camera_; }

  /// World-frame rotation taking the current pose onto the goal pose.
  UnitQuaternion true_relative_rotation() const;
  /// Angle between the current and goal orientations.
  Radians true_error() const;

  DepthImage capture();
  DepthImage render_goal() const;

  /// Occlusion and pixel dropout on captured images (off by default).
  void enable_randomization(std::uint64_t seed, OcclusionConfig occlusion, double dropout);

 private:
  TriangleMesh mesh_;
  UnitQuaternion orientation_;
  UnitQuaternion goal_;
  CameraModel camera_;
  RenderSize size_;
  bool randomize_ = false;
  OcclusionConfig occlusion_;
  double dropout_ = 0.0;
  Rng rng_{0};
};

enum class ControllerStatus { Converged, MaxIterations, Failed };

std::string to_string(ControllerStatus s);

struct TraceEntry {
  int k = 0;  // orientation index: q^(k)
  UnitQuaternion orientation;
  std::optional<UnitQuaternion> prediction;  // absent when the loop ended first
  double pred_angle_deg = 0.0;
  double true_err_deg = 0.0;
};

struct ControllerTrace {
  std::vector<TraceEntry> entries;
  ControllerStatus status = ControllerStatus::MaxIterations;
  /// Orientation index whose prediction met the stop rule.
  std::optional<int> converged_at;
  /// Number of estimator queries made.
  int loop_iterations = 0;
  /// Initial true angle exceeded the 30 degree working assumption.
  bool initial_angle_flagged = false;
  std::string error;  // set when status is Failed

  double final_error_deg() const { return entries.empty() ? 0.0 : entries.back().true_err_deg; }
};

/**
 * Runs the closed loop: capture, estimate, stop on small predicted angle,
 * otherwise slerp a fraction eta towards the composed target.
 * Estimator and render errors propagate. If `partial` is given it holds the
 * trace up to the failing iteration, with status Failed and the message.
 */
ControllerTrace run_controller(SimEnvironment& env, RotationEstimator& estimator,
                               const DepthImage& goal_image, const ControllerConfig& cfg,
                               ControllerTrace* partial = nullptr);

/// CSV columns k,qr,qi,qj,qk,pred_angle_deg,true_err_deg.
void write_trace_csv(const ControllerTrace& trace, const std::filesystem::path& path);

/// Creates an estimator for one trial. The environment is provided so that
/// the simulation oracle can read the true relative rotation.
using EstimatorFactory =
    std::function<std::unique_ptr<RotationEstimator>(SimEnvironment& env, std::uint64_t trial_seed)>;

struct EvaluationConfig {
  ControllerConfig controller{};
  int trials_per_object = 20;
  double initial_angle_deg = 30.0;
  RenderSize size{};
  CameraModel camera{};
  bool randomize_captures = false;
  OcclusionConfig occlusion{};
  double dropout = 0.0;
  int threads = 1;
  /// When set, every trial's trace is written to <trace_dir>/<object>_<trial>.csv.
  std::filesystem::path trace_dir;
};

struct TrialResult {
  std::string object_id;
  int trial = 0;
  double initial_err_deg = 0.0;
  double final_err_deg = 0.0;
  int loop_iterations = 0;
  int converged_at = -1;
  ControllerStatus status = ControllerStatus::MaxIterations;
};

struct EvaluationSummary {
  std::vector<TrialResult> trials;
  double median_final_err_deg = 0.0;
  double mean_final_err_deg = 0.0;
  double p90_final_err_deg = 0.0;
  double convergence_rate = 0.0;
};

/// Per trial: R_g uniform, R_s a fixed-angle rotation about a uniform random
/// axis away from R_g, then one controller run. Trials are independent and
/// seeded from (seed, object, trial), so the result does not depend on the
/// thread count.
EvaluationSummary evaluate_controller(const std::vector<NamedMesh>& meshes, const EstimatorFactory& factory,
                                      std::uint64_t seed, const EvaluationConfig& cfg);

/// Linear-interpolated percentile, p in [0, 100].
double percentile(std::vector<double> values, double p);

void write_trials_csv(const EvaluationSummary& summary, const std::filesystem::path& path);
void write_summary_json(const EvaluationSummary& summary, const EvaluationConfig& cfg,
                        const std::string& estimator, std::uint64_t seed,
                        const std::filesystem::path& path);

}  // namespace reorient
