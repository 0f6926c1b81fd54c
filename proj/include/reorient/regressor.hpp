#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "reorient/depth_image.hpp"
#include "reorient/estimator.hpp"

namespace reorient {

/// Layer widths of the rotation regressor.
struct RegressorShape {
  int input_side = 32;  // images are average-pooled to input_side x input_side
  int embed = 64;       // per-image embedding, shared encoder weights
  int hidden = 128;     // both hidden layers

  friend bool operator==(const RegressorShape&, const RegressorShape&) = default;
};

/// Weight matrix (rows x cols) followed by its bias, stored contiguously.
struct LayerSpec {
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;  // into the flat parameter vector
  std::size_t weight_count() const { return static_cast<std::size_t>(rows) * cols; }
  std::size_t size() const { return weight_count() + rows; }
};

enum Layer : int { kEncoder = 0, kHidden1 = 1, kHidden2 = 2, kOutput = 3 };

/**
 * @brief Two-image quaternion regressor.
 *
 * encoder (shared) -> concat -> hidden1 -> hidden2 -> 4 -> normalize ->
 * canonicalize. Leaky ReLU follows the encoder and both hidden layers;
 * inverted dropout is applied to the hidden activations in training mode.
 * All parameters live in one flat vector so optimizers and serialization
 * can treat them uniformly.
 */
class RegressorModel {
 public:
  explicit RegressorModel(RegressorShape shape = {});

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  static RegressorModel initialized(RegressorShape shape, Rng& rng);

  const RegressorShape& shape() const { return shape_; }
  const std::array<LayerSpec, 4>& layers() const { return layers_; }

  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }

  Eigen::Map<const Eigen::MatrixXd> weight(Layer l) const;
  Eigen::Map<const Eigen::VectorXd> bias(Layer l) const;

  double leaky_slope = 0.02;
  double dropout = 0.4;

 private:
  static std::array<LayerSpec, 4> layout(const RegressorShape& shape);

  RegressorShape shape_;
  std::array<LayerSpec, 4> layers_;
  Eigen::VectorXd params_;
};

/// Average-pools a square depth image to side x side and scales codes to [0, 1].
Eigen::VectorXd prepare_input(const DepthImage& img, int side);

enum class Mode { Train, Eval };

struct ForwardCache {
  Eigen::VectorXd input_s, input_g;
  Eigen::VectorXd pre_s, pre_g;  // encoder pre-activations
  Eigen::VectorXd joint;         // concatenated embeddings
  Eigen::VectorXd pre1, mask1, out1;
  Eigen::VectorXd pre2, mask2, out2;
  Eigen::Vector4d raw = Eigen::Vector4d::Zero();
  double raw_norm = 0.0;
  double sign = 1.0;  // -1 when canonicalization flipped the output
  bool fallback = false;
};

struct ForwardResult {
  RotationEstimate estimate;
  ForwardCache cache;
};

/// Inputs must already be prepared (see prepare_input). `rng` drives
/// dropout and is untouched in eval mode.
ForwardResult regressor_forward(const RegressorModel& model, const Eigen::VectorXd& input_s,
                                const Eigen::VectorXd& input_g, Mode mode, Rng& rng);

/// Parameter gradient for dL/dq_hat, plus the L2 term 2 * l2 * theta.
Eigen::VectorXd regressor_backward(const RegressorModel& model, const ForwardCache& cache,
                                   const Eigen::Vector4d& loss_gradient, double l2);

/// Jacobian of raw / |raw| applied to a vector: (I - u u^T) v / |raw|.
Eigen::Vector4d normalization_vjp(const Eigen::Vector4d& raw, const Eigen::Vector4d& v);

struct AdamConfig {
  double learning_rate = 0.002;
  double decay = 0.9;
  int decay_every = 5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t step = 0;
};

/// learning_rate * decay^floor(epoch / decay_every)
double learning_rate_at(const AdamConfig& cfg, int epoch);

/// One bias-corrected Adam update at the epoch's decayed learning rate.
void adam_step(Eigen::VectorXd& params, AdamState& state, const Eigen::VectorXd& gradient,
               const AdamConfig& cfg, int epoch);

/// Little-endian binary: magic, version, shape table, raw float64 parameters.
void save_model(const RegressorModel& model, const std::filesystem::path& path);
/// Throws IoError for unreadable or truncated files and ShapeMismatch when
/// the stored layer table is inconsistent.
RegressorModel load_model(const std::filesystem::path& path);
/// Additionally requires the stored shape to equal `expected`.
RegressorModel load_model(const std::filesystem::path& path, const RegressorShape& expected);

class RegressorEstimator final : public RotationEstimator {
 public:
  explicit RegressorEstimator(RegressorModel model) : model_(std::move(model)) {}
  RotationEstimate estimate(const DepthImage& current, const DepthImage& goal) override;
  std::string name() const override { return "regressor"; }

 private:
  RegressorModel model_;
  Rng unused_rng_{0};
};

}  // namespace reorient
