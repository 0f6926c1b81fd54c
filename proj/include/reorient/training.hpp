#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "reorient/dataset.hpp"
#include "reorient/losses.hpp"
#include "reorient/regressor.hpp"

namespace reorient {

/// Network-ready view of one dataset record.
struct TrainingSample {
  Eigen::VectorXd start;
  Eigen::VectorXd goal;
  UnitQuaternion q;
  std::string object_id;
};

std::vector<TrainingSample> make_samples(const std::vector<DatasetRecord>& records, int input_side);

struct TrainConfig {
  AdamConfig adam{};
  double l2 = 1e-9;
  int batch_size = 32;
  int epochs = 30;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::Hybrid;
};

struct EpochMetrics {
  int epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double val_mean_angle_deg = 0.0;
  std::string loss_name;
};

/// Called after each epoch; used by the CLI to log the loss schedule.
using EpochCallback = std::function<void(const EpochMetrics&)>;

/**
 * Mini-batch Adam training. Batches are drawn from a seeded shuffle each
 * epoch, gradients are averaged per batch in a fixed order, and the loss
 * follows `cfg.loss` (the hybrid schedule switches after epoch 0).
 * `mesh_points` maps object ids to the vertex samples used by ShapeMatch.
 */
std::vector<EpochMetrics> train(RegressorModel& model, const std::vector<TrainingSample>& train_set,
                                const std::vector<TrainingSample>& val_set,
                                const std::map<std::string, PointCloud>& mesh_points,
                                const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Mean rotation-angle error in degrees, eval mode.
double mean_angle_error_deg(const RegressorModel& model, const std::vector<TrainingSample>& samples);

/// Mean true rotation angle in degrees: the error of always predicting identity.
double identity_baseline_deg(const std::vector<TrainingSample>& samples);

/// CSV with columns epoch,lr,train_loss,val_mean_angle_deg,loss.
void write_metrics_csv(const std::vector<EpochMetrics>& metrics, const std::filesystem::path& path);

}  // namespace reorient
