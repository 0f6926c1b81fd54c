#include "reorient/training.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "reorient/error.hpp"

namespace reorient {

std::vector<TrainingSample> make_samples(const std::vector<DatasetRecord>& records, int input_side) {
  std::vector<TrainingSample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back({prepare_input(r.start_image, input_side), prepare_input(r.goal_image, input_side),
                   r.relative_rotation, r.object_id});
  }
  return out;
}

double mean_angle_error_deg(const RegressorModel& model, const std::vector<TrainingSample>& samples) {
  if (samples.empty()) return 0.0;
  Rng unused(0);
  double sum = 0.0;
  for (const auto& s : samples) {
    const auto res = regressor_forward(model, s.start, s.goal, Mode::Eval, unused);
    sum += angle_between(res.estimate.q_hat, s.q).degrees();
  }
  return sum / static_cast<double>(samples.size());
}

double identity_baseline_deg(const std::vector<TrainingSample>& samples) {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : samples) sum += angle_between(UnitQuaternion::identity(), s.q).degrees();
  return sum / static_cast<double>(samples.size());
}

std::vector<EpochMetrics> train(RegressorModel& model, const std::vector<TrainingSample>& train_set,
                                const std::vector<TrainingSample>& val_set,
                                const std::map<std::string, PointCloud>& mesh_points,
                                const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (train_set.empty()) throw ConfigError("training set is empty");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be at least 1");
  const bool needs_points = cfg.loss != LossKind::Mean && cfg.epochs > (cfg.loss == LossKind::Hybrid ? 1 : 0);
  if (needs_points) {
    for (const auto& s : train_set) {
      if (!mesh_points.count(s.object_id)) {
        throw ConfigError("no mesh vertices for object '" + s.object_id + "'");
      }
    }
  }
  static const PointCloud kNoPoints;

  Rng rng(cfg.seed);
  AdamState adam;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochMetrics> history;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    const std::string loss_name = active_loss_name(cfg.loss, epoch);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.parameters().size());
      for (std::size_t b = begin; b < end; ++b) {
        const auto& s = train_set[order[b]];
        const auto fwd = regressor_forward(model, s.start, s.goal, Mode::Train, rng);
        const auto it = mesh_points.find(s.object_id);
        const PointCloud& pts = it == mesh_points.end() ? kNoPoints : it->second;
        const LossResult loss =
            training_loss(cfg.loss, s.q.coeffs(), fwd.estimate.q_hat.coeffs(), pts, epoch);
        loss_sum += loss.value;
        grad += regressor_backward(model, fwd.cache, loss.gradient, cfg.l2);
      }
      grad /= static_cast<double>(end - begin);
      adam_step(model.parameters(), adam, grad, cfg.adam, epoch);
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.learning_rate = learning_rate_at(cfg.adam, epoch);
    m.train_loss = loss_sum / static_cast<double>(train_set.size());
    m.val_mean_angle_deg = mean_angle_error_deg(model, val_set);
    m.loss_name = loss_name;
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return history;
}

void write_metrics_csv(const std::vector<EpochMetrics>& metrics, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,lr,train_loss,val_mean_angle_deg,loss\n";
  out.precision(10);
  for (const auto& m : metrics) {
    out << m.epoch << ',' << m.learning_rate << ',' << m.train_loss << ',' << m.val_mean_angle_deg
        << ',' << m.loss_name << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace reorient
