#include <gtest/gtest.h>

#include "reorient/training.hpp"
#include "test_support.hpp"

using namespace reorient;

namespace {

struct Fixture {
  std::vector<TrainingSample> samples;
  std::map<std::string, PointCloud> points;
};

Fixture make_fixture(int n, std::uint64_t seed) {
  const auto cfg = DatasetConfig::for_size(16, 16);
  const std::vector<NamedMesh> meshes = {{"l_bracket", shapes::l_bracket()}, {"wedge", shapes::wedge()}};
  std::vector<DatasetRecord> records;
  for (int k = 0; k < n; ++k) {
    const auto& m = meshes[k % 2];
    Rng rng(record_seed(seed, m.id, k));
    records.push_back(generate_record(m.mesh, m.id, rng, cfg));
  }
  Fixture f;
  f.samples = make_samples(records, 8);
  for (const auto& m : meshes) f.points[m.id] = vertices_of(m.mesh);
  return f;
}

RegressorModel small_model(std::uint64_t seed) {
  Rng rng(seed);
  return RegressorModel::initialized({8, 6, 10}, rng);
}

}  // namespace

TEST(MakeSamples, CopiesRotationAndPoolsImages) {
  const auto f = make_fixture(4, 1);
  ASSERT_EQ(f.samples.size(), 4u);
  EXPECT_EQ(f.samples[0].start.size(), 64);
  EXPECT_EQ(f.samples[1].object_id, "wedge");
  EXPECT_GE(f.samples[0].start.minCoeff(), 0.0);
  EXPECT_LE(f.samples[0].start.maxCoeff(), 1.0);
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  const auto f = make_fixture(10, 2);
  auto model = small_model(3);
  const Eigen::VectorXd before = model.parameters();
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.adam.learning_rate = 0.0;
  cfg.l2 = 0.0;
  const auto metrics = train(model, f.samples, f.samples, f.points, cfg);
  EXPECT_EQ(model.parameters(), before);
  ASSERT_EQ(metrics.size(), 1u);
  EXPECT_EQ(metrics[0].epoch, 0);
  EXPECT_GT(metrics[0].train_loss, 0.0);
  EXPECT_NEAR(metrics[0].val_mean_angle_deg, mean_angle_error_deg(model, f.samples), 1e-12);
}

TEST(Train, SeededRunsIdentical) {
  const auto f = make_fixture(20, 4);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 6;
  cfg.seed = 99;
  auto a = small_model(5), b = small_model(5);
  const auto ma = train(a, f.samples, f.samples, f.points, cfg);
  const auto mb = train(b, f.samples, f.samples, f.points, cfg);
  EXPECT_EQ(a.parameters(), b.parameters());
  for (std::size_t e = 0; e < ma.size(); ++e) EXPECT_EQ(ma[e].train_loss, mb[e].train_loss);
  auto c = small_model(5);
  cfg.seed = 100;
  train(c, f.samples, f.samples, f.points, cfg);
  EXPECT_NE(a.parameters(), c.parameters());
}

TEST(Train, FullBatchSurrogateDescends) {
  const auto f = make_fixture(8, 6);
  auto model = small_model(7);
  model.dropout = 0.0;
  TrainConfig cfg;
  cfg.epochs = 25;
  cfg.batch_size = 8;
  cfg.loss = LossKind::Mean;
  cfg.adam.learning_rate = 1e-4;
  cfg.l2 = 0.0;
  const auto metrics = train(model, f.samples, f.samples, f.points, cfg);
  for (std::size_t e = 1; e < metrics.size(); ++e) {
    EXPECT_LE(metrics[e].train_loss, metrics[e - 1].train_loss) << "epoch " << e;
  }
  EXPECT_LT(metrics.back().train_loss, metrics.front().train_loss);
}

TEST(Train, HybridScheduleAndCallback) {
  const auto f = make_fixture(6, 8);
  auto model = small_model(9);
  TrainConfig cfg;
  cfg.epochs = 3;
  std::vector<std::string> seen;
  const auto metrics =
      train(model, f.samples, f.samples, f.points, cfg, [&](const EpochMetrics& m) { seen.push_back(m.loss_name); });
  EXPECT_EQ(seen, (std::vector<std::string>{"surrogate", "shapematch", "shapematch"}));
  EXPECT_DOUBLE_EQ(metrics[2].learning_rate, 0.002);
}

TEST(Train, Errors) {
  const auto f = make_fixture(4, 10);
  auto model = small_model(11);
  TrainConfig cfg;
  cfg.epochs = 1;
  EXPECT_THROW(train(model, {}, f.samples, f.points, cfg), ConfigError);
  cfg.batch_size = 0;
  EXPECT_THROW(train(model, f.samples, f.samples, f.points, cfg), ConfigError);
  cfg.batch_size = 2;
  cfg.loss = LossKind::ShapeMatch;
  EXPECT_THROW(train(model, f.samples, f.samples, {}, cfg), ConfigError);
}

TEST(IdentityBaseline, MeanTrueAngle) {
  const auto f = make_fixture(12, 12);
  double sum = 0;
  for (const auto& s : f.samples) sum += quat_to_angle(s.q).degrees();
  EXPECT_NEAR(identity_baseline_deg(f.samples), sum / 12, 1e-12);
  RegressorModel zero({8, 6, 10});
  EXPECT_NEAR(mean_angle_error_deg(zero, f.samples), identity_baseline_deg(f.samples), 1e-9);
}

TEST(MetricsCsv, Format) {
  reorient::testing::TempDir dir("metrics");
  write_metrics_csv({{0, 0.002, 0.5, 20.0, "surrogate"}}, dir / "m.csv");
  const auto text = reorient::testing::read_text(dir / "m.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "epoch,lr,train_loss,val_mean_angle_deg,loss");
  EXPECT_NE(text.find("surrogate"), std::string::npos);
}
