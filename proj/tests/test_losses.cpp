#include <algorithm>
#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "reorient/error.hpp"
#include "reorient/losses.hpp"
#include "test_support.hpp"

using namespace reorient;

namespace {

using Fn = std::function<double(const Eigen::Vector4d&)>;

Eigen::Vector4d central_difference(const Fn& f, const Eigen::Vector4d& x, double h = 1e-6) {
  Eigen::Vector4d g;
  for (int c = 0; c < 4; ++c) {
    Eigen::Vector4d p = x, m = x;
    p[c] += h;
    m[c] -= h;
    g[c] = (f(p) - f(m)) / (2 * h);
  }
  return g;
}

double relative_error(const Eigen::Vector4d& analytic, const Eigen::Vector4d& numeric) {
  return (analytic - numeric).norm() / std::max(numeric.norm(), 1e-8);
}

// Brute-force point-matching value with Rodrigues rotations, for unit inputs.
double shapematch_oracle(const UnitQuaternion& q, const UnitQuaternion& q_hat, const PointCloud& pts) {
  auto rot = [](const UnitQuaternion& u) {
    const double s = std::sqrt(std::max(0.0, 1 - u.r() * u.r()));
    if (s < 1e-15) return Eigen::Matrix3d::Identity().eval();
    const Eigen::Vector3d axis(u.i() / s, u.j() / s, u.k() / s);
    const double angle = 2 * std::atan2(s, u.r());
    Eigen::Matrix3d k;
    k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
    return (Eigen::Matrix3d::Identity() + std::sin(angle) * k + (1 - std::cos(angle)) * k * k).eval();
  };
  const Eigen::Matrix3d a = rot(q_hat), b = rot(q);
  double sum = 0;
  for (const auto& x1 : pts.points) {
    double best = INFINITY;
    for (const auto& x2 : pts.points) best = std::min(best, (a * x1 - b * x2).squaredNorm());
    sum += best;
  }
  return sum / (2.0 * pts.size());
}

PointCloud random_cloud(Rng& rng, int n) {
  std::uniform_real_distribution<double> d(-1, 1);
  PointCloud c;
  for (int k = 0; k < n; ++k) c.points.emplace_back(d(rng), d(rng), d(rng));
  return c;
}

UnitQuaternion about_z(double deg) {
  return UnitQuaternion::from_axis_angle(Eigen::Vector3d::UnitZ(), deg2rad(deg));
}

}  // namespace

TEST(MeanAngleLoss, IdenticalIsSingular) {
  Rng rng(1);
  const auto q = sample_uniform_so3(rng);
  const auto r = mean_angle_loss(q, q);
  EXPECT_NEAR(r.value, 0.0, 1e-7);
  EXPECT_TRUE(r.gradient_singular);
  EXPECT_EQ(r.gradient, Eigen::Vector4d::Zero());
}

TEST(MeanAngleLoss, KnownValue) {
  const Eigen::Vector4d q(1, 0, 0, 0);
  const Eigen::Vector4d q_hat(std::cos(kPi / 6), std::sin(kPi / 6), 0, 0);
  const auto r = mean_angle_loss(q, q_hat);
  EXPECT_NEAR(r.value, kPi / 6, 1e-15);
  EXPECT_FALSE(r.gradient_singular);
}

TEST(MeanAngleLoss, SignSensitive) {
  Rng rng(2);
  for (int n = 0; n < 100; ++n) {
    const auto q = sample_uniform_so3(rng), q_hat = sample_uniform_so3(rng);
    const double a = mean_angle_loss(q, q_hat).value, b = mean_angle_loss(q, -q_hat).value;
    EXPECT_NEAR(a + b, kPi, 1e-12);
  }
  const auto q = about_z(20);
  EXPECT_GT(std::abs(mean_angle_loss(q, q).value - mean_angle_loss(q, -q).value), 3.0);
}

TEST(MeanAngleLoss, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  int checked = 0;
  while (checked < 200) {
    const Eigen::Vector4d q = sample_uniform_so3(rng).coeffs();
    const Eigen::Vector4d q_hat = sample_uniform_so3(rng).coeffs();
    if (std::abs(q.dot(q_hat)) > 0.99) continue;
    const auto r = mean_angle_loss(q, q_hat);
    const auto fd = central_difference([&](const Eigen::Vector4d& x) { return mean_angle_loss(q, x).value; }, q_hat);
    EXPECT_LT(relative_error(r.gradient, fd), 1e-5);
    ++checked;
  }
}

TEST(SurrogateLoss, ValuesAndGradient) {
  const auto q = UnitQuaternion::identity();
  EXPECT_EQ(surrogate_loss(q, q).value, 0.0);
  const auto r = surrogate_loss(q, about_z(60));
  EXPECT_NEAR(r.value, 1 - std::cos(kPi / 6), 1e-15);
  EXPECT_NEAR(r.value, 0.13397, 1e-5);
  Rng rng(4);
  for (int n = 0; n < 200; ++n) {
    const Eigen::Vector4d a = sample_uniform_so3(rng).coeffs(), b = sample_uniform_so3(rng).coeffs();
    const auto s = surrogate_loss(a, b);
    EXPECT_EQ(s.gradient, -a);
    const auto fd = central_difference([&](const Eigen::Vector4d& x) { return surrogate_loss(a, x).value; }, b);
    EXPECT_LT(relative_error(s.gradient, fd), 1e-5);
  }
}

TEST(SurrogateLoss, OrdersLikeMeanAngle) {
  const auto q = UnitQuaternion::identity();
  double last_mean = -1, last_sur = -1;
  for (double deg = 0; deg <= 180; deg += 5) {
    const auto q_hat = about_z(deg);
    const double m = mean_angle_loss(q, q_hat).value, s = surrogate_loss(q, q_hat).value;
    EXPECT_GT(m, last_mean);
    EXPECT_GT(s, last_sur);
    last_mean = m;
    last_sur = s;
  }
}

TEST(LossEquivalence, SameArgminOverCandidateSets) {
  Rng rng(5);
  int agree = 0;
  for (int set = 0; set < 100; ++set) {
    const auto q = sample_uniform_so3(rng);
    std::vector<UnitQuaternion> cands;
    for (int n = 0; n < 50; ++n) cands.push_back(sample_uniform_so3(rng));
    auto argmin = [&](auto loss) {
      std::size_t best = 0;
      for (std::size_t n = 1; n < cands.size(); ++n) {
        if (loss(q, cands[n]).value < loss(q, cands[best]).value) best = n;
      }
      return best;
    };
    agree += argmin([](auto& a, auto& b) { return mean_angle_loss(a, b); }) ==
             argmin([](auto& a, auto& b) { return surrogate_loss(a, b); });
  }
  EXPECT_EQ(agree, 100);
}

TEST(ShapeMatchLoss, ZeroAtTruth) {
  Rng rng(6);
  const auto pts = random_cloud(rng, 30);
  const auto q = sample_uniform_so3(rng);
  EXPECT_NEAR(shapematch_loss(q, q, pts).value, 0.0, 1e-15);
}

TEST(ShapeMatchLoss, SinglePointHalfTurn) {
  PointCloud p;
  p.points.emplace_back(1, 0, 0);
  EXPECT_NEAR(shapematch_loss(UnitQuaternion::identity(), about_z(180), p).value, 2.0, 1e-12);
}

TEST(ShapeMatchLoss, CubeSymmetry) {
  const auto pts = vertices_of(shapes::cube());
  const auto q = UnitQuaternion::identity();
  const auto q_hat = about_z(90);
  EXPECT_LT(shapematch_loss(q, q_hat, pts).value, 1e-12);
  EXPECT_NEAR(angle_between(q, q_hat).degrees(), 90.0, 1e-9);
  EXPECT_NEAR(mean_angle_loss(q, q_hat).value, kPi / 4, 1e-12);
}

TEST(ShapeMatchLoss, MatchesBruteForceOracle) {
  Rng rng(7);
  for (int n = 0; n < 50; ++n) {
    const auto pts = random_cloud(rng, 25);
    const auto q = sample_uniform_so3(rng), q_hat = sample_uniform_so3(rng);
    EXPECT_NEAR(shapematch_loss(q, q_hat, pts).value, shapematch_oracle(q, q_hat, pts), 1e-12);
  }
}

TEST(ShapeMatchLoss, SignInvariantAndPermutationInvariant) {
  Rng rng(8);
  for (int n = 0; n < 50; ++n) {
    auto pts = random_cloud(rng, 20);
    const auto q = sample_uniform_so3(rng), q_hat = sample_uniform_so3(rng);
    const double v = shapematch_loss(q, q_hat, pts).value;
    EXPECT_EQ(shapematch_loss(q, -q_hat, pts).value, v);
    std::shuffle(pts.points.begin(), pts.points.end(), rng);
    EXPECT_NEAR(shapematch_loss(q, q_hat, pts).value, v, 1e-14);
  }
}

TEST(ShapeMatchLoss, GradientMatchesFiniteDifferences) {
  Rng rng(9);
  for (int n = 0; n < 200; ++n) {
    const auto pts = random_cloud(rng, 20);
    const Eigen::Vector4d q = sample_uniform_so3(rng).coeffs();
    const Eigen::Vector4d q_hat = sample_uniform_so3(rng).coeffs();
    const auto r = shapematch_loss(q, q_hat, pts);
    const auto fd = central_difference(
        [&](const Eigen::Vector4d& x) { return shapematch_loss(q, x, pts).value; }, q_hat);
    EXPECT_LT(relative_error(r.gradient, fd), 1e-4);
  }
}

TEST(RotationMatrixRaw, PartialsMatchFiniteDifferences) {
  Rng rng(10);
  const Eigen::Vector4d q = 1.7 * sample_uniform_so3(rng).coeffs();
  const auto parts = rotation_matrix_partials(q);
  for (int c = 0; c < 4; ++c) {
    Eigen::Vector4d p = q, m = q;
    p[c] += 1e-6;
    m[c] -= 1e-6;
    const Eigen::Matrix3d fd = (rotation_matrix_raw(p) - rotation_matrix_raw(m)) / 2e-6;
    EXPECT_LT((fd - parts[c]).cwiseAbs().maxCoeff(), 1e-7);
  }
  EXPECT_LT((rotation_matrix_raw(q / 1.7) - to_matrix(UnitQuaternion::normalize(q))).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(HybridLoss, Schedule) {
  const auto pts = vertices_of(shapes::cube());
  const auto q = UnitQuaternion::identity();
  const auto q_hat = about_z(90);
  EXPECT_NEAR(hybrid_loss(q, q_hat, pts, 0).value, 1 - std::cos(kPi / 4), 1e-15);
  EXPECT_LT(hybrid_loss(q, q_hat, pts, 1).value, 1e-12);
  Rng rng(11);
  const auto a = sample_uniform_so3(rng), b = sample_uniform_so3(rng);
  const auto e1 = hybrid_loss(a, b, pts, 1), e5 = hybrid_loss(a, b, pts, 5);
  EXPECT_EQ(e1.value, e5.value);
  EXPECT_EQ(e1.gradient, e5.gradient);
  EXPECT_THROW(hybrid_loss(a, b, pts, -1), ConfigError);
}

TEST(LossKind, ParseAndNames) {
  EXPECT_EQ(parse_loss_kind("hybrid"), LossKind::Hybrid);
  EXPECT_EQ(parse_loss_kind("shapematch"), LossKind::ShapeMatch);
  EXPECT_EQ(parse_loss_kind("mean"), LossKind::Mean);
  EXPECT_THROW(parse_loss_kind("l2"), ConfigError);
  EXPECT_EQ(active_loss_name(LossKind::Hybrid, 0), "surrogate");
  EXPECT_EQ(active_loss_name(LossKind::Hybrid, 3), "shapematch");
  EXPECT_EQ(active_loss_name(LossKind::Mean, 3), "surrogate");
}

TEST(Losses, NonNegativeAndFinite) {
  Rng rng(12);
  const auto pts = random_cloud(rng, 10);
  for (int n = 0; n < 200; ++n) {
    const auto a = sample_uniform_so3(rng), b = sample_uniform_so3(rng);
    for (const auto& r : {mean_angle_loss(a, b), surrogate_loss(a, b), shapematch_loss(a, b, pts)}) {
      EXPECT_GE(r.value, 0.0);
      EXPECT_TRUE(r.gradient.allFinite());
    }
  }
}
