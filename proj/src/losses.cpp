#include "reorient/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "reorient/error.hpp"

namespace reorient {

Eigen::Matrix3d rotation_matrix_raw(const Eigen::Vector4d& q) {
  const double r = q[0], i = q[1], j = q[2], k = q[3];
  Eigen::Matrix3d m;
  m << 1.0 - 2.0 * (j * j + k * k), 2.0 * (i * j - k * r), 2.0 * (i * k + j * r),
      2.0 * (i * j + k * r), 1.0 - 2.0 * (i * i + k * k), 2.0 * (j * k - i * r),
      2.0 * (i * k - j * r), 2.0 * (j * k + i * r), 1.0 - 2.0 * (i * i + j * j);
  return m;
}

std::array<Eigen::Matrix3d, 4> rotation_matrix_partials(const Eigen::Vector4d& q) {
  const double r = q[0], i = q[1], j = q[2], k = q[3];
  std::array<Eigen::Matrix3d, 4> d;
  d[0] << 0.0, -2.0 * k, 2.0 * j,
          2.0 * k, 0.0, -2.0 * i,
          -2.0 * j, 2.0 * i, 0.0;
  d[1] << 0.0, 2.0 * j, 2.0 * k,
          2.0 * j, -4.0 * i, -2.0 * r,
          2.0 * k, 2.0 * r, -4.0 * i;
  d[2] << -4.0 * j, 2.0 * i, 2.0 * r,
          2.0 * i, 0.0, 2.0 * k,
          -2.0 * r, 2.0 * k, -4.0 * j;
  d[3] << -4.0 * k, -2.0 * r, 2.0 * i,
          2.0 * r, -4.0 * k, 2.0 * j,
          2.0 * i, 2.0 * j, 0.0;
  return d;
}

LossResult mean_angle_loss(const Eigen::Vector4d& q, const Eigen::Vector4d& q_hat) {
  const double d = q.dot(q_hat);
  LossResult out;
  out.value = std::acos(std::clamp(d, -1.0, 1.0));
  if (std::abs(d) >= 1.0 - 1e-9) {
    out.gradient_singular = true;
    return out;
  }
  out.gradient = -q / std::sqrt(1.0 - d * d);
  return out;
}

LossResult mean_angle_loss(const UnitQuaternion& q, const UnitQuaternion& q_hat) {
  return mean_angle_loss(q.coeffs(), q_hat.coeffs());
}

LossResult surrogate_loss(const Eigen::Vector4d& q, const Eigen::Vector4d& q_hat) {
  LossResult out;
  // Clamp the rounding noise below zero for identical unit inputs.
  out.value = std::max(0.0, 1.0 - q.dot(q_hat));
  out.gradient = -q;
  return out;
}

LossResult surrogate_loss(const UnitQuaternion& q, const UnitQuaternion& q_hat) {
  return surrogate_loss(q.coeffs(), q_hat.coeffs());
}

LossResult shapematch_loss(const Eigen::Vector4d& q, const Eigen::Vector4d& q_hat,
                           const PointCloud& points) {
  if (points.empty()) throw EmptyMesh("ShapeMatch loss needs at least one point");
  const Eigen::Matrix3d pred = rotation_matrix_raw(q_hat);
  const Eigen::Matrix3d truth = rotation_matrix_raw(q);
  const auto partials = rotation_matrix_partials(q_hat);

  std::vector<Eigen::Vector3d> target;
  target.reserve(points.size());
  for (const auto& x : points.points) target.push_back(truth * x);

  LossResult out;
  for (const auto& x1 : points.points) {
    const Eigen::Vector3d a = pred * x1;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    for (std::size_t n = 0; n < target.size(); ++n) {
      const double d2 = (a - target[n]).squaredNorm();
      if (d2 < best) {
        best = d2;
        best_idx = n;
      }
    }
    const Eigen::Vector3d e = a - target[best_idx];
    out.value += best;
    for (int c = 0; c < 4; ++c) out.gradient[c] += 2.0 * e.dot(partials[c] * x1);
  }
  const double scale = 1.0 / (2.0 * static_cast<double>(points.size()));
  out.value *= scale;
  out.gradient *= scale;
  return out;
}

LossResult shapematch_loss(const UnitQuaternion& q, const UnitQuaternion& q_hat,
                           const PointCloud& points) {
  return shapematch_loss(q.coeffs(), q_hat.coeffs(), points);
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "mean" || name == "surrogate") return LossKind::Mean;
  if (name == "shapematch") return LossKind::ShapeMatch;
  if (name == "hybrid") return LossKind::Hybrid;
  throw ConfigError("unknown loss '" + name + "' (expected mean, shapematch or hybrid)");
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Mean: return "mean";
    case LossKind::ShapeMatch: return "shapematch";
    case LossKind::Hybrid: return "hybrid";
  }
  return "?";
}

LossResult hybrid_loss(const Eigen::Vector4d& q, const Eigen::Vector4d& q_hat,
                       const PointCloud& points, int epoch) {
  if (epoch < 0) throw ConfigError("epoch must be non-negative");
  return epoch == 0 ? surrogate_loss(q, q_hat) : shapematch_loss(q, q_hat, points);
}

LossResult hybrid_loss(const UnitQuaternion& q, const UnitQuaternion& q_hat,
                       const PointCloud& points, int epoch) {
  return hybrid_loss(q.coeffs(), q_hat.coeffs(), points, epoch);
}

std::string active_loss_name(LossKind kind, int epoch) {
  switch (kind) {
    case LossKind::Mean: return "surrogate";
    case LossKind::ShapeMatch: return "shapematch";
    case LossKind::Hybrid: return epoch == 0 ? "surrogate" : "shapematch";
  }
  return "?";
}

LossResult training_loss(LossKind kind, const Eigen::Vector4d& q, const Eigen::Vector4d& q_hat,
                         const PointCloud& points, int epoch) {
  switch (kind) {
    case LossKind::Mean: return surrogate_loss(q, q_hat);
    case LossKind::ShapeMatch: return shapematch_loss(q, q_hat, points);
    case LossKind::Hybrid: return hybrid_loss(q, q_hat, points, epoch);
  }
  return {};
}

}  // namespace reorient
