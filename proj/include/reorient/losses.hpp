#pragma once

#include <array>
#include <string>

#include <Eigen/Core>

#include "reorient/mesh.hpp"
#include "reorient/quaternion.hpp"

namespace reorient {

/// Per-sample loss value and its gradient with respect to the four
/// components of the predicted quaternion.
struct LossResult {
  double value = 0.0;
  Eigen::Vector4d gradient = Eigen::Vector4d::Zero();
  /// Set by mean_angle_loss when <q, q_hat> is within 1e-9 of +-1; the
  /// gradient is zeroed in that case.
  bool gradient_singular = false;
};

/// acos(<q, q_hat>), without an absolute value, so the sign of q_hat matters.
LossResult mean_angle_loss(const Eigen::Vector4d& q, const Eigen::Vector4d& q_hat);
LossResult mean_angle_loss(const UnitQuaternion& q, const UnitQuaternion& q_hat);

/// 1 - <q, q_hat>: same minimizer as the mean angle loss, no arccos.
LossResult surrogate_loss(const Eigen::Vector4d& q, const Eigen::Vector4d& q_hat);
LossResult surrogate_loss(const UnitQuaternion& q, const UnitQuaternion& q_hat);

/**
 * @brief Symmetry-aware point matching loss.
 *
 * value = 1/(2|M|) sum_{x1} min_{x2} |R(q_hat) x1 - R(q) x2|^2.
 * The gradient treats each argmin as fixed (lowest index wins ties) and is
 * taken through the quadratic rotation-matrix formula, so it is also valid
 * for non-unit q_hat.
 */
LossResult shapematch_loss(const Eigen::Vector4d& q, const Eigen::Vector4d& q_hat,
                           const PointCloud& points);
LossResult shapematch_loss(const UnitQuaternion& q, const UnitQuaternion& q_hat,
                           const PointCloud& points);

enum class LossKind { Mean, ShapeMatch, Hybrid };

LossKind parse_loss_kind(const std::string& name);
std::string to_string(LossKind kind);

/// Epoch 0 uses the surrogate, later epochs the ShapeMatch loss.
LossResult hybrid_loss(const Eigen::Vector4d& q, const Eigen::Vector4d& q_hat,
                       const PointCloud& points, int epoch);
LossResult hybrid_loss(const UnitQuaternion& q, const UnitQuaternion& q_hat,
                       const PointCloud& points, int epoch);

/// Name of the loss actually applied at `epoch` ("surrogate" or "shapematch").
std::string active_loss_name(LossKind kind, int epoch);

/// Dispatches on kind; Mean trains on the surrogate.
LossResult training_loss(LossKind kind, const Eigen::Vector4d& q, const Eigen::Vector4d& q_hat,
                         const PointCloud& points, int epoch);

/// R(q) from the quadratic formula, without normalizing q.
Eigen::Matrix3d rotation_matrix_raw(const Eigen::Vector4d& q);
/// Partial derivatives of rotation_matrix_raw with respect to (r, i, j, k).
std::array<Eigen::Matrix3d, 4> rotation_matrix_partials(const Eigen::Vector4d& q);

}  // namespace reorient
