#pragma once

#include <cstddef>
#include <string>

#include <Eigen/Core>

#include "reorient/depth_image.hpp"
#include "reorient/estimator.hpp"
#include "reorient/mesh.hpp"

namespace reorient {

struct IcpConfig {
  int max_iter = 50;
  /// Stop once the mean squared residual improves by less than this.
  double tol = 1e-8;
  /// Clouds larger than this are subsampled with a fixed stride before the
  /// brute-force correspondence search.
  std::size_t max_points = 500;
};

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

/**
 * Least-squares rigid transform with dst[n] ~ R src[n] + t (Kabsch / SVD,
 * reflection-corrected). Throws DegenerateCloud for fewer than three points
 * or collinear input.
 */
RigidTransform kabsch(const std::vector<Eigen::Vector3d>& src, const std::vector<Eigen::Vector3d>& dst);

/// Every k-th point so that at most max_points remain.
PointCloud stride_subsample(const PointCloud& cloud, std::size_t max_points);

/// Point-to-point ICP from the identity after centring both clouds on their
/// centroids. The returned quaternion rotates `source` onto `target`.
RotationEstimate icp_align(const PointCloud& source, const PointCloud& target, const IcpConfig& cfg = {});

/// Back-projects both images to world-frame clouds and aligns them.
RotationEstimate icp_predict(const DepthImage& current, const DepthImage& goal,
                             const CameraModel& cam, const IcpConfig& cfg = {});

class IcpEstimator final : public RotationEstimator {
 public:
  IcpEstimator(CameraModel cam, IcpConfig cfg) : cam_(cam), cfg_(cfg) {}
  RotationEstimate estimate(const DepthImage& current, const DepthImage& goal) override {
    return icp_predict(current, goal, cam_, cfg_);
  }
  std::string name() const override { return "icp"; }

 private:
  CameraModel cam_;
  IcpConfig cfg_;
};

}  // namespace reorient
