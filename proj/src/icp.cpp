#include "reorient/icp.hpp"

#include <limits>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "reorient/error.hpp"
#include "reorient/render.hpp"

namespace reorient {

namespace {

Eigen::Vector3d centroid(const std::vector<Eigen::Vector3d>& pts) {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& p : pts) c += p;
  return c / static_cast<double>(pts.size());
}

}  // namespace

RigidTransform kabsch(const std::vector<Eigen::Vector3d>& src, const std::vector<Eigen::Vector3d>& dst) {
  if (src.size() != dst.size()) throw DegenerateCloud("correspondence sets differ in size");
  if (src.size() < 3) throw DegenerateCloud("need at least three correspondences");
  const Eigen::Vector3d cs = centroid(src);
  const Eigen::Vector3d cd = centroid(dst);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (std::size_t n = 0; n < src.size(); ++n) {
    const Eigen::Vector3d a = src[n] - cs;
    cov += (dst[n] - cd) * a.transpose();
    scatter += a * a.transpose();
  }
  const Eigen::JacobiSVD<Eigen::Matrix3d> spread(scatter);
  const auto sv = spread.singularValues();
  if (!(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0]) {
    throw DegenerateCloud("source points are collinear or coincident");
  }
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d fix = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) fix(2, 2) = -1.0;
  RigidTransform out;
  out.rotation = svd.matrixU() * fix * svd.matrixV().transpose();
  out.translation = cd - out.rotation * cs;
  return out;
}

PointCloud stride_subsample(const PointCloud& cloud, std::size_t max_points) {
  if (max_points == 0 || cloud.size() <= max_points) return cloud;
  PointCloud out;
  out.points.reserve(max_points);
  for (std::size_t k = 0; k < max_points; ++k) {
    out.points.push_back(cloud.points[k * cloud.size() / max_points]);
  }
  return out;
}

RotationEstimate icp_align(const PointCloud& source, const PointCloud& target, const IcpConfig& cfg) {
  if (source.size() < 3 || target.size() < 3) {
    throw DegenerateCloud("ICP needs at least three points per cloud");
  }
  const PointCloud src_sub = stride_subsample(source, cfg.max_points);
  const PointCloud dst_sub = stride_subsample(target, cfg.max_points);
  const Eigen::Vector3d cs = centroid(src_sub.points);
  const Eigen::Vector3d cd = centroid(dst_sub.points);
  std::vector<Eigen::Vector3d> src, dst;
  src.reserve(src_sub.size());
  dst.reserve(dst_sub.size());
  for (const auto& p : src_sub.points) src.push_back(p - cs);
  for (const auto& p : dst_sub.points) dst.push_back(p - cd);

  RigidTransform total;
  std::vector<Eigen::Vector3d> moved(src);
  std::vector<Eigen::Vector3d> matched(src.size());
  double prev_mse = std::numeric_limits<double>::infinity();
  RotationEstimate out;
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    double mse = 0.0;
    for (std::size_t n = 0; n < moved.size(); ++n) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_idx = 0;
      for (std::size_t m = 0; m < dst.size(); ++m) {
        const double d2 = (moved[n] - dst[m]).squaredNorm();
        if (d2 < best) {
          best = d2;
          best_idx = m;
        }
      }
      matched[n] = dst[best_idx];
      mse += best;
    }
    mse /= static_cast<double>(moved.size());
    out.iterations = iter + 1;
    out.residual = mse;
    if (prev_mse - mse < cfg.tol) break;
    prev_mse = mse;

    const RigidTransform step = kabsch(moved, matched);
    total.rotation = step.rotation * total.rotation;
    total.translation = step.rotation * total.translation + step.translation;
    for (std::size_t n = 0; n < src.size(); ++n) {
      moved[n] = total.rotation * src[n] + total.translation;
    }
  }
  out.q_hat = UnitQuaternion::from_matrix(total.rotation);
  return out;
}

RotationEstimate icp_predict(const DepthImage& current, const DepthImage& goal,
                             const CameraModel& cam, const IcpConfig& cfg) {
  const PointCloud src = camera_to_world(to_point_cloud(current, cam), cam);
  const PointCloud dst = camera_to_world(to_point_cloud(goal, cam), cam);
  return icp_align(src, dst, cfg);
}

}  // namespace reorient
