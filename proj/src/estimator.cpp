#include "reorient/estimator.hpp"

#include <cmath>

namespace reorient {

RotationEstimate oracle_predict(const UnitQuaternion& truth, const OracleNoise& noise, Rng& rng) {
  RotationEstimate out;
  out.q_hat = canonicalize(truth);
  if (noise.ratio == 0.0) return out;
  const double true_angle = quat_to_angle(out.q_hat).value;
  const double g = std::normal_distribution<double>(0.0, 1.0)(rng);
  const Eigen::Vector3d axis = sample_unit_vector(rng);
  const double angle = noise.ratio * true_angle * std::abs(g);
  out.q_hat = canonicalize(UnitQuaternion::from_axis_angle(axis, angle) * out.q_hat);
  return out;
}

}  // namespace reorient
