#pragma once

#include <functional>
#include <memory>
#include <string>

#include "reorient/depth_image.hpp"
#include "reorient/quaternion.hpp"

namespace reorient {

struct RotationEstimate {
  /// Canonical (q_r >= 0) prediction of the rotation taking the current
  /// view onto the goal view.
  UnitQuaternion q_hat;
  int iterations = 0;
  double residual = 0.0;
  /// Raw network output collapsed to zero and the identity was returned.
  bool fallback = false;
};

/// f(I_current, I_goal) -> q_hat. Only images cross this boundary.
class RotationEstimator {
 public:
  virtual ~RotationEstimator() = default;
  virtual RotationEstimate estimate(const DepthImage& current, const DepthImage& goal) = 0;
  virtual std::string name() const = 0;
};

struct OracleNoise {
  /// Perturbation angle is ratio * true_angle * |g| with g ~ N(0, 1).
  double ratio = 0.0;
};

/// Ground truth perturbed about a uniformly random axis; the error grows in
/// proportion to the true rotation angle.
RotationEstimate oracle_predict(const UnitQuaternion& truth, const OracleNoise& noise, Rng& rng);

/**
 * Simulation-only estimator that reads the true relative rotation from a
 * callback (typically the simulator's state) instead of the images.
 */
class OracleEstimator final : public RotationEstimator {
 public:
  OracleEstimator(std::function<UnitQuaternion()> truth, OracleNoise noise, std::uint64_t seed)
      : truth_(std::move(truth)), noise_(noise), rng_(seed) {}

  RotationEstimate estimate(const DepthImage&, const DepthImage&) override {
    return oracle_predict(truth_(), noise_, rng_);
  }
  std::string name() const override { return "oracle"; }

 private:
  std::function<UnitQuaternion()> truth_;
  OracleNoise noise_;
  Rng rng_;
};

/// Always predicts no rotation.
class IdentityEstimator final : public RotationEstimator {
 public:
  RotationEstimate estimate(const DepthImage&, const DepthImage&) override { return {}; }
  std::string name() const override { return "identity"; }
};

}  // namespace reorient
