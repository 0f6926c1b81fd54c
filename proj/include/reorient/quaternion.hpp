#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>

#include <Eigen/Core>

namespace reorient {

/// Seeded random source shared by every sampling routine.
using Rng = std::mt19937_64;

/// Rotation angle in radians.
struct Radians {
  double value = 0.0;
  double degrees() const;
};

using RotationMatrix3 = Eigen::Matrix3d;

/**
 * @brief Rotation stored as a unit quaternion (q_r, q_i, q_j, q_k).
 *
 * Instances are only produced by normalizing a raw 4-vector or by the
 * algebra below, so the norm is 1 up to rounding.
 */
class UnitQuaternion {
 public:
  UnitQuaternion() = default;

  static UnitQuaternion identity() { return {}; }

  /// Throws ZeroNorm if the raw vector is (numerically) zero.
  static UnitQuaternion normalize(const Eigen::Vector4d& raw);
  static UnitQuaternion normalize(double r, double i, double j, double k) {
    return normalize(Eigen::Vector4d(r, i, j, k));
  }

  /// Adopts components that are already unit norm (within 1e-9) without
  /// renormalizing, so stored values round-trip bit-exactly.
  static std::optional<UnitQuaternion> from_unit_components(const std::array<double, 4>& c);

  /// Rotation of `angle` radians about `axis` (axis need not be unit length).
  static UnitQuaternion from_axis_angle(const Eigen::Vector3d& axis, double angle);

  /// Nearest unit quaternion for a proper rotation matrix (canonical sign).
  static UnitQuaternion from_matrix(const RotationMatrix3& m);

  double r() const { return c_[0]; }
  double i() const { return c_[1]; }
  double j() const { return c_[2]; }
  double k() const { return c_[3]; }

  /// Components in (q_r, q_i, q_j, q_k) order.
  Eigen::Vector4d coeffs() const { return Eigen::Vector4d(c_[0], c_[1], c_[2], c_[3]); }
  std::array<double, 4> to_array() const { return {c_[0], c_[1], c_[2], c_[3]}; }

  UnitQuaternion conjugate() const;
  UnitQuaternion operator-() const;

  /// Hamilton product; to_matrix(a * b) = to_matrix(a) * to_matrix(b).
  UnitQuaternion operator*(const UnitQuaternion& rhs) const;

  Eigen::Vector3d rotate(const Eigen::Vector3d& v) const;

  friend bool operator==(const UnitQuaternion&, const UnitQuaternion&) = default;

 private:
  explicit UnitQuaternion(const std::array<double, 4>& c) : c_(c) {}

  std::array<double, 4> c_{1.0, 0.0, 0.0, 0.0};
};

double dot(const UnitQuaternion& a, const UnitQuaternion& b);

/// Rotation angle between two orientations, 2 acos |<q0, q1>|, in [0, pi].
Radians angle_between(const UnitQuaternion& q0, const UnitQuaternion& q1);

/// q0 * conj(q1): the rotation that takes q1 onto q0.
UnitQuaternion rotation_difference(const UnitQuaternion& q0, const UnitQuaternion& q1);

/// Shortest-arc spherical interpolation with a normalized-lerp fallback for
/// nearly coincident inputs.
UnitQuaternion slerp(const UnitQuaternion& q0, const UnitQuaternion& q1, double t);

/// 2 acos(q_r); in [0, pi] for canonical quaternions.
Radians quat_to_angle(const UnitQuaternion& q);

/// Unit rotation axis; throws UndefinedAxis for (near) identity input.
Eigen::Vector3d rotation_axis(const UnitQuaternion& q);

/// Representative with q_r >= 0.
UnitQuaternion canonicalize(const UnitQuaternion& q);

RotationMatrix3 to_matrix(const UnitQuaternion& q);

/// Haar-uniform rotation from a normalized Gaussian 4-vector.
UnitQuaternion sample_uniform_so3(Rng& rng);

/// Unit-norm, q_r > 0, q_r > |q_i|, |q_j|, |q_k| and q_r >= cos(max_angle / 2).
bool satisfies_constraints(const UnitQuaternion& q, Radians max_angle);

/// Rejection sampler over sample_uniform_so3 for the constraint set above.
UnitQuaternion sample_constrained(Rng& rng, Radians max_angle);

/// Uniformly distributed unit vector.
Eigen::Vector3d sample_unit_vector(Rng& rng);

inline constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Default bound on sampled relative rotations (pi / 6).
inline constexpr Radians kMaxRelativeAngle{kPi / 6.0};

}  // namespace reorient
