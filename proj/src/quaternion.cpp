#include "reorient/quaternion.hpp"

#include <algorithm>
#include <cmath>

#include "reorient/error.hpp"

namespace reorient {

namespace {

constexpr double kZeroNorm = 1e-12;
constexpr double kSlerpLerpBelow = 1e-7;

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

}  // namespace

double Radians::degrees() const { return rad2deg(value); }

UnitQuaternion UnitQuaternion::normalize(const Eigen::Vector4d& raw) {
  const double n = raw.norm();
  if (!(n >= kZeroNorm)) {
    throw ZeroNorm("quaternion norm below 1e-12");
  }
  return UnitQuaternion({raw[0] / n, raw[1] / n, raw[2] / n, raw[3] / n});
}

std::optional<UnitQuaternion> UnitQuaternion::from_unit_components(const std::array<double, 4>& c) {
  const double n2 = c[0] * c[0] + c[1] * c[1] + c[2] * c[2] + c[3] * c[3];
  if (!(std::abs(n2 - 1.0) <= 1e-9)) return std::nullopt;
  return UnitQuaternion(c);
}

UnitQuaternion UnitQuaternion::from_axis_angle(const Eigen::Vector3d& axis, double angle) {
  const double n = axis.norm();
  if (n < kZeroNorm) {
    throw ZeroNorm("rotation axis has zero length");
  }
  const double s = std::sin(angle / 2.0) / n;
  return normalize(std::cos(angle / 2.0), axis.x() * s, axis.y() * s, axis.z() * s);
}

UnitQuaternion UnitQuaternion::from_matrix(const RotationMatrix3& m) {
  // Shepperd's method: pivot on the largest diagonal combination.
  const double tr = m.trace();
  Eigen::Vector4d q;
  if (tr > m(0, 0) && tr > m(1, 1) && tr > m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + tr);
    q = {0.25 * s, (m(2, 1) - m(1, 2)) / s, (m(0, 2) - m(2, 0)) / s, (m(1, 0) - m(0, 1)) / s};
  } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2));
    q = {(m(2, 1) - m(1, 2)) / s, 0.25 * s, (m(0, 1) + m(1, 0)) / s, (m(0, 2) + m(2, 0)) / s};
  } else if (m(1, 1) > m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2));
    q = {(m(0, 2) - m(2, 0)) / s, (m(0, 1) + m(1, 0)) / s, 0.25 * s, (m(1, 2) + m(2, 1)) / s};
  } else {
    const double s = 2.0 * std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1));
    q = {(m(1, 0) - m(0, 1)) / s, (m(0, 2) + m(2, 0)) / s, (m(1, 2) + m(2, 1)) / s, 0.25 * s};
  }
  return canonicalize(normalize(q));
}

UnitQuaternion UnitQuaternion::conjugate() const {
  return UnitQuaternion({c_[0], -c_[1], -c_[2], -c_[3]});
}

UnitQuaternion UnitQuaternion::operator-() const {
  return UnitQuaternion({-c_[0], -c_[1], -c_[2], -c_[3]});
}

UnitQuaternion UnitQuaternion::operator*(const UnitQuaternion& rhs) const {
  const auto& a = c_;
  const auto& b = rhs.c_;
  // Renormalize so long products do not drift off the unit sphere.
  return normalize(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
                   a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
                   a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
                   a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

Eigen::Vector3d UnitQuaternion::rotate(const Eigen::Vector3d& v) const {
  return to_matrix(*this) * v;
}

double dot(const UnitQuaternion& a, const UnitQuaternion& b) {
  return a.r() * b.r() + a.i() * b.i() + a.j() * b.j() + a.k() * b.k();
}

Radians angle_between(const UnitQuaternion& q0, const UnitQuaternion& q1) {
  return {2.0 * std::acos(clamp_unit(std::abs(dot(q0, q1))))};
}

UnitQuaternion rotation_difference(const UnitQuaternion& q0, const UnitQuaternion& q1) {
  return q0 * q1.conjugate();
}

UnitQuaternion slerp(const UnitQuaternion& q0, const UnitQuaternion& q1, double t) {
  Eigen::Vector4d a = q0.coeffs();
  Eigen::Vector4d b = q1.coeffs();
  double d = a.dot(b);
  if (d < 0.0) {
    b = -b;
    d = -d;
  }
  const double half_angle = std::acos(clamp_unit(d));
  if (2.0 * half_angle < kSlerpLerpBelow) {
    return UnitQuaternion::normalize((1.0 - t) * a + t * b);
  }
  const double s = std::sin(half_angle);
  return UnitQuaternion::normalize((std::sin((1.0 - t) * half_angle) / s) * a +
                                   (std::sin(t * half_angle) / s) * b);
}

Radians quat_to_angle(const UnitQuaternion& q) { return {2.0 * std::acos(clamp_unit(q.r()))}; }

Eigen::Vector3d rotation_axis(const UnitQuaternion& q) {
  const double s2 = 1.0 - q.r() * q.r();
  if (s2 < 1e-12) {
    throw UndefinedAxis("rotation axis of the identity is undefined");
  }
  return Eigen::Vector3d(q.i(), q.j(), q.k()).normalized();
}

UnitQuaternion canonicalize(const UnitQuaternion& q) { return q.r() < 0.0 ? -q : q; }

RotationMatrix3 to_matrix(const UnitQuaternion& q) {
  const double r = q.r(), i = q.i(), j = q.j(), k = q.k();
  RotationMatrix3 m;
  m << 1.0 - 2.0 * (j * j + k * k), 2.0 * (i * j - k * r), 2.0 * (i * k + j * r),
      2.0 * (i * j + k * r), 1.0 - 2.0 * (i * i + k * k), 2.0 * (j * k - i * r),
      2.0 * (i * k - j * r), 2.0 * (j * k + i * r), 1.0 - 2.0 * (i * i + j * j);
  return m;
}

UnitQuaternion sample_uniform_so3(Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (;;) {
    Eigen::Vector4d g(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    if (g.norm() >= kZeroNorm) {
      return UnitQuaternion::normalize(g);
    }
  }
}

bool satisfies_constraints(const UnitQuaternion& q, Radians max_angle) {
  const double n2 = q.coeffs().squaredNorm();
  return std::abs(n2 - 1.0) <= 1e-9 && q.r() > 0.0 && q.r() > std::abs(q.i()) &&
         q.r() > std::abs(q.j()) && q.r() > std::abs(q.k()) &&
         q.r() >= std::cos(max_angle.value / 2.0);
}

UnitQuaternion sample_constrained(Rng& rng, Radians max_angle) {
  for (;;) {
    const UnitQuaternion q = canonicalize(sample_uniform_so3(rng));
    if (satisfies_constraints(q, max_angle)) {
      return q;
    }
  }
}

Eigen::Vector3d sample_unit_vector(Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (;;) {
    Eigen::Vector3d g(gauss(rng), gauss(rng), gauss(rng));
    const double n = g.norm();
    if (n >= kZeroNorm) {
      return g / n;
    }
  }
}

}  // namespace reorient
