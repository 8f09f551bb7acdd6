#include "blurpose/rotation.hpp"

#include <cmath>
#include <numbers>

namespace blurpose {

Mat3 skew(const Vec3& v) {
  Mat3 k;
  k << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return k;
}

Mat3 axis_angle_to_matrix(const Vec3& axis, double angle) {
  const Vec3 n = axis / (axis.norm() + kAxisEpsilon);
  const Mat3 k = skew(n);
  return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * (k * k);
}

void axis_angle_to_matrix_backward(const Vec3& axis, double angle, const Mat3& grad_rotation,
                                   Vec3& grad_axis, double& grad_angle) {
  const double r = axis.norm();
  const double denom = r + kAxisEpsilon;
  const Vec3 n = axis / denom;
  const Mat3 k = skew(n);
  const double s = std::sin(angle);
  const double c = std::cos(angle);

  grad_angle += (grad_rotation.array() * (c * k + s * (k * k)).array()).sum();

  Vec3 grad_n;
  for (int m = 0; m < 3; ++m) {
    const Mat3 km = skew(Vec3::Unit(m));
    const Mat3 dr = s * km + (1.0 - c) * (km * k + k * km);
    grad_n[m] = (grad_rotation.array() * dr.array()).sum();
  }
  // n = a / (|a| + eps)
  Vec3 ga = grad_n / denom;
  if (r > 0.0) ga -= axis * (axis.dot(grad_n) / (r * denom * denom));
  grad_axis += ga;
}

AxisAngle matrix_to_axis_angle(const Mat3& rotation) {
  Eigen::AngleAxisd aa(rotation);
  AxisAngle out;
  double angle = aa.angle();
  Vec3 axis = aa.axis();
  if (angle > std::numbers::pi) {
    angle = 2.0 * std::numbers::pi - angle;
    axis = -axis;
  }
  if (angle < 1e-14) return out;
  if (std::numbers::pi - angle < 1e-12) {
    const Vec3 neg = -axis;
    if (std::lexicographical_compare(axis.data(), axis.data() + 3, neg.data(), neg.data() + 3))
      axis = neg;
  }
  out.axis = axis.normalized();
  out.angle = angle;
  return out;
}

bool is_rotation(const Mat3& m, double tol) {
  return (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(m.determinant() - 1.0) <= tol;
}

}  // namespace blurpose
