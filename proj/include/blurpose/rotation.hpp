#pragma once

#include "blurpose/types.hpp"

namespace blurpose {

// Axis regularizer used when normalizing a raw (polynomial) axis channel.
inline constexpr double kAxisEpsilon = 1e-8;

// Skew-symmetric cross-product matrix of v.
Mat3 skew(const Vec3& v);

// Rotation by `angle` about axis / (|axis| + kAxisEpsilon). A zero axis gives
// the identity for any angle.
Mat3 axis_angle_to_matrix(const Vec3& axis, double angle);

// Adjoint of axis_angle_to_matrix: accumulates d/d(axis) and d/d(angle) of
// <grad_rotation, R(axis, angle)> into grad_axis / grad_angle.
void axis_angle_to_matrix_backward(const Vec3& axis, double angle, const Mat3& grad_rotation,
                                   Vec3& grad_axis, double& grad_angle);

struct AxisAngle {
  Vec3 axis = Vec3::Zero();  // unit, or zero for the identity
  double angle = 0.0;        // in [0, pi]
};

// Inverse of axis_angle_to_matrix for proper rotations. The identity maps to a
// zero axis and zero angle. At angle pi, where axis and -axis describe the same
// rotation, the lexicographically larger of the two is returned.
AxisAngle matrix_to_axis_angle(const Mat3& rotation);

bool is_rotation(const Mat3& m, double tol = 1e-6);

}  // namespace blurpose
