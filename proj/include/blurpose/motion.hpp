#pragma once

#include "blurpose/body.hpp"
#include "blurpose/types.hpp"

namespace blurpose {

// Polynomial sub-frame motion. Column layout: joints 0..J-1, then the global
// translation column, then the global rotation column. Each column holds four
// channels (axis x, y, z, angle; for translation: direction x, y, z,
// distance), and each channel stores degree + 1 coefficients, constant term
// first. Row index = channel * (degree + 1) + power.
struct MotionCoeffs {
  int degree = 1;
  int joints = 1;
  MatX coeffs;

  MotionCoeffs() = default;
  MotionCoeffs(int degree, int joints);

  static constexpr int kChannels = 4;
  int rows() const { return kChannels * (degree + 1); }
  int cols() const { return joints + 2; }
  int translation_column() const { return joints; }
  int rotation_column() const { return joints + 1; }
  int row(int channel, int power) const { return channel * (degree + 1) + power; }

  double& at(int channel, int power, int column) { return coeffs(row(channel, power), column); }
  double at(int channel, int power, int column) const { return coeffs(row(channel, power), column); }

  void validate() const;
  bool operator==(const MotionCoeffs& o) const {
    return degree == o.degree && joints == o.joints && coeffs == o.coeffs;
  }
};

// Maps sub-frame timestamps i in [1, N] (real-valued allowed) to normalized
// time t = (i - 1) / (N - 1); t = 0 for N = 1. tau is the exposure gap
// between consecutive frames in sub-frame units.
struct TimeGrid {
  int count = 8;
  double tau = 0.0;

  double t(double i) const { return count > 1 ? (i - 1.0) / (count - 1.0) : 0.0; }
  // Normalized time of the frame boundary N + tau.
  double boundary_t() const;
};

// Channel values (4 x (J+2)) at normalized time t, by Horner's rule.
MatX channel_values(const MotionCoeffs& c, double t);
// First derivatives of the channels with respect to normalized time.
MatX channel_derivatives(const MotionCoeffs& c, double t);

// Converts channel values to a pose (axis normalization with kAxisEpsilon).
PoseSample pose_from_channels(const MatX& channels, int joints);

struct PoseAdjoint {
  std::vector<Mat3> joint_rotations;
  Mat3 root_rotation = Mat3::Zero();
  Vec3 root_translation = Vec3::Zero();
};

// Adjoint of pose_from_channels.
MatX pose_from_channels_backward(const MatX& channels, int joints, const PoseAdjoint& grad);

PoseSample sample_at(const MotionCoeffs& c, double i, const TimeGrid& grid);

// Constant trajectory through pose0: constant terms from the axis-angle /
// direction-distance factorization, every other coefficient zero.
MotionCoeffs init_from_pose(const PoseSample& pose0, int degree, int joints);

// Time reversal t -> 1 - t of every channel.
MotionCoeffs reverse(const MotionCoeffs& c);

// Re-expansion so that the result at t equals the input at t + shift.
MotionCoeffs taylor_shift(const MotionCoeffs& c, double shift);

// L1 mismatch of channel values and first derivatives between c_a at
// timestamp N + tau and c_b at timestamp 1.
double boundary_residual(const MotionCoeffs& c_a, const MotionCoeffs& c_b, const TimeGrid& grid);

// Subgradient of boundary_residual, accumulated (scaled by weight).
void boundary_residual_backward(const MotionCoeffs& c_a, const MotionCoeffs& c_b,
                                const TimeGrid& grid, double weight, MatX& grad_a, MatX& grad_b);

}  // namespace blurpose
