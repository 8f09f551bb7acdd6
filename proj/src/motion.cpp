#include "blurpose/motion.hpp"

#include <cmath>

#include <fmt/format.h>

#include "blurpose/rotation.hpp"

namespace blurpose {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

MotionCoeffs::MotionCoeffs(int degree_, int joints_) : degree(degree_), joints(joints_) {
  if (degree < 1) throw DataError("polynomial degree must be at least 1");
  if (joints < 1) throw DataError("motion needs at least one joint");
  coeffs = MatX::Zero(rows(), cols());
}

void MotionCoeffs::validate() const {
  if (degree < 1 || joints < 1) throw DataError("invalid motion dimensions");
  if (coeffs.rows() != rows() || coeffs.cols() != cols())
    throw DataError(fmt::format("motion coefficients must be {}x{}, got {}x{}", rows(), cols(),
                                coeffs.rows(), coeffs.cols()));
  if (!coeffs.allFinite()) throw DataError("motion coefficients are not finite");
}

double TimeGrid::boundary_t() const {
  if (count < 2) throw DataError("boundary restriction needs at least two sub-frames");
  return t(count + tau);
}

MatX channel_values(const MotionCoeffs& c, double t) {
  MatX out(MotionCoeffs::kChannels, c.cols());
  for (int col = 0; col < c.cols(); ++col) {
    for (int ch = 0; ch < MotionCoeffs::kChannels; ++ch) {
      double acc = 0.0;
      for (int k = c.degree; k >= 0; --k) acc = acc * t + c.at(ch, k, col);
      out(ch, col) = acc;
    }
  }
  return out;
}

MatX channel_derivatives(const MotionCoeffs& c, double t) {
  MatX out(MotionCoeffs::kChannels, c.cols());
  for (int col = 0; col < c.cols(); ++col) {
    for (int ch = 0; ch < MotionCoeffs::kChannels; ++ch) {
      double acc = 0.0;
      for (int k = c.degree; k >= 1; --k) acc = acc * t + k * c.at(ch, k, col);
      out(ch, col) = acc;
    }
  }
  return out;
}

PoseSample pose_from_channels(const MatX& channels, int joints) {
  PoseSample pose;
  pose.joint_rotations.resize(joints);
  for (int k = 0; k < joints; ++k)
    pose.joint_rotations[k] =
        axis_angle_to_matrix(Vec3(channels(0, k), channels(1, k), channels(2, k)), channels(3, k));
  const Vec3 dir(channels(0, joints), channels(1, joints), channels(2, joints));
  pose.root_translation = dir / (dir.norm() + kAxisEpsilon) * channels(3, joints);
  const int rc = joints + 1;
  pose.root_rotation =
      axis_angle_to_matrix(Vec3(channels(0, rc), channels(1, rc), channels(2, rc)), channels(3, rc));
  return pose;
}

MatX pose_from_channels_backward(const MatX& channels, int joints, const PoseAdjoint& grad) {
  MatX g = MatX::Zero(MotionCoeffs::kChannels, joints + 2);
  auto rot_back = [&](int col, const Mat3& gr) {
    Vec3 ga = Vec3::Zero();
    double gt = 0.0;
    axis_angle_to_matrix_backward(Vec3(channels(0, col), channels(1, col), channels(2, col)),
                                  channels(3, col), gr, ga, gt);
    g(0, col) += ga.x();
    g(1, col) += ga.y();
    g(2, col) += ga.z();
    g(3, col) += gt;
  };
  for (int k = 0; k < joints; ++k) rot_back(k, grad.joint_rotations[k]);
  rot_back(joints + 1, grad.root_rotation);

  const Vec3 dir(channels(0, joints), channels(1, joints), channels(2, joints));
  const double dist = channels(3, joints);
  const double r = dir.norm();
  const double denom = r + kAxisEpsilon;
  const Vec3 n = dir / denom;
  g(3, joints) += n.dot(grad.root_translation);
  const Vec3 gn = dist * grad.root_translation;
  Vec3 gd = gn / denom;
  if (r > 0.0) gd -= dir * (dir.dot(gn) / (r * denom * denom));
  g(0, joints) += gd.x();
  g(1, joints) += gd.y();
  g(2, joints) += gd.z();
  return g;
}

PoseSample sample_at(const MotionCoeffs& c, double i, const TimeGrid& grid) {
  return pose_from_channels(channel_values(c, grid.t(i)), c.joints);
}

MotionCoeffs init_from_pose(const PoseSample& pose0, int degree, int joints) {
  if (static_cast<int>(pose0.joint_rotations.size()) != joints)
    throw DataError("pose joint count does not match");
  MotionCoeffs c(degree, joints);
  auto put_rotation = [&](int col, const Mat3& r) {
    const AxisAngle aa = matrix_to_axis_angle(r);
    for (int ch = 0; ch < 3; ++ch) c.at(ch, 0, col) = aa.axis[ch];
    c.at(3, 0, col) = aa.angle;
  };
  for (int k = 0; k < joints; ++k) put_rotation(k, pose0.joint_rotations[k]);
  put_rotation(c.rotation_column(), pose0.root_rotation);
  const double dist = pose0.root_translation.norm();
  if (dist > 0.0) {
    const Vec3 dir = pose0.root_translation / dist;
    for (int ch = 0; ch < 3; ++ch) c.at(ch, 0, c.translation_column()) = dir[ch];
    c.at(3, 0, c.translation_column()) = dist;
  }
  return c;
}

MotionCoeffs reverse(const MotionCoeffs& c) {
  MotionCoeffs out(c.degree, c.joints);
  for (int col = 0; col < c.cols(); ++col)
    for (int ch = 0; ch < MotionCoeffs::kChannels; ++ch)
      for (int m = 0; m <= c.degree; ++m) {
        double acc = 0.0;
        for (int k = m; k <= c.degree; ++k) acc += c.at(ch, k, col) * binomial(k, m);
        out.at(ch, m, col) = (m % 2 == 0) ? acc : -acc;
      }
  return out;
}

MotionCoeffs taylor_shift(const MotionCoeffs& c, double shift) {
  MotionCoeffs out(c.degree, c.joints);
  for (int col = 0; col < c.cols(); ++col)
    for (int ch = 0; ch < MotionCoeffs::kChannels; ++ch)
      for (int m = 0; m <= c.degree; ++m) {
        double acc = 0.0;
        for (int k = m; k <= c.degree; ++k)
          acc += c.at(ch, k, col) * binomial(k, m) * std::pow(shift, k - m);
        out.at(ch, m, col) = acc;
      }
  return out;
}

double boundary_residual(const MotionCoeffs& c_a, const MotionCoeffs& c_b, const TimeGrid& grid) {
  if (c_a.degree != c_b.degree || c_a.joints != c_b.joints)
    throw DataError("boundary residual needs matching motion dimensions");
  const double te = grid.boundary_t();
  const MatX va = channel_values(c_a, te), vb = channel_values(c_b, 0.0);
  const MatX da = channel_derivatives(c_a, te), db = channel_derivatives(c_b, 0.0);
  return (va - vb).cwiseAbs().sum() + (da - db).cwiseAbs().sum();
}

void boundary_residual_backward(const MotionCoeffs& c_a, const MotionCoeffs& c_b,
                                const TimeGrid& grid, double weight, MatX& grad_a, MatX& grad_b) {
  const double te = grid.boundary_t();
  const MatX va = channel_values(c_a, te), vb = channel_values(c_b, 0.0);
  const MatX da = channel_derivatives(c_a, te), db = channel_derivatives(c_b, 0.0);
  for (int col = 0; col < c_a.cols(); ++col) {
    for (int ch = 0; ch < MotionCoeffs::kChannels; ++ch) {
      const double sv = weight * sign(va(ch, col) - vb(ch, col));
      const double sd = weight * sign(da(ch, col) - db(ch, col));
      double tp = 1.0;  // te^k
      for (int k = 0; k <= c_a.degree; ++k) {
        grad_a(c_a.row(ch, k), col) += sv * tp;
        if (k >= 1) grad_a(c_a.row(ch, k), col) += sd * k * std::pow(te, k - 1);
        tp *= te;
      }
      grad_b(c_b.row(ch, 0), col) -= sv;
      grad_b(c_b.row(ch, 1), col) -= sd;
    }
  }
}

}  // namespace blurpose
