#pragma once

#include <string>
#include <vector>

#include "blurpose/body.hpp"

namespace blurpose {

// One capsule-shaped body part following a straight chain of joints.
struct PartSpec {
  std::string name;
  std::vector<int> chain;    // joints along the part, first to last
  double start_extension;    // meters before the first joint, along the axis
  double tip_extension;      // meters past the last joint, along the axis
  double radius_a;           // cross-section half-widths
  double radius_b;
};

struct JointLimit {
  double max_angle;          // radians, |angle| beyond this is penalized
  bool hinge = false;        // motion restricted to a fixed axis
  Vec3 hinge_axis = Vec3::Zero();
};

// Articulated template body: skeleton, linear shape space, skinned and
// UV-charted mesh, plus the precomputed structures the losses need.
struct BodyModel {
  SkeletonTemplate skeleton;
  MatX shape_basis;                               // shape_dim x joint_count
  SkinnedMesh mesh;                               // rest pose at beta = 0
  std::vector<std::vector<Vec3>> shape_dirs;      // per shape coefficient, per vertex
  std::vector<std::vector<Vec3>> joint_shape_dirs;  // d(rest joint position)/d(beta_b)
  std::vector<JointLimit> joint_limits;
  std::vector<PartSpec> parts;
  std::vector<int> face_part;
  std::vector<std::vector<int>> adjacency;
  std::vector<int> texel_owner;
  std::vector<Vec3> rest_normals;

  int joint_count() const { return skeleton.joint_count(); }
  int shape_dim() const { return static_cast<int>(shape_basis.rows()); }
  int vertex_count() const { return mesh.vertex_count(); }
  int face_count() const { return mesh.face_count(); }
  int texture_height() const { return mesh.texture.height; }
  int texture_width() const { return mesh.texture.width; }

  BodyShape shape(const VecX& beta) const { return {beta, shape_basis}; }
  std::vector<Vec3> rest_vertices(const VecX& beta) const;
  std::vector<Vec3> rest_joints(const VecX& beta) const;
};

struct BodyBuildOptions {
  int rings = 8;      // rings per part
  int segments = 12;  // vertices around each ring
  int texture_size = 64;
};

// Builds a body from a skeleton and part list. The mesh, its shape
// directions, UV atlas, weights and precomputed adjacency are derived here.
BodyModel build_body(SkeletonTemplate skeleton, MatX shape_basis, std::vector<PartSpec> parts,
                     std::vector<JointLimit> limits, const BodyBuildOptions& options);

// The built-in 16-joint A-pose humanoid with 4 shape coefficients
// (global scale, torso, arms, legs).
BodyModel make_humanoid(const BodyBuildOptions& options = {});

// A two-joint single-capsule body used by the gradient checker.
BodyModel make_tiny_body();

enum HumanoidJoint : int {
  kPelvis = 0, kSpine, kNeck, kHead,
  kLeftShoulder, kLeftElbow, kLeftWrist,
  kRightShoulder, kRightElbow, kRightWrist,
  kLeftHip, kLeftKnee, kLeftAnkle,
  kRightHip, kRightKnee, kRightAnkle,
  kHumanoidJointCount
};

}  // namespace blurpose
