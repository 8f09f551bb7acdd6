#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blurpose/types.hpp"

namespace blurpose {

inline constexpr int kNoParent = -1;

// Joint hierarchy with rest-pose offsets. Joints are stored in topological
// order: joint 0 is the root and parent[k] < k for every other joint.
struct SkeletonTemplate {
  std::vector<int> parent;
  std::vector<Vec3> rest_offsets;  // meters, relative to the parent joint
  std::vector<std::string> names;

  int joint_count() const { return static_cast<int>(parent.size()); }
  void validate() const;
};

// Rest-pose joint positions: cumulative sums of the offsets along the tree.
std::vector<Vec3> rest_joint_positions(const SkeletonTemplate& skeleton);

// Per-joint bone-length scaling: offset_k *= 1 + sum_b beta_b * basis(b, k).
struct BodyShape {
  VecX beta;
  MatX basis;  // shape_dim x joint_count

  int dim() const { return static_cast<int>(beta.size()); }
  // Bone scale factor 1 + sum_b beta_b * basis(b, joint).
  double factor(int joint) const;
};

// Bound on |beta_b| inside which the built-in bases keep every bone length
// strictly positive.
inline constexpr double kShapeBound = 0.5;
bool in_admissible_box(const VecX& beta, double bound = kShapeBound);

// Scales the rest offsets. Throws DataError naming the joint when a bone
// would get a non-positive length.
SkeletonTemplate apply_shape(const SkeletonTemplate& skeleton, const BodyShape& shape);

struct SkinnedMesh {
  std::vector<Vec3> vertices;  // rest pose, meters
  std::vector<std::array<int, 3>> faces;
  std::vector<Vec2> uv;  // [0,1]^2, v measured downward from the top texel row
  MatX weights;          // vertex_count x joint_count, rows sum to one
  Image texture;         // H_T x W_T x 3 in [0,1]

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int face_count() const { return static_cast<int>(faces.size()); }
  void validate(int joint_count) const;
};

struct PoseSample {
  std::vector<Mat3> joint_rotations;  // local rotation per joint
  Mat3 root_rotation = Mat3::Identity();
  Vec3 root_translation = Vec3::Zero();

  static PoseSample identity(int joint_count);
  void validate(double tol = 1e-6) const;
};

// World transform per joint: rotation is the accumulated joint frame and
// translation the joint's world position.
struct JointState {
  std::vector<Vec3> positions;
  std::vector<RigidTransform> transforms;
};

JointState forward_kinematics(const SkeletonTemplate& skeleton, const PoseSample& pose);

struct PoseGradient {
  std::vector<Mat3> joint_rotations;
  Mat3 root_rotation = Mat3::Zero();
  Vec3 root_translation = Vec3::Zero();
  std::vector<Vec3> rest_offsets;

  explicit PoseGradient(int joint_count = 0)
      : joint_rotations(joint_count, Mat3::Zero()), rest_offsets(joint_count, Vec3::Zero()) {}
};

// Adjoint of forward_kinematics. grad_rotations / grad_positions are the
// adjoints of the world joint frames and positions.
PoseGradient forward_kinematics_backward(const SkeletonTemplate& skeleton, const PoseSample& pose,
                                         const JointState& state,
                                         std::span<const Mat3> grad_rotations,
                                         std::span<const Vec3> grad_positions);

// Transforms mapping rest-space points to posed space for each joint:
// x -> R_k (x - rest_k) + p_k.
std::vector<RigidTransform> skinning_transforms(const JointState& state,
                                                std::span<const Vec3> rest_positions);

std::vector<Vec3> skin(std::span<const Vec3> rest_vertices, const MatX& weights,
                       std::span<const RigidTransform> transforms);
std::vector<Vec3> skin(const SkinnedMesh& mesh, std::span<const RigidTransform> transforms);

struct SkinGradient {
  std::vector<Mat3> rotations;
  std::vector<Vec3> translations;
  std::vector<Vec3> rest_vertices;
};

SkinGradient skin_backward(std::span<const Vec3> rest_vertices, const MatX& weights,
                           std::span<const RigidTransform> transforms,
                           std::span<const Vec3> grad_posed);

// Faces sharing an edge. Throws DataError if an edge is shared by more than
// two faces.
std::vector<std::vector<int>> face_adjacency(const SkinnedMesh& mesh);

// Owning face per texel (row-major, -1 where no UV triangle covers the texel
// center). Throws DataError when two UV triangles overlap at a texel center.
std::vector<int> texel_face_map(const SkinnedMesh& mesh, int tex_height, int tex_width);

std::vector<Vec3> face_normals(std::span<const Vec3> vertices,
                               std::span<const std::array<int, 3>> faces);

}  // namespace blurpose
