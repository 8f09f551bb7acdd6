#include "blurpose/body.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include <fmt/format.h>

#include "blurpose/rotation.hpp"

namespace blurpose {

void SkeletonTemplate::validate() const {
  const int j = joint_count();
  if (j < 1) throw DataError("skeleton has no joints");
  if (static_cast<int>(rest_offsets.size()) != j || static_cast<int>(names.size()) != j)
    throw DataError("skeleton arrays have inconsistent lengths");
  if (parent[0] != kNoParent) throw DataError("joint 0 must be the root");
  for (int k = 1; k < j; ++k) {
    if (parent[k] < 0 || parent[k] >= k)
      throw DataError(fmt::format("joint '{}' has parent {} (must precede it)", names[k], parent[k]));
  }
}

std::vector<Vec3> rest_joint_positions(const SkeletonTemplate& skeleton) {
  std::vector<Vec3> out(skeleton.joint_count());
  for (int k = 0; k < skeleton.joint_count(); ++k) {
    const int p = skeleton.parent[k];
    out[k] = (p == kNoParent ? Vec3::Zero() : out[p]) + skeleton.rest_offsets[k];
  }
  return out;
}

double BodyShape::factor(int joint) const {
  double f = 1.0;
  for (int b = 0; b < dim(); ++b) f += beta[b] * basis(b, joint);
  return f;
}

bool in_admissible_box(const VecX& beta, double bound) {
  return beta.size() == 0 || beta.cwiseAbs().maxCoeff() <= bound;
}

SkeletonTemplate apply_shape(const SkeletonTemplate& skeleton, const BodyShape& shape) {
  if (shape.basis.rows() != shape.dim() || shape.basis.cols() != skeleton.joint_count())
    throw DataError("shape basis does not match skeleton");
  SkeletonTemplate out = skeleton;
  if (shape.dim() > 0 && shape.beta.isZero(0.0)) return out;
  for (int k = 0; k < skeleton.joint_count(); ++k) {
    const double f = shape.factor(k);
    if (k != 0 && f <= 0.0 && skeleton.rest_offsets[k].norm() > 0.0)
      throw DataError(fmt::format("non-positive bone length at joint '{}' (scale {})",
                                  skeleton.names[k], f));
    out.rest_offsets[k] = skeleton.rest_offsets[k] * f;
  }
  return out;
}

void SkinnedMesh::validate(int joint_count) const {
  const int v = vertex_count();
  if (static_cast<int>(uv.size()) != v) throw DataError("uv count differs from vertex count");
  if (weights.rows() != v || weights.cols() != joint_count)
    throw DataError("skinning weights have the wrong shape");
  for (int i = 0; i < v; ++i) {
    if (weights.row(i).minCoeff() < 0.0 || std::abs(weights.row(i).sum() - 1.0) > 1e-6)
      throw DataError(fmt::format("skinning weights of vertex {} are not a convex combination", i));
    if (uv[i].minCoeff() < 0.0 || uv[i].maxCoeff() > 1.0)
      throw DataError(fmt::format("uv of vertex {} outside [0,1]^2", i));
  }
  for (const auto& f : faces)
    for (int idx : f)
      if (idx < 0 || idx >= v) throw DataError("face references an invalid vertex");
  if (texture.channels != 3) throw DataError("texture must have 3 channels");
}

PoseSample PoseSample::identity(int joint_count) {
  PoseSample p;
  p.joint_rotations.assign(joint_count, Mat3::Identity());
  return p;
}

void PoseSample::validate(double tol) const {
  for (const auto& r : joint_rotations)
    if (!is_rotation(r, tol)) throw DataError("joint rotation is not orthonormal");
  if (!is_rotation(root_rotation, tol)) throw DataError("root rotation is not orthonormal");
}

JointState forward_kinematics(const SkeletonTemplate& skeleton, const PoseSample& pose) {
  const int j = skeleton.joint_count();
  JointState s;
  s.positions.resize(j);
  s.transforms.resize(j);
  for (int k = 0; k < j; ++k) {
    const int p = skeleton.parent[k];
    const Mat3& local = pose.joint_rotations[k];
    if (p == kNoParent) {
      s.transforms[k].rotation = pose.root_rotation * local;
      s.positions[k] = pose.root_translation + pose.root_rotation * skeleton.rest_offsets[k];
    } else {
      const Mat3& pr = s.transforms[p].rotation;
      s.transforms[k].rotation = pr * local;
      s.positions[k] = s.positions[p] + pr * skeleton.rest_offsets[k];
    }
    s.transforms[k].translation = s.positions[k];
  }
  return s;
}

PoseGradient forward_kinematics_backward(const SkeletonTemplate& skeleton, const PoseSample& pose,
                                         const JointState& state,
                                         std::span<const Mat3> grad_rotations,
                                         std::span<const Vec3> grad_positions) {
  const int j = skeleton.joint_count();
  std::vector<Mat3> g_rot(grad_rotations.begin(), grad_rotations.end());
  std::vector<Vec3> g_pos(grad_positions.begin(), grad_positions.end());
  PoseGradient out(j);
  for (int k = j - 1; k >= 0; --k) {
    const int p = skeleton.parent[k];
    const Mat3& local = pose.joint_rotations[k];
    const Vec3& offset = skeleton.rest_offsets[k];
    if (p == kNoParent) {
      const Mat3& g = pose.root_rotation;
      out.root_rotation += g_rot[k] * local.transpose() + g_pos[k] * offset.transpose();
      out.joint_rotations[k] += g.transpose() * g_rot[k];
      out.root_translation += g_pos[k];
      out.rest_offsets[k] += g.transpose() * g_pos[k];
    } else {
      const Mat3& pr = state.transforms[p].rotation;
      out.joint_rotations[k] += pr.transpose() * g_rot[k];
      g_rot[p] += g_rot[k] * local.transpose() + g_pos[k] * offset.transpose();
      g_pos[p] += g_pos[k];
      out.rest_offsets[k] += pr.transpose() * g_pos[k];
    }
  }
  return out;
}

std::vector<RigidTransform> skinning_transforms(const JointState& state,
                                                std::span<const Vec3> rest_positions) {
  std::vector<RigidTransform> out(state.transforms.size());
  for (size_t k = 0; k < out.size(); ++k) {
    out[k].rotation = state.transforms[k].rotation;
    out[k].translation = state.positions[k] - out[k].rotation * rest_positions[k];
  }
  return out;
}

std::vector<Vec3> skin(std::span<const Vec3> rest_vertices, const MatX& weights,
                       std::span<const RigidTransform> transforms) {
  std::vector<Vec3> out(rest_vertices.size(), Vec3::Zero());
  const int j = static_cast<int>(transforms.size());
  for (size_t v = 0; v < rest_vertices.size(); ++v) {
    for (int k = 0; k < j; ++k) {
      const double w = weights(static_cast<Eigen::Index>(v), k);
      if (w == 0.0) continue;
      out[v] += w * transforms[k].apply(rest_vertices[v]);
    }
  }
  return out;
}

std::vector<Vec3> skin(const SkinnedMesh& mesh, std::span<const RigidTransform> transforms) {
  return skin(mesh.vertices, mesh.weights, transforms);
}

SkinGradient skin_backward(std::span<const Vec3> rest_vertices, const MatX& weights,
                           std::span<const RigidTransform> transforms,
                           std::span<const Vec3> grad_posed) {
  const int j = static_cast<int>(transforms.size());
  SkinGradient g;
  g.rotations.assign(j, Mat3::Zero());
  g.translations.assign(j, Vec3::Zero());
  g.rest_vertices.assign(rest_vertices.size(), Vec3::Zero());
  for (size_t v = 0; v < rest_vertices.size(); ++v) {
    const Vec3& gv = grad_posed[v];
    for (int k = 0; k < j; ++k) {
      const double w = weights(static_cast<Eigen::Index>(v), k);
      if (w == 0.0) continue;
      g.rotations[k] += w * gv * rest_vertices[v].transpose();
      g.translations[k] += w * gv;
      g.rest_vertices[v] += w * transforms[k].rotation.transpose() * gv;
    }
  }
  return g;
}

std::vector<std::vector<int>> face_adjacency(const SkinnedMesh& mesh) {
  std::map<std::pair<int, int>, std::vector<int>> edges;
  for (int f = 0; f < mesh.face_count(); ++f) {
    const auto& tri = mesh.faces[f];
    for (int e = 0; e < 3; ++e) {
      int a = tri[e], b = tri[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      edges[{a, b}].push_back(f);
    }
  }
  std::vector<std::vector<int>> adj(mesh.face_count());
  for (const auto& [edge, faces] : edges) {
    if (faces.size() > 2)
      throw DataError(fmt::format("edge ({}, {}) is shared by {} faces", edge.first, edge.second,
                                  faces.size()));
    if (faces.size() == 2 && faces[0] != faces[1]) {
      adj[faces[0]].push_back(faces[1]);
      adj[faces[1]].push_back(faces[0]);
    }
  }
  for (auto& a : adj) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }
  return adj;
}

std::vector<int> texel_face_map(const SkinnedMesh& mesh, int tex_height, int tex_width) {
  std::vector<int> owner(static_cast<size_t>(tex_height) * tex_width, -1);
  std::vector<int> strict_owner(owner.size(), -1);
  constexpr double kInside = -1e-12;
  constexpr double kStrict = 1e-9;
  for (int f = 0; f < mesh.face_count(); ++f) {
    const auto& tri = mesh.faces[f];
    // Texel coordinates: texel (r, c) has its center at ((c + 0.5) / W, (r + 0.5) / H).
    Vec2 p[3];
    for (int i = 0; i < 3; ++i)
      p[i] = Vec2(mesh.uv[tri[i]].x() * tex_width, mesh.uv[tri[i]].y() * tex_height);
    const double area = (p[1] - p[0]).x() * (p[2] - p[0]).y() - (p[1] - p[0]).y() * (p[2] - p[0]).x();
    if (std::abs(area) < 1e-14) continue;
    const int c0 = std::max(0, static_cast<int>(std::floor(std::min({p[0].x(), p[1].x(), p[2].x()}) - 0.5)));
    const int c1 = std::min(tex_width - 1, static_cast<int>(std::ceil(std::max({p[0].x(), p[1].x(), p[2].x()}))));
    const int r0 = std::max(0, static_cast<int>(std::floor(std::min({p[0].y(), p[1].y(), p[2].y()}) - 0.5)));
    const int r1 = std::min(tex_height - 1, static_cast<int>(std::ceil(std::max({p[0].y(), p[1].y(), p[2].y()}))));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const Vec2 q(c + 0.5, r + 0.5);
        double b[3];
        for (int i = 0; i < 3; ++i) {
          const Vec2& a = p[(i + 1) % 3];
          const Vec2& e = p[(i + 2) % 3];
          b[i] = ((a - q).x() * (e - q).y() - (a - q).y() * (e - q).x()) / area;
        }
        if (std::min({b[0], b[1], b[2]}) < kInside) continue;
        const size_t idx = static_cast<size_t>(r) * tex_width + c;
        if (owner[idx] < 0) owner[idx] = f;
        if (std::min({b[0], b[1], b[2]}) > kStrict) {
          if (strict_owner[idx] >= 0)
            throw DataError(fmt::format("UV triangles {} and {} overlap at texel ({}, {})",
                                        strict_owner[idx], f, r, c));
          strict_owner[idx] = f;
        }
      }
    }
  }
  return owner;
}

std::vector<Vec3> face_normals(std::span<const Vec3> vertices,
                               std::span<const std::array<int, 3>> faces) {
  std::vector<Vec3> out(faces.size());
  for (size_t f = 0; f < faces.size(); ++f) {
    const auto& t = faces[f];
    const Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
    const double len = n.norm();
    out[f] = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
  }
  return out;
}

}  // namespace blurpose
