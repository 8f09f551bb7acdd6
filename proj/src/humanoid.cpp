#include "blurpose/humanoid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace blurpose {

namespace {

constexpr double kBlendHalfWidth = 0.06;  // meters of weight blending around a joint

Vec3 perpendicular(const Vec3& dir) {
  Vec3 ref = Vec3::UnitX();
  if (std::abs(dir.dot(ref)) > 0.9) ref = Vec3::UnitZ();
  return (ref - ref.dot(dir) * dir).normalized();
}

// Samples along a part's axis are affine combinations of two key points, so
// they stay linear in the shape coefficients.
struct AxisSample {
  int key_a = 0;
  int key_b = 0;
  double lambda = 0.0;
  double arc = 0.0;
};

struct PartLayout {
  Vec3 dir, e1, e2;
  std::vector<double> key_arcs;   // start, chain joints..., tip
  std::vector<AxisSample> rings;
  double length = 0.0;
};

PartLayout layout_part(const PartSpec& part, std::span<const Vec3> joints0, int rings) {
  PartLayout lay;
  const Vec3 first = joints0[part.chain.front()];
  const Vec3 last = joints0[part.chain.back()];
  lay.dir = (last - first).normalized();
  lay.e1 = perpendicular(lay.dir);
  lay.e2 = lay.dir.cross(lay.e1);
  lay.key_arcs.push_back(0.0);
  for (int j : part.chain)
    lay.key_arcs.push_back(part.start_extension + (joints0[j] - first).dot(lay.dir));
  lay.length = lay.key_arcs.back() + part.tip_extension;
  lay.key_arcs.push_back(lay.length);
  for (int r = 0; r < rings; ++r) {
    AxisSample s;
    s.arc = lay.length * r / (rings - 1);
    size_t k = 0;
    while (k + 2 < lay.key_arcs.size() && lay.key_arcs[k + 1] <= s.arc) ++k;
    const double span = lay.key_arcs[k + 1] - lay.key_arcs[k];
    s.key_a = static_cast<int>(k);
    s.key_b = static_cast<int>(k + 1);
    s.lambda = span > 0.0 ? (s.arc - lay.key_arcs[k]) / span : 0.0;
    lay.rings.push_back(s);
  }
  return lay;
}

// Key points of a part for the given shape: start, chain joints, tip.
std::vector<Vec3> key_points(const PartSpec& part, const PartLayout& lay,
                             std::span<const Vec3> joints, const BodyShape& shape) {
  std::vector<Vec3> keys;
  const double start_scale = shape.factor(part.chain.size() > 1 ? part.chain[1] : part.chain[0]);
  const double tip_scale = shape.factor(part.chain.back());
  keys.push_back(joints[part.chain.front()] - lay.dir * part.start_extension * start_scale);
  for (int j : part.chain) keys.push_back(joints[j]);
  keys.push_back(joints[part.chain.back()] + lay.dir * part.tip_extension * tip_scale);
  return keys;
}

std::vector<double> chain_weights(const PartSpec& part, const PartLayout& lay, double arc) {
  const int m = static_cast<int>(part.chain.size());
  std::vector<double> w(m, 0.0);
  int q = 0;
  while (q + 1 < m && lay.key_arcs[q + 2] <= arc) ++q;
  w[q] = 1.0;
  const double a_q = lay.key_arcs[q + 1];
  if (q + 1 < m) {
    const double a_next = lay.key_arcs[q + 2];
    if (arc > a_next - kBlendHalfWidth) {
      const double t = (arc - (a_next - kBlendHalfWidth)) / (2.0 * kBlendHalfWidth);
      w[q + 1] += t;
      w[q] -= t;
    }
  }
  if (q >= 1 && arc < a_q + kBlendHalfWidth) {
    const double t = ((a_q + kBlendHalfWidth) - arc) / (2.0 * kBlendHalfWidth);
    w[q - 1] += t;
    w[q] -= t;
  }
  return w;
}

}  // namespace

std::vector<Vec3> BodyModel::rest_vertices(const VecX& beta) const {
  std::vector<Vec3> out = mesh.vertices;
  for (int b = 0; b < beta.size(); ++b) {
    if (beta[b] == 0.0) continue;
    for (size_t v = 0; v < out.size(); ++v) out[v] += beta[b] * shape_dirs[b][v];
  }
  return out;
}

std::vector<Vec3> BodyModel::rest_joints(const VecX& beta) const {
  std::vector<Vec3> out = rest_joint_positions(skeleton);
  for (int b = 0; b < beta.size(); ++b) {
    if (beta[b] == 0.0) continue;
    for (size_t k = 0; k < out.size(); ++k) out[k] += beta[b] * joint_shape_dirs[b][k];
  }
  return out;
}

BodyModel build_body(SkeletonTemplate skeleton, MatX shape_basis, std::vector<PartSpec> parts,
                     std::vector<JointLimit> limits, const BodyBuildOptions& options) {
  skeleton.validate();
  const int jc = skeleton.joint_count();
  const int dim = static_cast<int>(shape_basis.rows());
  if (shape_basis.cols() != jc) throw DataError("shape basis must have one column per joint");
  if (static_cast<int>(limits.size()) != jc) throw DataError("need one joint limit per joint");
  const int rings = options.rings;
  const int segs = options.segments;
  if (rings < 2 || segs < 3) throw DataError("body needs at least 2 rings and 3 segments");

  BodyModel body;
  body.skeleton = skeleton;
  body.shape_basis = shape_basis;
  body.joint_limits = std::move(limits);
  body.parts = std::move(parts);

  const std::vector<Vec3> joints0 = rest_joint_positions(skeleton);
  std::vector<PartLayout> layouts;
  for (const auto& p : body.parts) layouts.push_back(layout_part(p, joints0, rings));

  // Vertex positions for a given shape; everything is linear in beta.
  auto construct = [&](const VecX& beta) {
    const BodyShape shape{beta, shape_basis};
    const std::vector<Vec3> joints = rest_joint_positions(apply_shape(skeleton, shape));
    const double radius_scale = dim > 0 ? 1.0 + beta[0] : 1.0;
    std::vector<Vec3> verts;
    for (size_t pi = 0; pi < body.parts.size(); ++pi) {
      const PartSpec& part = body.parts[pi];
      const PartLayout& lay = layouts[pi];
      const std::vector<Vec3> keys = key_points(part, lay, joints, shape);
      for (int r = 0; r < rings; ++r) {
        const AxisSample& s = lay.rings[r];
        const Vec3 center = (1.0 - s.lambda) * keys[s.key_a] + s.lambda * keys[s.key_b];
        const double profile = 0.8 + 0.2 * std::sin(std::numbers::pi * s.arc / lay.length);
        for (int k = 0; k <= segs; ++k) {
          const double phi = 2.0 * std::numbers::pi * (k % segs) / segs;
          verts.push_back(center + radius_scale * profile *
                                       (part.radius_a * std::cos(phi) * lay.e1 +
                                        part.radius_b * std::sin(phi) * lay.e2));
        }
      }
      const double cap = 0.5 * std::min(part.radius_a, part.radius_b) * radius_scale;
      verts.push_back(keys.front() - lay.dir * cap);
      verts.push_back(keys.back() + lay.dir * cap);
    }
    return verts;
  };

  const VecX zero = VecX::Zero(dim);
  body.mesh.vertices = construct(zero);
  const int nv = body.mesh.vertex_count();
  const std::vector<Vec3> joints_zero = rest_joint_positions(skeleton);
  for (int b = 0; b < dim; ++b) {
    const VecX e = VecX::Unit(dim, b);
    const std::vector<Vec3> vb = construct(e);
    std::vector<Vec3> d(nv);
    for (int v = 0; v < nv; ++v) d[v] = vb[v] - body.mesh.vertices[v];
    body.shape_dirs.push_back(std::move(d));
    const std::vector<Vec3> jb = rest_joint_positions(apply_shape(skeleton, BodyShape{e, shape_basis}));
    std::vector<Vec3> jd(jc);
    for (int k = 0; k < jc; ++k) jd[k] = jb[k] - joints_zero[k];
    body.joint_shape_dirs.push_back(std::move(jd));
  }

  // Topology, UV atlas, skinning weights.
  const int np = static_cast<int>(body.parts.size());
  const int grid_cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(np))));
  const int grid_rows = (np + grid_cols - 1) / grid_cols;
  const int tex = options.texture_size;
  const int cell_w = tex / grid_cols;
  const int cell_h = tex / grid_rows;
  body.mesh.uv.resize(nv);
  body.mesh.weights = MatX::Zero(nv, jc);
  int base = 0;
  for (int pi = 0; pi < np; ++pi) {
    const PartSpec& part = body.parts[pi];
    const PartLayout& lay = layouts[pi];
    const int gc = pi % grid_cols;
    const int gr = pi / grid_cols;
    const double u0 = (gc * cell_w + 1.0) / tex, u1 = ((gc + 1) * cell_w - 1.0) / tex;
    const double v0 = (gr * cell_h + 1.0) / tex, v1 = ((gr + 1) * cell_h - 1.0) / tex;
    auto idx = [&](int r, int k) { return base + r * (segs + 1) + k; };
    const int pole_start = base + rings * (segs + 1);
    const int pole_end = pole_start + 1;
    for (int r = 0; r < rings; ++r) {
      const std::vector<double> w = chain_weights(part, lay, lay.rings[r].arc);
      for (int k = 0; k <= segs; ++k) {
        body.mesh.uv[idx(r, k)] = Vec2(u0 + (u1 - u0) * k / segs, v0 + (v1 - v0) * (r + 1.0) / (rings + 1.0));
        for (size_t c = 0; c < part.chain.size(); ++c) body.mesh.weights(idx(r, k), part.chain[c]) += w[c];
      }
    }
    body.mesh.uv[pole_start] = Vec2(0.5 * (u0 + u1), v0);
    body.mesh.uv[pole_end] = Vec2(0.5 * (u0 + u1), v1);
    body.mesh.weights(pole_start, part.chain.front()) = 1.0;
    body.mesh.weights(pole_end, part.chain.back()) = 1.0;
    for (int r = 0; r + 1 < rings; ++r) {
      for (int k = 0; k < segs; ++k) {
        body.mesh.faces.push_back({idx(r, k), idx(r, k + 1), idx(r + 1, k)});
        body.mesh.faces.push_back({idx(r, k + 1), idx(r + 1, k + 1), idx(r + 1, k)});
        body.face_part.push_back(pi);
        body.face_part.push_back(pi);
      }
    }
    for (int k = 0; k < segs; ++k) {
      body.mesh.faces.push_back({pole_start, idx(0, k + 1), idx(0, k)});
      body.mesh.faces.push_back({pole_end, idx(rings - 1, k), idx(rings - 1, k + 1)});
      body.face_part.push_back(pi);
      body.face_part.push_back(pi);
    }
    base = pole_end + 1;
  }
  body.mesh.texture = Image(tex, tex, 3, 0.5);
  body.mesh.validate(jc);

  body.adjacency = face_adjacency(body.mesh);
  body.texel_owner = texel_face_map(body.mesh, tex, tex);
  body.rest_normals = face_normals(body.mesh.vertices, body.mesh.faces);
  return body;
}

BodyModel make_humanoid(const BodyBuildOptions& options) {
  SkeletonTemplate s;
  const double arm_angle = 40.0 * std::numbers::pi / 180.0;
  const Vec3 left_arm(std::sin(arm_angle), -std::cos(arm_angle), 0.0);
  const Vec3 right_arm(-std::sin(arm_angle), -std::cos(arm_angle), 0.0);
  auto add = [&](const char* name, int parent, Vec3 offset) {
    s.names.emplace_back(name);
    s.parent.push_back(parent);
    s.rest_offsets.push_back(offset);
  };
  add("pelvis", kNoParent, Vec3::Zero());
  add("spine", kPelvis, Vec3(0.0, 0.30, 0.0));
  add("neck", kSpine, Vec3(0.0, 0.22, 0.0));
  add("head", kNeck, Vec3(0.0, 0.12, 0.0));
  add("left_shoulder", kSpine, Vec3(0.17, 0.18, 0.0));
  add("left_elbow", kLeftShoulder, left_arm * 0.28);
  add("left_wrist", kLeftElbow, left_arm * 0.25);
  add("right_shoulder", kSpine, Vec3(-0.17, 0.18, 0.0));
  add("right_elbow", kRightShoulder, right_arm * 0.28);
  add("right_wrist", kRightElbow, right_arm * 0.25);
  add("left_hip", kPelvis, Vec3(0.09, -0.06, 0.0));
  add("left_knee", kLeftHip, Vec3(0.0, -0.42, 0.0));
  add("left_ankle", kLeftKnee, Vec3(0.0, -0.40, 0.0));
  add("right_hip", kPelvis, Vec3(-0.09, -0.06, 0.0));
  add("right_knee", kRightHip, Vec3(0.0, -0.42, 0.0));
  add("right_ankle", kRightKnee, Vec3(0.0, -0.40, 0.0));

  MatX basis = MatX::Zero(4, kHumanoidJointCount);
  basis.row(0).setOnes();  // global scale
  for (int j : {kSpine, kNeck, kHead}) basis(1, j) = 0.5;
  for (int j : {kLeftElbow, kLeftWrist, kRightElbow, kRightWrist}) basis(2, j) = 0.5;
  for (int j : {kLeftKnee, kLeftAnkle, kRightKnee, kRightAnkle}) basis(3, j) = 0.5;

  std::vector<PartSpec> parts = {
      {"torso", {kPelvis, kSpine, kNeck}, 0.10, 0.0, 0.15, 0.10},
      {"head", {kNeck, kHead}, 0.0, 0.13, 0.085, 0.095},
      {"left_upper_arm", {kLeftShoulder, kLeftElbow}, 0.03, 0.0, 0.05, 0.05},
      {"left_forearm", {kLeftElbow, kLeftWrist}, 0.0, 0.12, 0.042, 0.042},
      {"right_upper_arm", {kRightShoulder, kRightElbow}, 0.03, 0.0, 0.05, 0.05},
      {"right_forearm", {kRightElbow, kRightWrist}, 0.0, 0.12, 0.042, 0.042},
      {"left_thigh", {kLeftHip, kLeftKnee}, 0.03, 0.0, 0.075, 0.075},
      {"left_shin", {kLeftKnee, kLeftAnkle}, 0.0, 0.08, 0.055, 0.055},
      {"right_thigh", {kRightHip, kRightKnee}, 0.03, 0.0, 0.075, 0.075},
      {"right_shin", {kRightKnee, kRightAnkle}, 0.0, 0.08, 0.055, 0.055},
  };

  // Elbows bend the forearm forward (+z), knees bend the shin backward (-z).
  const Vec3 left_elbow_axis = left_arm.cross(Vec3::UnitZ()).normalized();
  const Vec3 right_elbow_axis = right_arm.cross(Vec3::UnitZ()).normalized();
  std::vector<JointLimit> limits(kHumanoidJointCount);
  limits[kPelvis] = {0.5};
  limits[kSpine] = {0.6};
  limits[kNeck] = {0.6};
  limits[kHead] = {0.7};
  limits[kLeftShoulder] = limits[kRightShoulder] = {1.5};
  limits[kLeftElbow] = {2.4, true, left_elbow_axis};
  limits[kRightElbow] = {2.4, true, right_elbow_axis};
  limits[kLeftWrist] = limits[kRightWrist] = {1.0};
  limits[kLeftHip] = limits[kRightHip] = {1.5};
  limits[kLeftKnee] = limits[kRightKnee] = {2.6, true, Vec3::UnitX()};
  limits[kLeftAnkle] = limits[kRightAnkle] = {0.7};

  return build_body(std::move(s), std::move(basis), std::move(parts), std::move(limits), options);
}

BodyModel make_tiny_body() {
  SkeletonTemplate s;
  s.names = {"base", "tip"};
  s.parent = {kNoParent, 0};
  s.rest_offsets = {Vec3::Zero(), Vec3(0.0, 0.3, 0.0)};
  MatX basis(2, 2);
  basis << 1.0, 1.0,
           0.0, 0.5;
  std::vector<PartSpec> parts = {{"capsule", {0, 1}, 0.08, 0.12, 0.09, 0.07}};
  std::vector<JointLimit> limits = {{0.8}, {1.2}};
  BodyBuildOptions opts;
  opts.rings = 3;
  opts.segments = 4;
  opts.texture_size = 8;
  return build_body(std::move(s), std::move(basis), std::move(parts), std::move(limits), opts);
}

}  // namespace blurpose
