#include "blurpose/pipeline.hpp"

namespace blurpose {

ShapedBody shape_body(const BodyModel& body, const VecX& beta) {
  if (beta.size() != body.shape_dim()) throw DataError("shape vector has the wrong length");
  ShapedBody s;
  s.beta = beta;
  s.skeleton = apply_shape(body.skeleton, body.shape(beta));
  s.rest_vertices = body.rest_vertices(beta);
  s.rest_joints = body.rest_joints(beta);
  return s;
}

std::vector<Image> FrameRender::silhouettes() const {
  std::vector<Image> out;
  out.reserve(subframes.size());
  for (const auto& s : subframes) out.push_back(s.render.silhouette);
  return out;
}

std::vector<Image> FrameRender::appearances() const {
  std::vector<Image> out;
  out.reserve(subframes.size());
  for (const auto& s : subframes) out.push_back(s.render.appearance);
  return out;
}

std::vector<char> FrameRender::visible_faces(int face_count) const {
  std::vector<char> vis(face_count, 0);
  for (const auto& s : subframes)
    for (int f : s.render.visible_faces) vis[f] = 1;
  return vis;
}

FrameRender render_frame(const BodyModel& body, const ShapedBody& shaped, const Image& texture,
                         const MotionCoeffs& motion, const TimeGrid& grid, const Camera& camera,
                         const Image& background, const RenderSettings& settings) {
  if (motion.joints != body.joint_count()) throw DataError("motion joint count differs from body");
  FrameRender out;
  out.subframes.resize(grid.count);
  for (int i = 0; i < grid.count; ++i) {
    SubframeState& s = out.subframes[i];
    s.t = grid.t(i + 1.0);
    s.channels = channel_values(motion, s.t);
    s.pose = pose_from_channels(s.channels, motion.joints);
    s.joints = forward_kinematics(shaped.skeleton, s.pose);
    s.skin_transforms = skinning_transforms(s.joints, shaped.rest_joints);
    s.vertices = skin(shaped.rest_vertices, body.mesh.weights, s.skin_transforms);
    const MeshView view{s.vertices, body.mesh.faces, body.mesh.uv};
    s.render = rasterize(camera, view, texture, settings);
  }
  std::vector<Image> sil = out.silhouettes(), app = out.appearances();
  out.composite = compose(sil, app, background);
  return out;
}

std::vector<PoseSample> sample_poses(const MotionCoeffs& motion, const TimeGrid& grid) {
  std::vector<PoseSample> out;
  for (int i = 1; i <= grid.count; ++i) out.push_back(sample_at(motion, i, grid));
  return out;
}

std::vector<std::vector<Vec3>> joint_tracks(const BodyModel& body, const VecX& beta,
                                            const MotionCoeffs& motion, const TimeGrid& grid) {
  const SkeletonTemplate skel = apply_shape(body.skeleton, body.shape(beta));
  std::vector<std::vector<Vec3>> out;
  for (const PoseSample& p : sample_poses(motion, grid)) out.push_back(forward_kinematics(skel, p).positions);
  return out;
}

void backprop_frame(const BodyModel& body, const ShapedBody& shaped, const Image& texture,
                    const MotionCoeffs& motion, const Camera& camera, const RenderSettings& settings,
                    const FrameRender& forward, std::span<const SubframeAdjoint> render_adjoints,
                    std::span<const MatX> extra_channels, FrameAdjoint& out) {
  const int jc = body.joint_count();
  const int dim = body.shape_dim();
  if (out.motion.size() == 0) out.motion = MatX::Zero(motion.rows(), motion.cols());
  if (out.beta.size() == 0) out.beta = VecX::Zero(dim);
  if (out.texture.size() == 0) out.texture = Image(texture.height, texture.width, texture.channels);

  std::vector<Vec3> g_rest_vertices(shaped.rest_vertices.size(), Vec3::Zero());
  std::vector<Vec3> g_rest_joints(jc, Vec3::Zero());
  std::vector<Vec3> g_offsets(jc, Vec3::Zero());

  for (size_t i = 0; i < forward.subframes.size(); ++i) {
    const SubframeState& s = forward.subframes[i];
    const MeshView view{s.vertices, body.mesh.faces, body.mesh.uv};
    const RenderGradient rg = rasterize_backward(camera, view, texture, settings, s.render,
                                                 render_adjoints[i].silhouette, render_adjoints[i].appearance);
    for (size_t p = 0; p < rg.texture.size(); ++p) out.texture.data[p] += rg.texture.data[p];

    const SkinGradient sg = skin_backward(shaped.rest_vertices, body.mesh.weights, s.skin_transforms, rg.vertices);
    for (size_t v = 0; v < g_rest_vertices.size(); ++v) g_rest_vertices[v] += sg.rest_vertices[v];

    // A_k = (R_k, p_k - R_k r_k) with r_k the rest joint position.
    std::vector<Mat3> g_rot(jc);
    std::vector<Vec3> g_pos(jc);
    for (int k = 0; k < jc; ++k) {
      const Mat3& r = s.joints.transforms[k].rotation;
      g_rot[k] = sg.rotations[k] - sg.translations[k] * shaped.rest_joints[k].transpose();
      g_pos[k] = sg.translations[k];
      g_rest_joints[k] -= r.transpose() * sg.translations[k];
    }
    const PoseGradient pg = forward_kinematics_backward(shaped.skeleton, s.pose, s.joints, g_rot, g_pos);
    for (int k = 0; k < jc; ++k) g_offsets[k] += pg.rest_offsets[k];

    PoseAdjoint pa{pg.joint_rotations, pg.root_rotation, pg.root_translation};
    MatX g_ch = pose_from_channels_backward(s.channels, jc, pa);
    if (!extra_channels.empty()) g_ch += extra_channels[i];

    double tp = 1.0;
    for (int k = 0; k <= motion.degree; ++k) {
      for (int ch = 0; ch < MotionCoeffs::kChannels; ++ch)
        out.motion.row(motion.row(ch, k)) += tp * g_ch.row(ch);
      tp *= s.t;
    }
  }

  for (int b = 0; b < dim; ++b) {
    double acc = 0.0;
    for (size_t v = 0; v < g_rest_vertices.size(); ++v) acc += g_rest_vertices[v].dot(body.shape_dirs[b][v]);
    for (int k = 0; k < jc; ++k) {
      acc += g_rest_joints[k].dot(body.joint_shape_dirs[b][k]);
      acc += g_offsets[k].dot(body.skeleton.rest_offsets[k]) * body.shape_basis(b, k);
    }
    out.beta[b] += acc;
  }
}

}  // namespace blurpose
