#pragma once

#include <span>
#include <vector>

#include "blurpose/blur.hpp"
#include "blurpose/humanoid.hpp"
#include "blurpose/motion.hpp"
#include "blurpose/render.hpp"

namespace blurpose {

// Body geometry for one shape vector.
struct ShapedBody {
  VecX beta;
  SkeletonTemplate skeleton;        // offsets scaled by beta
  std::vector<Vec3> rest_vertices;
  std::vector<Vec3> rest_joints;
};

ShapedBody shape_body(const BodyModel& body, const VecX& beta);

struct SubframeState {
  double t = 0.0;
  MatX channels;  // 4 x (J+2)
  PoseSample pose;
  JointState joints;
  std::vector<RigidTransform> skin_transforms;
  std::vector<Vec3> vertices;
  RenderOutput render;
};

struct FrameRender {
  std::vector<SubframeState> subframes;
  Composite composite;

  std::vector<Image> silhouettes() const;
  std::vector<Image> appearances() const;
  // Union of visible faces over sub-frames, one flag per face.
  std::vector<char> visible_faces(int face_count) const;
};

// Poses, skins and renders the N sub-frames of one blurry frame, then
// composes them over the background.
FrameRender render_frame(const BodyModel& body, const ShapedBody& shaped, const Image& texture,
                         const MotionCoeffs& motion, const TimeGrid& grid, const Camera& camera,
                         const Image& background, const RenderSettings& settings = {});

// Sub-frame poses only (no rendering).
std::vector<PoseSample> sample_poses(const MotionCoeffs& motion, const TimeGrid& grid);

// World joint positions at every sub-frame.
std::vector<std::vector<Vec3>> joint_tracks(const BodyModel& body, const VecX& beta,
                                            const MotionCoeffs& motion, const TimeGrid& grid);

struct FrameAdjoint {
  MatX motion;   // same layout as MotionCoeffs::coeffs
  VecX beta;
  Image texture;
};

// Pulls per-sub-frame render adjoints back to the motion coefficients, the
// shape vector and the texture. extra_channels, when non-empty, adds direct
// adjoints of each sub-frame's channel matrix. Results are accumulated.
void backprop_frame(const BodyModel& body, const ShapedBody& shaped, const Image& texture,
                    const MotionCoeffs& motion, const Camera& camera, const RenderSettings& settings,
                    const FrameRender& forward, std::span<const SubframeAdjoint> render_adjoints,
                    std::span<const MatX> extra_channels, FrameAdjoint& out);

}  // namespace blurpose
