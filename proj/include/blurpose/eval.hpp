#pragma once

#include <span>
#include <string>
#include <vector>

#include "blurpose/data.hpp"
#include "blurpose/types.hpp"

namespace blurpose {

// Sub-frames x joints.
using JointTrack = std::vector<std::vector<Vec3>>;

// Mean distance over the non-root joints after subtracting each pose's root
// (joint 0). Units follow the inputs.
double mpjpe(const JointTrack& pred, const JointTrack& gt);

struct Similarity {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Vec3 apply(const Vec3& x) const { return scale * (rotation * x) + translation; }
};

// Least-squares similarity mapping `from` onto `to` (reflection-corrected).
Similarity procrustes(std::span<const Vec3> from, std::span<const Vec3> to);

// Mean joint distance after per-sub-frame Procrustes alignment.
double pa_mpjpe(const JointTrack& pred, const JointTrack& gt);

// Set IoU of masks thresholded at 0.5; 1 when the union is empty.
double mask_iou(const Image& a, const Image& b);

struct IouReport {
  double union_iou = 0.0;             // union over sub-frames of each side
  std::vector<double> per_subframe;   // only when both lists have equal length
  double mean_per_subframe = 0.0;
};

IouReport silhouette_iou(std::span<const Image> pred, std::span<const Image> gt);

std::vector<double> default_bucket_edges();
// "[lo,hi)" for the bucket holding rate, or "out of range".
std::string bucket_label(double rate, std::span<const double> edges);
std::string bucket_label(double rate);

struct SceneResult {
  std::string name;
  double blur_rate = 0.0;
  double mpjpe = 0.0;     // mm
  double pa_mpjpe = 0.0;  // mm
  double iou = 0.0;           // union masks
  double iou_subframe = 0.0;  // mean per sub-frame
};

struct BucketRow {
  std::string label;
  double lo = 0.0, hi = 0.0;
  int count = 0;
  double mpjpe = 0.0, pa_mpjpe = 0.0, iou = 0.0, iou_subframe = 0.0;  // means, 0 when empty
};

struct BucketTable {
  std::vector<BucketRow> rows;  // one per bucket plus the out-of-range row
  std::string text() const;
  std::string csv() const;
};

// Scores one predicted motion against a generated scene at the solve
// timestamps (scene grid), with the ground truth resampled from its
// polynomial: joint errors in mm, IoU of silhouettes thresholded at 0.5.
SceneResult score_scene(const BodyModel& body, const SyntheticScene& gt, const VecX& beta,
                        const MotionCoeffs& motion, double sigma = 1.0);

BucketTable bucket_report(std::span<const SceneResult> results, std::span<const double> edges);

}  // namespace blurpose
