#include "blurpose/eval.hpp"

#include <Eigen/SVD>
#include <fmt/format.h>

#include "blurpose/pipeline.hpp"

namespace blurpose {

namespace {

void check_tracks(const JointTrack& pred, const JointTrack& gt) {
  if (pred.size() != gt.size() || pred.empty()) throw DataError("joint tracks differ in length or are empty");
  for (size_t i = 0; i < pred.size(); ++i)
    if (pred[i].size() != gt[i].size() || pred[i].empty())
      throw DataError("joint counts differ between prediction and ground truth");
}

}  // namespace

double mpjpe(const JointTrack& pred, const JointTrack& gt) {
  check_tracks(pred, gt);
  double acc = 0.0;
  size_t n = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const Vec3 rp = pred[i][0], rg = gt[i][0];
    // The root error is zero after alignment and is left out of the mean.
    for (size_t k = pred[i].size() > 1 ? 1 : 0; k < pred[i].size(); ++k) {
      acc += ((pred[i][k] - rp) - (gt[i][k] - rg)).norm();
      ++n;
    }
  }
  return acc / static_cast<double>(n);
}

Similarity procrustes(std::span<const Vec3> from, std::span<const Vec3> to) {
  if (from.size() != to.size() || from.empty()) throw DataError("point sets differ in size");
  const double n = static_cast<double>(from.size());
  Vec3 mf = Vec3::Zero(), mt = Vec3::Zero();
  for (size_t i = 0; i < from.size(); ++i) {
    mf += from[i];
    mt += to[i];
  }
  mf /= n;
  mt /= n;
  Mat3 cov = Mat3::Zero();
  double var = 0.0;
  for (size_t i = 0; i < from.size(); ++i) {
    cov += (to[i] - mt) * (from[i] - mf).transpose();
    var += (from[i] - mf).squaredNorm();
  }
  cov /= n;
  var /= n;
  if (!(var > 1e-20)) throw DataError("degenerate point set (all points coincide)");
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 s = Mat3::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s(2, 2) = -1.0;
  Similarity out;
  out.rotation = svd.matrixU() * s * svd.matrixV().transpose();
  out.scale = (svd.singularValues().asDiagonal() * s).trace() / var;
  out.translation = mt - out.scale * (out.rotation * mf);
  return out;
}

double pa_mpjpe(const JointTrack& pred, const JointTrack& gt) {
  check_tracks(pred, gt);
  double acc = 0.0;
  size_t n = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const Similarity t = procrustes(pred[i], gt[i]);
    for (size_t k = 0; k < pred[i].size(); ++k) {
      acc += (t.apply(pred[i][k]) - gt[i][k]).norm();
      ++n;
    }
  }
  return acc / static_cast<double>(n);
}

double mask_iou(const Image& a, const Image& b) {
  if (!a.same_extent(b)) throw DataError("masks differ in size");
  size_t inter = 0, uni = 0;
  for (size_t p = 0; p < a.pixel_count(); ++p) {
    const bool x = a.data[p * a.channels] > 0.5, y = b.data[p * b.channels] > 0.5;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

IouReport silhouette_iou(std::span<const Image> pred, std::span<const Image> gt) {
  if (pred.empty() || gt.empty()) throw DataError("IoU needs at least one silhouette per side");
  auto umask = [](std::span<const Image> s) {
    Image u(s[0].height, s[0].width, 1);
    for (const Image& im : s) {
      if (!im.same_extent(u)) throw DataError("silhouettes differ in size");
      for (size_t p = 0; p < u.pixel_count(); ++p)
        if (im.data[p * im.channels] > 0.5) u.data[p] = 1.0;
    }
    return u;
  };
  IouReport r;
  r.union_iou = mask_iou(umask(pred), umask(gt));
  if (pred.size() == gt.size()) {
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
      r.per_subframe.push_back(mask_iou(pred[i], gt[i]));
      acc += r.per_subframe.back();
    }
    r.mean_per_subframe = acc / static_cast<double>(pred.size());
  }
  return r;
}

std::vector<double> default_bucket_edges() {
  return {0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.1};
}

std::string bucket_label(double rate, std::span<const double> edges) {
  for (size_t i = 0; i + 1 < edges.size(); ++i)
    if (rate >= edges[i] && rate < edges[i + 1]) return fmt::format("[{:.2f},{:.2f})", edges[i], edges[i + 1]);
  return "out of range";
}

std::string bucket_label(double rate) {
  const std::vector<double> e = default_bucket_edges();
  return bucket_label(rate, e);
}

SceneResult score_scene(const BodyModel& body, const SyntheticScene& gt, const VecX& beta,
                        const MotionCoeffs& motion, double sigma) {
  const TimeGrid& grid = gt.scene.grid;
  auto to_mm = [](JointTrack t) {
    for (auto& frame : t)
      for (Vec3& j : frame) j *= 1000.0;
    return t;
  };
  auto masks = [&](const VecX& b, const MotionCoeffs& m) {
    const FrameRender fr = render_frame(body, shape_body(body, b), body.mesh.texture, m, grid, gt.scene.camera,
                                        gt.scene.background, {sigma, false});
    std::vector<Image> sils = fr.silhouettes();
    for (Image& s : sils) round_to_float(s);
    return sils;
  };
  const JointTrack pred = to_mm(joint_tracks(body, beta, motion, grid));
  const JointTrack truth = to_mm(joint_tracks(body, gt.beta, gt.motion, grid));
  const IouReport iou = silhouette_iou(masks(beta, motion), masks(gt.beta, gt.motion));
  SceneResult r;
  r.blur_rate = gt.blur_rate;
  r.mpjpe = mpjpe(pred, truth);
  r.pa_mpjpe = pa_mpjpe(pred, truth);
  r.iou = iou.union_iou;
  r.iou_subframe = iou.mean_per_subframe;
  return r;
}

BucketTable bucket_report(std::span<const SceneResult> results, std::span<const double> edges) {
  for (size_t i = 0; i + 1 < edges.size(); ++i)
    if (!(edges[i] < edges[i + 1])) throw DataError("bucket edges must be strictly ascending");
  BucketTable t;
  for (size_t i = 0; i + 1 < edges.size(); ++i)
    t.rows.push_back({fmt::format("[{:.2f},{:.2f})", edges[i], edges[i + 1]), edges[i], edges[i + 1]});
  t.rows.push_back({"out of range", 0.0, 0.0});
  for (const auto& r : results) {
    size_t row = t.rows.size() - 1;
    for (size_t i = 0; i + 1 < edges.size(); ++i)
      if (r.blur_rate >= edges[i] && r.blur_rate < edges[i + 1]) row = i;
    BucketRow& b = t.rows[row];
    ++b.count;
    b.mpjpe += r.mpjpe;
    b.pa_mpjpe += r.pa_mpjpe;
    b.iou += r.iou;
    b.iou_subframe += r.iou_subframe;
  }
  for (auto& b : t.rows) {
    if (b.count == 0) continue;
    b.mpjpe /= b.count;
    b.pa_mpjpe /= b.count;
    b.iou /= b.count;
    b.iou_subframe /= b.count;
  }
  return t;
}

std::string BucketTable::text() const {
  std::string s = fmt::format("{:<14} {:>5} {:>10} {:>10} {:>7} {:>9}\n", "blur rate", "n", "MPJPE", "PA-MPJPE",
                              "IoU", "IoU/sub");
  for (const auto& r : rows)
    s += fmt::format("{:<14} {:>5} {:>10.1f} {:>10.1f} {:>7.3f} {:>9.3f}\n", r.label, r.count, r.mpjpe, r.pa_mpjpe,
                     r.iou, r.iou_subframe);
  return s;
}

std::string BucketTable::csv() const {
  std::string s = "bucket,lo,hi,count,mpjpe_mm,pa_mpjpe_mm,iou,iou_subframe\n";
  for (const auto& r : rows)
    s += fmt::format("\"{}\",{},{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n", r.label, r.lo, r.hi, r.count, r.mpjpe,
                     r.pa_mpjpe, r.iou, r.iou_subframe);
  return s;
}

}  // namespace blurpose
