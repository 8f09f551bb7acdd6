#pragma once

#include <memory>
#include <span>
#include <vector>

#include "blurpose/humanoid.hpp"
#include "blurpose/motion.hpp"
#include "blurpose/types.hpp"

namespace blurpose {

struct LossWeights {
  double image = 1.0;
  double matting = 0.0;
  double texture = 0.05;
  double pose = 0.01;
  double shape = 1e-5;
  double poly = 1e-6;
  double background = 1e-5;
  double prior = 0.0;  // single-frame only

  void validate() const;
};

// Unweighted term values. In multi-frame runs per-frame terms are summed
// over frames.
struct LossTerms {
  double image = 0.0;
  double matting = 0.0;
  double texture = 0.0;
  double pose = 0.0;
  double shape = 0.0;
  double poly = 0.0;
  double background = 0.0;
  double prior = 0.0;
  double boundary = 0.0;  // multi-frame only, unit weight
};

struct LossReport {
  LossTerms terms;
  double total = 0.0;
  double blur_rate = 0.0;
  int iteration = 0;
};

// Weighted sum. The prior weight is dropped and the boundary term added
// with weight one when multi_frame is set.
LossReport weighted_total(const LossTerms& terms, const LossWeights& weights, bool multi_frame);

// Mean squared error over all pixels and channels.
double image_loss(const Image& observed, const Image& rendered);
// Adjoint w.r.t. `rendered`, scaled by `scale`.
Image image_loss_backward(const Image& observed, const Image& rendered, double scale = 1.0);

// 1 - sum min / sum max. Zero (with a warning) when both are empty.
double matting_loss(const Image& alpha_in, const Image& alpha_target);
// Adjoint w.r.t. alpha_target; ties take the half subgradient.
Image matting_loss_backward(const Image& alpha_in, const Image& alpha_target, double scale = 1.0);

// Texel neighbor pairs that contribute to the texture smoothness term:
// both texels owned by identical or edge-adjacent faces with a positive
// normal cosine (rest-pose normals).
struct TexturePairs {
  struct Pair {
    int k;       // texel index (row-major)
    int j;       // 8-neighbor texel index
    int face_j;  // owner of j, for the visibility test
    double cosine;
  };
  std::vector<Pair> pairs;
  int height = 0;
  int width = 0;
  double normalizer = 1.0;  // 8 * H_T * W_T
};

TexturePairs build_texture_pairs(const BodyModel& body);

// sum over pairs of v_j cos |p_k - p_j|_1 / (8 |T|). face_visible has one
// entry per face (union of visible faces over sub-frames).
double texture_smoothness(const Image& texture, const TexturePairs& pairs,
                          const std::vector<char>& face_visible);
void texture_smoothness_backward(const Image& texture, const TexturePairs& pairs,
                                 const std::vector<char>& face_visible, double scale,
                                 Image& grad_texture);

// Joint-limit penalty on the angle channel of every joint column:
// (1/N) sum_i sum_k max(0, |angle| - limit_k)^2. channels holds one
// 4 x (J+2) matrix per sub-frame.
double pose_prior(std::span<const MatX> channels, std::span<const JointLimit> limits);
// Adjoints of the channel matrices (same layout), scaled.
std::vector<MatX> pose_prior_backward(std::span<const MatX> channels,
                                      std::span<const JointLimit> limits, double scale = 1.0);

double shape_reg(const VecX& beta);
VecX shape_reg_backward(const VecX& beta, double scale = 1.0);

// L1 plus Frobenius norm of the stored coefficients.
double poly_reg(const MotionCoeffs& c);
MatX poly_reg_backward(const MotionCoeffs& c, double scale = 1.0);

inline constexpr double kBackgroundEpsilon = 1e-6;

// (1/N) sum_i mean over pixels with S_i > 0.5 of 1 / (|B - F_i|_1 + eps).
double background_reg(std::span<const Image> silhouettes, std::span<const Image> appearances,
                      const Image& background);
// Adjoints of each appearance (the mask is piecewise constant).
std::vector<Image> background_reg_backward(std::span<const Image> silhouettes,
                                           std::span<const Image> appearances,
                                           const Image& background, double scale = 1.0);

// Projection of motion coefficients onto a set of plausible motions.
class MotionPrior {
 public:
  virtual ~MotionPrior() = default;
  virtual MotionCoeffs project(const MotionCoeffs& c) const = 0;
};

// Flips every column whose channel-3 constant (angle or distance) is
// negative; (axis, angle) and (-axis, -angle) describe the same rotation.
// Returns the per-column flip signs.
std::vector<double> canonical_signs(const MotionCoeffs& c);
MotionCoeffs apply_column_signs(const MotionCoeffs& c, const std::vector<double>& signs);

// Nearest neighbor (L1, after sign canonicalization) in a bank of sampled
// motions, expressed in the sign frame of the query.
class BankPrior : public MotionPrior {
 public:
  explicit BankPrior(std::vector<MotionCoeffs> bank);
  MotionCoeffs project(const MotionCoeffs& c) const override;
  int nearest(const MotionCoeffs& c) const;
  const std::vector<MotionCoeffs>& bank() const { return canonical_; }

 private:
  std::vector<MotionCoeffs> canonical_;
};

// |P(C) - C|_1.
double motion_prior(const MotionCoeffs& c, const MotionPrior& prior);
// sign(C - P(C)), with the projection held fixed.
MatX motion_prior_backward(const MotionCoeffs& c, const MotionPrior& prior, double scale = 1.0);

}  // namespace blurpose
