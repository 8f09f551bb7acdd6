#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "blurpose/blur.hpp"
#include "blurpose/humanoid.hpp"
#include "blurpose/losses.hpp"
#include "blurpose/motion.hpp"
#include "blurpose/pipeline.hpp"

namespace blurpose {

enum class SolveMode { single, multi };
enum class InitMode { oracle, silhouette };

struct SolveConfig {
  int iterations = 200;
  double learning_rate = 0.01;
  double shape_learning_rate = 0.0;    // 0: learning_rate
  double texture_learning_rate = 0.05;  // 0: learning_rate
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int subframes = 8;
  int degree = 2;
  double sigma = 1.0;
  double tau = 0.0;
  LossWeights weights;
  SolveMode mode = SolveMode::single;
  InitMode init = InitMode::oracle;
  double init_noise = 0.1;   // rad, oracle init
  int init_iterations = 100; // silhouette init
  std::uint64_t seed = 0;

  void validate() const;
  TimeGrid grid() const { return {subframes, tau}; }
  double shape_rate() const { return shape_learning_rate > 0.0 ? shape_learning_rate : learning_rate; }
  double texture_rate() const { return texture_learning_rate > 0.0 ? texture_learning_rate : learning_rate; }
};

// Optimizable parameters. The texture is stored as logits and mapped through
// an element-wise sigmoid.
struct SolveState {
  std::vector<MotionCoeffs> motions;  // one per frame
  VecX beta;
  Image texture_logits;  // H_T x W_T x 3
  VecX adam_m;
  VecX adam_v;
  int iteration = 0;

  // frames * rows * cols + shape_dim + 3 * H_T * W_T
  size_t parameter_count() const;
  VecX pack() const;
  void unpack(const VecX& params);
  Image texture() const;

  bool operator==(const SolveState& o) const;
};

SolveState make_state(std::vector<MotionCoeffs> motions, VecX beta, const Image& texture);

Image texture_to_logits(const Image& texture);

struct GradientResult {
  LossReport report;
  VecX gradient;
};

// Full loss and its gradient with respect to the packed parameters.
GradientResult gradient(const BodyModel& body, const SolveState& state,
                        std::span<const BlurScene> scenes, const SolveConfig& config,
                        const MotionPrior* prior = nullptr);

// Loss only (no adjoints).
LossReport evaluate(const BodyModel& body, const SolveState& state, std::span<const BlurScene> scenes,
                    const SolveConfig& config, const MotionPrior* prior = nullptr);

// Bias-corrected ADAM update in place.
void adam_step(SolveState& state, const VecX& grad, const SolveConfig& config);

struct SolveResult {
  SolveState state;
  std::vector<LossReport> trajectory;  // iterations + 1 entries, the last at the final state
  bool non_monotone = false;
};

using IterationCallback = std::function<void(const LossReport&)>;

SolveResult solve(const BodyModel& body, std::span<const BlurScene> scenes, const SolveState& init,
                  const SolveConfig& config, const MotionPrior* prior = nullptr,
                  const IterationCallback& callback = {});

// Ground-truth pose at mid-exposure with every joint rotation perturbed by a
// random axis and N(0, noise) angle, then a constant trajectory.
MotionCoeffs oracle_init(const MotionCoeffs& gt, const SolveConfig& config, std::uint64_t seed);

// Noise seed for oracle_init from the run seed and the scene's identity.
inline std::uint64_t oracle_seed(std::uint64_t run_seed, std::uint64_t scene_seed, int frame_index) {
  return run_seed * 1000003ULL + scene_seed * 7919ULL + static_cast<std::uint64_t>(frame_index);
}

// Fits a static pose to alpha_in (matting term only, constant coefficients
// only), then returns the constant trajectory through it.
MotionCoeffs silhouette_init(const BodyModel& body, const BlurScene& scene, const MotionCoeffs& start,
                             const SolveConfig& config);

// Texture estimate read off the image: each texel visible in the first
// sub-frame of `motion` takes the alpha-unmixed pixel colour; hidden texels
// take the mean of their body part. Values are clamped to [0.02, 0.98].
Image texture_from_image(const BodyModel& body, const VecX& beta, const MotionCoeffs& motion,
                         const BlurScene& scene);

// Start state: zero shape, texture from the first scene.
SolveState initial_state(const BodyModel& body, std::span<const BlurScene> scenes,
                         std::vector<MotionCoeffs> motions);

struct GradientCheckReport {
  double max_relative_error = 0.0;  // |a - f| / max(|a|, |f|, 1e-2)
  double max_absolute_error = 0.0;
  int worst_parameter = -1;
  std::string worst_group;
  size_t parameter_count = 0;
  bool pass = false;
};

struct GradientCheckOptions {
  std::uint64_t seed = 0;
  double step = 1e-6;
  double tolerance = 1e-2;
  double absolute_tolerance = 1e-4;
  bool multi_frame = false;
  bool break_adjoint = false;  // negative control
};

// Builds the tiny random scene (16 x 16, two-joint body, N = 2, d = 1) and
// compares the analytic gradient with central differences on every parameter.
GradientCheckReport check_gradients(const GradientCheckOptions& options);

}  // namespace blurpose
