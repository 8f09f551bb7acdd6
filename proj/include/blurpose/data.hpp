#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "blurpose/blur.hpp"
#include "blurpose/humanoid.hpp"
#include "blurpose/motion.hpp"
#include "blurpose/render.hpp"

namespace blurpose {

struct BlurBand {
  double lo = 0.2;
  double hi = 0.3;
};

struct GenerationConfig {
  int width = 128;
  int height = 128;
  double focal = 204.8;  // 1.6 * width
  double distance = 4.0;
  double height_offset = -0.08;
  int gt_subframes = 32;
  int solve_subframes = 8;
  int degree = 2;
  double tau = 0.0;
  BlurBand band;
  double alpha_gain = 4.0;
  double pose_spread = 0.35;  // fraction of each joint limit for the constant pose
  double beta_std = 0.1;
  int max_bisection = 40;
  double band_tolerance = 0.01;
  int max_retries = 8;

  void validate() const;
  Camera camera() const { return make_camera(width, height, focal, distance, height_offset); }
};

// Flat JSON object keyed by field name; the band is "band": [lo, hi].
nlohmann::json generation_to_json(const GenerationConfig& c);
// Missing fields keep their values in `base`.
GenerationConfig generation_from_json(const nlohmann::json& doc, GenerationConfig base = {});

enum class BackgroundKind { gradient, checker, noise };
const char* background_name(BackgroundKind kind);

struct SyntheticScene {
  BlurScene scene;  // grid = (solve_subframes, tau)
  MotionCoeffs motion;
  VecX beta;
  Image texture;
  int gt_subframes = 32;
  std::vector<Image> gt_silhouettes;
  std::vector<Image> gt_appearances;
  std::vector<std::vector<Vec3>> gt_joints;  // gt_subframes x J, meters
  double blur_rate = 0.0;
  std::string bucket;
  std::uint64_t seed = 0;
  std::string background_kind;
  std::string sequence_id;
  int frame_index = 0;
};

// Blur rate of a motion as labeled in datasets: N_gt soft silhouettes
// rounded to float32 and thresholded at 0.5.
double labeled_blur_rate(const BodyModel& body, const VecX& beta, const MotionCoeffs& motion,
                         const Camera& camera, int subframes);

// Random pose within the joint limits, random linear and quadratic
// coefficients, then a common scale on every non-constant coefficient found
// by bisection so the blur rate lands in the band.
MotionCoeffs sample_motion(std::uint64_t seed, const BlurBand& band, const BodyModel& body,
                           const VecX& beta, const GenerationConfig& config);

// Per-chart colors with texel noise.
Image procedural_texture(const BodyModel& body, std::uint64_t seed);
Image procedural_background(BackgroundKind kind, int height, int width, std::uint64_t seed);

// clamp(gain * |I - B|_1, 0, 1) followed by a 3 x 3 box blur.
Image estimate_alpha_in(const Image& image, const Image& background, double gain = 4.0);

// Renders gt_subframes sub-frames and composes them. Throws DataError when
// the subject leaves the image in any sub-frame.
SyntheticScene generate_scene(const MotionCoeffs& motion, const BodyModel& body, const VecX& beta,
                              const Image& texture, const Image& background,
                              const GenerationConfig& config);

// Everything drawn from one seed.
SyntheticScene generate_random_scene(std::uint64_t seed, const BodyModel& body,
                                     const GenerationConfig& config);

// Consecutive frames of one motion: frame f uses the trajectory shifted by
// f * (1 + tau / (N - 1)) in normalized time.
std::vector<SyntheticScene> generate_sequence(std::uint64_t seed, int frames, const BodyModel& body,
                                              const GenerationConfig& config);

inline constexpr int kSceneFormatVersion = 1;

void save_scene(const std::filesystem::path& dir, const SyntheticScene& scene);
SyntheticScene load_scene(const std::filesystem::path& dir);
// Only the inputs a solver needs (blurry image, background, alpha, camera).
BlurScene load_blur_scene(const std::filesystem::path& dir);

struct ManifestEntry {
  std::string path;  // relative to the dataset root
  double blur_rate = 0.0;
  std::string bucket;
  std::uint64_t seed = 0;
};

void write_dataset_manifest(const std::filesystem::path& root, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_dataset_manifest(const std::filesystem::path& root);

}  // namespace blurpose
