#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "blurpose/body.hpp"
#include "blurpose/humanoid.hpp"
#include "blurpose/motion.hpp"
#include "blurpose/render.hpp"
#include "blurpose/solver.hpp"

namespace blurpose {

namespace fs = std::filesystem;
using json = nlohmann::json;

// git describe of the source tree at configure time.
std::string build_id();

enum class NpyType { f32, f64 };

struct NpyArray {
  std::vector<size_t> shape;
  std::vector<double> data;
  NpyType type = NpyType::f32;

  size_t count() const;
};

// NPY v1.0, little endian, C order.
void write_npy(const fs::path& path, std::span<const size_t> shape, std::span<const double> data,
               NpyType type = NpyType::f32);
NpyArray read_npy(const fs::path& path);

// H x W (1 channel) or H x W x C arrays.
void write_image_npy(const fs::path& path, const Image& image, NpyType type = NpyType::f32);
Image read_image_npy(const fs::path& path);
// Stack of equally sized images as N x H x W[ x C].
void write_stack_npy(const fs::path& path, std::span<const Image> images, NpyType type = NpyType::f32);
std::vector<Image> read_stack_npy(const fs::path& path);

// 8-bit PNG, gray or RGB. Values are clamped to [0,1] and rounded.
void write_png(const fs::path& path, const Image& image);
Image read_png(const fs::path& path);
// Horizontal strip of equally sized images.
Image hstack(std::span<const Image> images);

json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& doc);

json motion_to_json(const MotionCoeffs& c);
MotionCoeffs motion_from_json(const json& doc);

json camera_to_json(const Camera& c);
Camera camera_from_json(const json& doc);

json weights_to_json(const LossWeights& w);
LossWeights weights_from_json(const json& doc, LossWeights base = {});

json config_to_json(const SolveConfig& c);
// Fields missing from the document keep their values in `base`.
SolveConfig config_from_json(const json& doc, SolveConfig base = {});

json report_to_json(const LossReport& r);

// Checkpoint: state.json plus texture_logits.npy and adam.npy (float64).
void save_state(const fs::path& dir, const SolveState& state);
SolveState load_state(const fs::path& dir);

// Mesh as OBJ with v / vt / f records (1-based, f v/vt).
struct ObjMesh {
  std::vector<Vec3> vertices;
  std::vector<Vec2> uv;
  std::vector<std::array<int, 3>> faces;
};
void write_obj(const fs::path& path, std::span<const Vec3> vertices, std::span<const Vec2> uv,
               std::span<const std::array<int, 3>> faces);
ObjMesh read_obj(const fs::path& path);

// Skeleton and skinning weights sidecar:
// {"joints": [{"name", "parent", "offset": [x,y,z]}...], "weights": [[...] per vertex]}
json skeleton_to_json(const SkeletonTemplate& skeleton, const MatX& weights);
SkeletonTemplate skeleton_from_json(const json& doc, MatX* weights = nullptr);

}  // namespace blurpose
