#pragma once

#include <array>
#include <span>
#include <vector>

#include "blurpose/types.hpp"

namespace blurpose {

// Static pinhole camera. Image coordinates are u = fx X / Z + cx,
// v = fy Y / Z + cy in camera space (X right, Y down, Z forward).
struct Camera {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
  RigidTransform world_to_camera;

  void validate() const;
};

// Camera at (0, height_offset, distance) looking down -z at a y-up world.
Camera make_camera(int width, int height, double focal, double distance, double height_offset = 0.0);

inline constexpr double kNearClip = 1e-4;  // meters

struct Projection {
  std::vector<Vec2> pixels;
  std::vector<Vec3> camera_points;
};

Projection project(const Camera& camera, std::span<const Vec3> vertices);

struct MeshView {
  std::span<const Vec3> vertices;
  std::span<const std::array<int, 3>> faces;
  std::span<const Vec2> uv;
};

struct RenderSettings {
  double sigma = 1.0;  // soft silhouette falloff, pixels
  bool appearance = true;
};

// Soft silhouette kernel, shifted so it reaches exactly zero at 3 sigma:
// (exp(-d^2 / sigma^2) - exp(-9)) / (1 - exp(-9)).
double soft_kernel(double dist2, double sigma);

struct RenderOutput {
  Image silhouette;  // H x W x 1 in [0,1]
  Image appearance;  // H x W x 3 in [0,1]
  Image depth;       // H x W x 1, +inf where empty
  std::vector<int> face_id;        // -1 where no face covers the pixel center
  std::vector<int> visible_faces;  // sorted, faces owning at least one pixel

  // Cached soft-silhouette state for the backward pass.
  std::vector<double> soft_product;  // product of non-zero (1 - k) factors
  std::vector<int> soft_zeros;       // number of factors equal to zero
  std::vector<int> ring_face;        // nearest face for uncovered pixels in range, or -1
};

// Hard z-buffered coverage with back-face culling, bilinear texture lookup at
// the interpolated UV, and a soft silhouette on uncovered pixels:
// 1 - prod_f (1 - k(d_f)) over faces within 3 sigma. Uncovered pixels inside
// the soft band take the texture color at the closest boundary point of their
// nearest face, which keeps silhouette * appearance continuous.
RenderOutput rasterize(const Camera& camera, const MeshView& mesh, const Image& texture,
                       const RenderSettings& settings = {});

struct RenderGradient {
  std::vector<Vec3> vertices;
  Image texture;
};

// Adjoint of rasterize given adjoints of silhouette and appearance. Either
// adjoint image may be empty (treated as zero).
RenderGradient rasterize_backward(const Camera& camera, const MeshView& mesh, const Image& texture,
                                  const RenderSettings& settings, const RenderOutput& forward,
                                  const Image& grad_silhouette, const Image& grad_appearance);

// Bilinear texture lookup at uv (texel centers at (c + 0.5) / W).
Vec3 sample_texture(const Image& texture, const Vec2& uv);

}  // namespace blurpose
