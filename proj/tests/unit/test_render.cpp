#include <doctest.h>

#include "blurpose/render.hpp"
#include "helpers.hpp"

using namespace blurpose;
using testing::Rng;

namespace {

// 16 x 16 camera looking down +z from the origin (world = camera space).
Camera square_camera(int size = 16) {
  Camera c;
  c.fx = c.fy = size;
  c.cx = c.cy = 0.5 * size;
  c.width = c.height = size;
  return c;
}

// Camera-space point at depth z projecting to pixel (u, v).
Vec3 at_pixel(const Camera& c, double u, double v, double z = 1.0) {
  return {(u - c.cx) / c.fx * z, (v - c.cy) / c.fy * z, z};
}

struct Quad {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces{{0, 2, 1}, {1, 2, 3}};
  std::vector<Vec2> uv{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
  MeshView view() const { return {vertices, faces, uv}; }
};

// Axis-aligned pixel rectangle [u0, u1] x [v0, v1], front-facing.
Quad rect(const Camera& c, double u0, double v0, double u1, double v1) {
  Quad q;
  q.vertices = {at_pixel(c, u0, v0), at_pixel(c, u1, v0), at_pixel(c, u0, v1), at_pixel(c, u1, v1)};
  return q;
}

double image_sum(const Image& im) {
  double s = 0.0;
  for (double v : im.data) s += v;
  return s;
}

}  // namespace

TEST_CASE("projection") {
  const Camera c = square_camera();
  const std::vector<Vec3> pts{{0, 0, 1}, {1.0 / c.fx * 3.0, 0, 1}};
  const Projection p = project(c, pts);
  CHECK(p.pixels[0] == Vec2(c.cx, c.cy));
  CHECK(p.pixels[1].x() == doctest::Approx(c.cx + 3.0));

  Rng rng(1);
  Camera r = make_camera(64, 48, 70.0, 3.0, 0.2);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 x = rng.vec3(0.5);
    const Vec3 cam = r.world_to_camera.apply(x);
    const Vec2 expect(r.fx * cam.x() / cam.z() + r.cx, r.fy * cam.y() / cam.z() + r.cy);
    const std::vector<Vec3> one{x};
    CHECK((project(r, one).pixels[0] - expect).norm() < 1e-12);
  }
}

TEST_CASE("make_camera looks at the origin") {
  const Camera c = make_camera(64, 48, 70.0, 3.0);
  const std::vector<Vec3> origin{Vec3::Zero(), Vec3(0, 0.1, 0)};
  const Projection p = project(c, origin);
  CHECK((p.pixels[0] - Vec2(32, 24)).norm() < 1e-12);
  CHECK(p.pixels[1].y() < 24);  // world up is image up
  CHECK(p.camera_points[0].z() == doctest::Approx(3.0));
}

TEST_CASE("soft kernel") {
  CHECK(soft_kernel(0.0, 1.0) == doctest::Approx(1.0));
  CHECK(soft_kernel(9.0, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(soft_kernel(16.0, 1.0) == 0.0);
  CHECK(soft_kernel(1.0, 1.0) > soft_kernel(2.0, 1.0));
}

TEST_CASE("flat texture on a large triangle") {
  const Camera c = square_camera();
  const Quad q = rect(c, -4, -4, 20, 20);
  const Image tex(4, 4, 3, 0.3);
  const RenderOutput r = rasterize(c, q.view(), tex);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      CHECK(r.silhouette.at(y, x) == 1.0);
      for (int k = 0; k < 3; ++k) CHECK(r.appearance.at(y, x, k) == doctest::Approx(0.3));
      CHECK(r.face_id[y * 16 + x] >= 0);
    }
  CHECK(r.visible_faces == std::vector<int>{0, 1});
}

TEST_CASE("empty mesh renders nothing") {
  const Camera c = square_camera();
  const RenderOutput r = rasterize(c, MeshView{}, Image(4, 4, 3, 0.3));
  CHECK(image_sum(r.silhouette) == 0.0);
  CHECK(image_sum(r.appearance) == 0.0);
  CHECK(r.visible_faces.empty());
}

TEST_CASE("back faces are culled") {
  const Camera c = square_camera();
  Quad q = rect(c, 2, 2, 12, 12);
  for (auto& f : q.faces) std::swap(f[1], f[2]);
  CHECK(image_sum(rasterize(c, q.view(), Image(4, 4, 3, 0.3)).silhouette) == 0.0);
}

TEST_CASE("nearest face wins the z-test") {
  const Camera c = square_camera();
  Quad q = rect(c, -4, -4, 20, 20);
  Quad near = q;
  for (Vec3& v : near.vertices) v *= 0.5;  // same footprint, half depth
  Quad both;
  both.vertices = q.vertices;
  both.vertices.insert(both.vertices.end(), near.vertices.begin(), near.vertices.end());
  both.faces = {{0, 2, 1}, {1, 2, 3}, {4, 6, 5}, {5, 6, 7}};
  both.uv = {{0.1, 0.1}, {0.1, 0.1}, {0.1, 0.1}, {0.1, 0.1}, {0.9, 0.9}, {0.9, 0.9}, {0.9, 0.9}, {0.9, 0.9}};
  Image tex(2, 2, 3, 0.0);
  for (int k = 0; k < 3; ++k) tex.at(1, 1, k) = 1.0;
  const RenderOutput r = rasterize(c, both.view(), tex);
  CHECK(r.face_id[8 * 16 + 8] >= 2);
  CHECK(r.appearance.at(8, 8) == doctest::Approx(1.0));
  CHECK(r.depth.at(8, 8) == doctest::Approx(0.5));
}

TEST_CASE("square coverage against supersampled hard rasterization") {
  const Camera c = square_camera(32);
  for (double sigma : {0.5, 1.0, 2.0}) {
    const double u0 = 7.3, v0 = 9.6, u1 = 21.8, v1 = 18.2;
    const RenderOutput r = rasterize(c, rect(c, u0, v0, u1, v1).view(), Image(4, 4, 3, 0.5), {sigma, true});
    double hard = 0.0;
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        for (int sy = 0; sy < 16; ++sy)
          for (int sx = 0; sx < 16; ++sx) {
            const double u = x + (sx + 0.5) / 16, v = y + (sy + 0.5) / 16;
            if (u >= u0 && u <= u1 && v >= v0 && v <= v1) hard += 1.0 / 256;
          }
    const double perimeter = 2 * ((u1 - u0) + (v1 - v0));
    CHECK(std::abs(image_sum(r.silhouette) - hard) <= 1.5 * sigma * perimeter);
  }
}

TEST_CASE("silhouette is zero beyond three sigma") {
  const Camera c = square_camera(32);
  const RenderOutput r = rasterize(c, rect(c, 10, 10, 20, 20).view(), Image(4, 4, 3, 0.5), {1.0, true});
  CHECK(r.silhouette.at(15, 24) == 0.0);  // 4.5 px away
  CHECK(r.silhouette.at(15, 21) > 0.0);   // 1.5 px away
  CHECK(r.silhouette.at(15, 21) < 1.0);
}

TEST_CASE("bilinear texture sampling") {
  Image tex(2, 2, 1);
  tex.data = {0.0, 1.0, 2.0, 3.0};
  Image rgb(2, 2, 3);
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 3; ++k) rgb.data[i * 3 + k] = tex.data[i];
  CHECK(sample_texture(rgb, {0.25, 0.25})[0] == doctest::Approx(0.0));
  CHECK(sample_texture(rgb, {0.75, 0.75})[0] == doctest::Approx(3.0));
  CHECK(sample_texture(rgb, {0.5, 0.5})[0] == doctest::Approx(1.5));
  CHECK(sample_texture(rgb, {0.5, 0.25})[0] == doctest::Approx(0.5));
}

TEST_CASE("backward: zero adjoint gives zero gradients") {
  const Camera c = square_camera();
  const Quad q = rect(c, 3.2, 4.1, 11.7, 12.4);
  const Image tex(4, 4, 3, 0.3);
  const RenderOutput r = rasterize(c, q.view(), tex);
  const RenderGradient g = rasterize_backward(c, q.view(), tex, {}, r, Image(16, 16, 1), Image(16, 16, 3));
  for (const Vec3& v : g.vertices) CHECK(v.isZero());
  CHECK(image_sum(g.texture) == 0.0);
}

TEST_CASE("backward: one appearance pixel spreads unit mass over at most four texels") {
  const Camera c = square_camera();
  const Quad q = rect(c, 1.3, 1.1, 14.7, 14.4);
  const Image tex(8, 8, 3, 0.3);
  const RenderOutput r = rasterize(c, q.view(), tex);
  Image ga(16, 16, 3);
  ga.at(7, 9, 1) = 1.0;
  const RenderGradient g = rasterize_backward(c, q.view(), tex, {}, r, Image(), ga);
  double mass = 0.0;
  int touched = 0;
  for (size_t i = 0; i < g.texture.data.size(); ++i) {
    if (i % 3 != 1) {
      CHECK(g.texture.data[i] == 0.0);
      continue;
    }
    mass += g.texture.data[i];
    touched += g.texture.data[i] != 0.0;
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(touched <= 4);
}

TEST_CASE("backward: vertex gradient of the silhouette sum matches finite differences") {
  const Camera c = square_camera();
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    Quad q;
    q.vertices = {at_pixel(c, 3 + rng.uniform(), 2 + rng.uniform(), 1.0 + 0.1 * rng.uniform()),
                  at_pixel(c, 12 + rng.uniform(), 3 + rng.uniform(), 1.0 + 0.1 * rng.uniform()),
                  at_pixel(c, 2 + rng.uniform(), 12 + rng.uniform(), 1.0 + 0.1 * rng.uniform()),
                  at_pixel(c, 11 + rng.uniform(), 13 + rng.uniform(), 1.0 + 0.1 * rng.uniform())};
    const Image tex = rng.image(4, 4, 3);
    const RenderSettings settings{1.0, true};
    auto loss = [&](const Quad& m) { return image_sum(rasterize(c, m.view(), tex, settings).silhouette); };
    const RenderOutput r = rasterize(c, q.view(), tex, settings);
    const RenderGradient g = rasterize_backward(c, q.view(), tex, settings, r, Image(16, 16, 1, 1.0), Image());
    double worst = 0.0, scale = 0.0;
    for (size_t v = 0; v < 4; ++v)
      for (int k = 0; k < 3; ++k) {
        Quad p = q, m = q;
        p.vertices[v][k] += 1e-6;
        m.vertices[v][k] -= 1e-6;
        const double fd = (loss(p) - loss(m)) / 2e-6;
        worst = std::max(worst, std::abs(fd - g.vertices[v][k]));
        scale = std::max(scale, std::abs(fd));
      }
    CHECK(worst <= 1e-2 * scale);
  }
}

TEST_CASE("backward: texture gradient of a weighted appearance matches finite differences") {
  const Camera c = square_camera();
  Rng rng(8);
  const Quad q = rect(c, 2.3, 3.1, 13.6, 12.9);
  Image tex = rng.image(4, 4, 3);
  const Image w = rng.image(16, 16, 3, -1.0, 1.0);
  auto loss = [&](const Image& t) {
    const RenderOutput r = rasterize(c, q.view(), t);
    double s = 0.0;
    for (size_t i = 0; i < w.data.size(); ++i) s += w.data[i] * r.appearance.data[i];
    return s;
  };
  const RenderOutput r = rasterize(c, q.view(), tex);
  const RenderGradient g = rasterize_backward(c, q.view(), tex, {}, r, Image(), w);
  for (size_t i = 0; i < tex.data.size(); ++i) {
    Image p = tex, m = tex;
    p.data[i] += 1e-6;
    m.data[i] -= 1e-6;
    CHECK(std::abs((loss(p) - loss(m)) / 2e-6 - g.texture.data[i]) < 1e-6);
  }
}
