#include "blurpose/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace blurpose {

namespace {

constexpr double kCutoffSigmas = 3.0;
const double kKernelFloor = std::exp(-kCutoffSigmas * kCutoffSigmas);

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// d(cross2(a, b))/da and /db.
Vec2 dcross_da(const Vec2& b) { return {b.y(), -b.x()}; }
Vec2 dcross_db(const Vec2& a) { return {-a.y(), a.x()}; }

struct FaceInfo {
  bool front = false;
  double area = 0.0;  // signed 2D area (twice the triangle area)
};

std::vector<FaceInfo> classify_faces(const MeshView& mesh, const Projection& proj) {
  std::vector<FaceInfo> info(mesh.faces.size());
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    const Vec3& c0 = proj.camera_points[t[0]];
    const Vec3& c1 = proj.camera_points[t[1]];
    const Vec3& c2 = proj.camera_points[t[2]];
    if (c0.z() <= kNearClip || c1.z() <= kNearClip || c2.z() <= kNearClip) continue;
    const Vec3 n = (c1 - c0).cross(c2 - c0);
    if (n.dot(c0) >= 0.0) continue;  // back-facing
    const Vec2& p0 = proj.pixels[t[0]];
    const double area = cross2(proj.pixels[t[1]] - p0, proj.pixels[t[2]] - p0);
    if (std::abs(area) < 1e-12) continue;
    info[f] = {true, area};
  }
  return info;
}

void barycentrics(const Vec2 p[3], double area, const Vec2& q, double b[3]) {
  for (int i = 0; i < 3; ++i)
    b[i] = cross2(p[(i + 1) % 3] - q, p[(i + 2) % 3] - q) / area;
}

struct PixelBox {
  int x0, x1, y0, y1;
  bool empty() const { return x0 > x1 || y0 > y1; }
};

// Pixels whose centers can lie within `margin` of the triangle.
PixelBox pixel_box(const Vec2 p[3], double margin, int width, int height) {
  const double minx = std::min({p[0].x(), p[1].x(), p[2].x()}) - margin;
  const double maxx = std::max({p[0].x(), p[1].x(), p[2].x()}) + margin;
  const double miny = std::min({p[0].y(), p[1].y(), p[2].y()}) - margin;
  const double maxy = std::max({p[0].y(), p[1].y(), p[2].y()}) + margin;
  PixelBox b;
  b.x0 = std::max(0, static_cast<int>(std::ceil(minx - 0.5)));
  b.x1 = std::min(width - 1, static_cast<int>(std::floor(maxx - 0.5)));
  b.y0 = std::max(0, static_cast<int>(std::ceil(miny - 0.5)));
  b.y1 = std::min(height - 1, static_cast<int>(std::floor(maxy - 0.5)));
  return b;
}

struct EdgeHit {
  int edge = 0;    // closest edge runs from vertex `edge` to vertex `edge + 1`
  double t = 0.0;  // clamped parameter along that edge
  double dist2 = std::numeric_limits<double>::infinity();
};

EdgeHit closest_edge(const Vec2 p[3], const Vec2& q) {
  EdgeHit best;
  for (int e = 0; e < 3; ++e) {
    const Vec2& a = p[e];
    const Vec2 ab = p[(e + 1) % 3] - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (q - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double d2 = (q - (a + t * ab)).squaredNorm();
    if (d2 < best.dist2) best = {e, t, d2};
  }
  return best;
}

struct BilinearTap {
  int x0, x1, y0, y1;
  double fx, fy;
  double dx_du, dy_dv;  // zero when the coordinate is clamped
};

BilinearTap bilinear_tap(const Image& tex, const Vec2& uv) {
  BilinearTap tap{};
  auto axis = [](double coord, int n, int& i0, int& i1, double& frac, double& deriv) {
    double x = coord * n - 0.5;
    deriv = static_cast<double>(n);
    if (x <= 0.0) {
      x = 0.0;
      deriv = 0.0;
    } else if (x >= n - 1) {
      x = n - 1;
      deriv = 0.0;
    }
    i0 = std::min(static_cast<int>(std::floor(x)), std::max(0, n - 2));
    i1 = std::min(i0 + 1, n - 1);
    frac = x - i0;
  };
  axis(uv.x(), tex.width, tap.x0, tap.x1, tap.fx, tap.dx_du);
  axis(uv.y(), tex.height, tap.y0, tap.y1, tap.fy, tap.dy_dv);
  return tap;
}

Vec3 bilinear(const Image& tex, const BilinearTap& t) {
  Vec3 out;
  for (int c = 0; c < 3; ++c) {
    out[c] = (1 - t.fx) * (1 - t.fy) * tex.at(t.y0, t.x0, c) + t.fx * (1 - t.fy) * tex.at(t.y0, t.x1, c) +
             (1 - t.fx) * t.fy * tex.at(t.y1, t.x0, c) + t.fx * t.fy * tex.at(t.y1, t.x1, c);
  }
  return out;
}

// Accumulates the texture adjoint and returns d(<g, color>)/d(uv).
Vec2 bilinear_backward(const Image& tex, const BilinearTap& t, const Vec3& g, Image& grad_tex) {
  Vec2 guv = Vec2::Zero();
  for (int c = 0; c < 3; ++c) {
    if (g[c] == 0.0) continue;
    grad_tex.at(t.y0, t.x0, c) += g[c] * (1 - t.fx) * (1 - t.fy);
    grad_tex.at(t.y0, t.x1, c) += g[c] * t.fx * (1 - t.fy);
    grad_tex.at(t.y1, t.x0, c) += g[c] * (1 - t.fx) * t.fy;
    grad_tex.at(t.y1, t.x1, c) += g[c] * t.fx * t.fy;
    const double t00 = tex.at(t.y0, t.x0, c), t10 = tex.at(t.y0, t.x1, c);
    const double t01 = tex.at(t.y1, t.x0, c), t11 = tex.at(t.y1, t.x1, c);
    const double dfx = (1 - t.fy) * (t10 - t00) + t.fy * (t11 - t01);
    const double dfy = (1 - t.fx) * (t01 - t00) + t.fx * (t11 - t10);
    guv.x() += g[c] * dfx * t.dx_du;
    guv.y() += g[c] * dfy * t.dy_dv;
  }
  return guv;
}

}  // namespace

void Camera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw DataError("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw DataError("camera image size must be positive");
  const Mat3& r = world_to_camera.rotation;
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
      std::abs(r.determinant() - 1.0) > 1e-6)
    throw DataError("camera rotation is not a proper rotation");
}

Camera make_camera(int width, int height, double focal, double distance, double height_offset) {
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.fx = cam.fy = focal;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.world_to_camera.rotation = Vec3(1.0, -1.0, -1.0).asDiagonal();
  const Vec3 center(0.0, height_offset, distance);
  cam.world_to_camera.translation = -(cam.world_to_camera.rotation * center);
  return cam;
}

Projection project(const Camera& camera, std::span<const Vec3> vertices) {
  Projection p;
  p.pixels.resize(vertices.size());
  p.camera_points.resize(vertices.size());
  for (size_t i = 0; i < vertices.size(); ++i) {
    const Vec3 c = camera.world_to_camera.apply(vertices[i]);
    p.camera_points[i] = c;
    p.pixels[i] = Vec2(camera.fx * c.x() / c.z() + camera.cx, camera.fy * c.y() / c.z() + camera.cy);
  }
  return p;
}

double soft_kernel(double dist2, double sigma) {
  const double cutoff = kCutoffSigmas * sigma;
  if (dist2 >= cutoff * cutoff) return 0.0;
  return (std::exp(-dist2 / (sigma * sigma)) - kKernelFloor) / (1.0 - kKernelFloor);
}

Vec3 sample_texture(const Image& texture, const Vec2& uv) {
  return bilinear(texture, bilinear_tap(texture, uv));
}

RenderOutput rasterize(const Camera& camera, const MeshView& mesh, const Image& texture,
                       const RenderSettings& settings) {
  const int w = camera.width, h = camera.height;
  const size_t npix = static_cast<size_t>(w) * h;
  RenderOutput out;
  out.silhouette = Image(h, w, 1, 0.0);
  out.appearance = Image(h, w, 3, 0.0);
  out.depth = Image(h, w, 1, std::numeric_limits<double>::infinity());
  out.face_id.assign(npix, -1);
  out.soft_product.assign(npix, 1.0);
  out.soft_zeros.assign(npix, 0);
  out.ring_face.assign(npix, -1);
  if (mesh.faces.empty()) return out;

  const Projection proj = project(camera, mesh.vertices);
  const std::vector<FaceInfo> info = classify_faces(mesh, proj);

  // Hard coverage with a z-buffer.
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    if (!info[f].front) continue;
    const auto& tri = mesh.faces[f];
    const Vec2 p[3] = {proj.pixels[tri[0]], proj.pixels[tri[1]], proj.pixels[tri[2]]};
    const double z[3] = {proj.camera_points[tri[0]].z(), proj.camera_points[tri[1]].z(),
                         proj.camera_points[tri[2]].z()};
    const PixelBox box = pixel_box(p, 0.0, w, h);
    for (int y = box.y0; y <= box.y1; ++y) {
      for (int x = box.x0; x <= box.x1; ++x) {
        double b[3];
        barycentrics(p, info[f].area, Vec2(x + 0.5, y + 0.5), b);
        if (b[0] < 0.0 || b[1] < 0.0 || b[2] < 0.0) continue;
        const double depth = b[0] * z[0] + b[1] * z[1] + b[2] * z[2];
        double& zb = out.depth.at(y, x);
        if (depth < zb) {
          zb = depth;
          out.face_id[static_cast<size_t>(y) * w + x] = static_cast<int>(f);
        }
      }
    }
  }

  std::vector<char> seen(mesh.faces.size(), 0);
  for (size_t i = 0; i < npix; ++i) {
    const int f = out.face_id[i];
    if (f < 0) continue;
    out.silhouette.data[i] = 1.0;
    seen[f] = 1;
    if (!settings.appearance) continue;
    const auto& tri = mesh.faces[f];
    const Vec2 p[3] = {proj.pixels[tri[0]], proj.pixels[tri[1]], proj.pixels[tri[2]]};
    const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    double b[3];
    barycentrics(p, info[f].area, Vec2(x + 0.5, y + 0.5), b);
    const Vec2 uv = b[0] * mesh.uv[tri[0]] + b[1] * mesh.uv[tri[1]] + b[2] * mesh.uv[tri[2]];
    const Vec3 c = sample_texture(texture, uv);
    for (int k = 0; k < 3; ++k) out.appearance.data[i * 3 + k] = c[k];
  }
  for (size_t f = 0; f < seen.size(); ++f)
    if (seen[f]) out.visible_faces.push_back(static_cast<int>(f));

  // Soft silhouette band around the coverage.
  const double margin = kCutoffSigmas * settings.sigma;
  std::vector<double> ring_dist2(npix, std::numeric_limits<double>::infinity());
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    if (!info[f].front) continue;
    const auto& tri = mesh.faces[f];
    const Vec2 p[3] = {proj.pixels[tri[0]], proj.pixels[tri[1]], proj.pixels[tri[2]]};
    const PixelBox box = pixel_box(p, margin, w, h);
    for (int y = box.y0; y <= box.y1; ++y) {
      for (int x = box.x0; x <= box.x1; ++x) {
        const size_t i = static_cast<size_t>(y) * w + x;
        if (out.face_id[i] >= 0) continue;
        const EdgeHit hit = closest_edge(p, Vec2(x + 0.5, y + 0.5));
        const double k = soft_kernel(hit.dist2, settings.sigma);
        if (k <= 0.0) continue;
        const double factor = 1.0 - k;
        if (factor == 0.0)
          ++out.soft_zeros[i];
        else
          out.soft_product[i] *= factor;
        if (hit.dist2 < ring_dist2[i]) {
          ring_dist2[i] = hit.dist2;
          out.ring_face[i] = static_cast<int>(f);
        }
      }
    }
  }
  for (size_t i = 0; i < npix; ++i) {
    const int f = out.ring_face[i];
    if (f < 0) continue;
    out.silhouette.data[i] = 1.0 - (out.soft_zeros[i] > 0 ? 0.0 : out.soft_product[i]);
    if (!settings.appearance) continue;
    const auto& tri = mesh.faces[f];
    const Vec2 p[3] = {proj.pixels[tri[0]], proj.pixels[tri[1]], proj.pixels[tri[2]]};
    const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    const EdgeHit hit = closest_edge(p, Vec2(x + 0.5, y + 0.5));
    const Vec2 uv = (1.0 - hit.t) * mesh.uv[tri[hit.edge]] + hit.t * mesh.uv[tri[(hit.edge + 1) % 3]];
    const Vec3 c = sample_texture(texture, uv);
    for (int k = 0; k < 3; ++k) out.appearance.data[i * 3 + k] = c[k];
  }
  return out;
}

RenderGradient rasterize_backward(const Camera& camera, const MeshView& mesh, const Image& texture,
                                  const RenderSettings& settings, const RenderOutput& fwd,
                                  const Image& grad_silhouette, const Image& grad_appearance) {
  const int w = camera.width, h = camera.height;
  const size_t npix = static_cast<size_t>(w) * h;
  RenderGradient g;
  g.vertices.assign(mesh.vertices.size(), Vec3::Zero());
  g.texture = Image(texture.height, texture.width, texture.channels, 0.0);
  if (mesh.faces.empty()) return g;
  const bool has_gs = grad_silhouette.size() == npix;
  const bool has_ga = grad_appearance.size() == npix * 3 && settings.appearance;
  if (!has_gs && !has_ga) return g;

  const Projection proj = project(camera, mesh.vertices);
  const std::vector<FaceInfo> info = classify_faces(mesh, proj);
  std::vector<Vec2> g2d(mesh.vertices.size(), Vec2::Zero());

  // Interior appearance: texture lookup at barycentric UV.
  if (has_ga) {
    for (size_t i = 0; i < npix; ++i) {
      const int f = fwd.face_id[i];
      if (f < 0) continue;
      const Vec3 ga(grad_appearance.data[i * 3], grad_appearance.data[i * 3 + 1],
                    grad_appearance.data[i * 3 + 2]);
      if (ga.isZero(0.0)) continue;
      const auto& tri = mesh.faces[f];
      const Vec2 p[3] = {proj.pixels[tri[0]], proj.pixels[tri[1]], proj.pixels[tri[2]]};
      const Vec2 q(static_cast<double>(i % w) + 0.5, static_cast<double>(i / w) + 0.5);
      const double area = info[f].area;
      double b[3];
      barycentrics(p, area, q, b);
      const Vec2 uv = b[0] * mesh.uv[tri[0]] + b[1] * mesh.uv[tri[1]] + b[2] * mesh.uv[tri[2]];
      const Vec2 guv = bilinear_backward(texture, bilinear_tap(texture, uv), ga, g.texture);
      double gb[3];
      for (int k = 0; k < 3; ++k) gb[k] = guv.dot(mesh.uv[tri[k]]);
      // b_k = E_k / A with E_k = cross(p[k+1] - q, p[k+2] - q) and A = sum_k E_k.
      const double gb_dot_b = gb[0] * b[0] + gb[1] * b[1] + gb[2] * b[2];
      for (int k = 0; k < 3; ++k) {
        const int i1 = (k + 1) % 3, i2 = (k + 2) % 3;
        const Vec2 d1 = dcross_da(p[i2] - q);  // dE_k / dp[i1]
        const Vec2 d2 = dcross_db(p[i1] - q);  // dE_k / dp[i2]
        const double coef = (gb[k] - gb_dot_b) / area;
        g2d[tri[i1]] += coef * d1;
        g2d[tri[i2]] += coef * d2;
      }
    }
  }

  // Soft band: silhouette kernel terms and nearest-boundary appearance.
  const double sigma = settings.sigma;
  const double margin = kCutoffSigmas * sigma;
  const double kernel_scale = 1.0 / (1.0 - std::exp(-kCutoffSigmas * kCutoffSigmas));
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    if (!info[f].front) continue;
    const auto& tri = mesh.faces[f];
    const Vec2 p[3] = {proj.pixels[tri[0]], proj.pixels[tri[1]], proj.pixels[tri[2]]};
    const PixelBox box = pixel_box(p, margin, w, h);
    for (int y = box.y0; y <= box.y1; ++y) {
      for (int x = box.x0; x <= box.x1; ++x) {
        const size_t i = static_cast<size_t>(y) * w + x;
        if (fwd.face_id[i] >= 0) continue;
        const Vec2 q(x + 0.5, y + 0.5);
        const EdgeHit hit = closest_edge(p, q);
        const double k = soft_kernel(hit.dist2, sigma);
        if (k <= 0.0) continue;
        const int ia = tri[hit.edge], ib = tri[(hit.edge + 1) % 3];
        const Vec2& a = p[hit.edge];
        const Vec2& bpt = p[(hit.edge + 1) % 3];
        const Vec2 closest = a + hit.t * (bpt - a);

        if (has_gs && grad_silhouette.data[i] != 0.0) {
          const double factor = 1.0 - k;
          double others;
          if (fwd.soft_zeros[i] == 0)
            others = fwd.soft_product[i] / factor;
          else if (fwd.soft_zeros[i] == 1 && factor == 0.0)
            others = fwd.soft_product[i];
          else
            others = 0.0;
          const double gk = grad_silhouette.data[i] * others;
          const double gd2 = gk * (-std::exp(-hit.dist2 / (sigma * sigma)) / (sigma * sigma)) * kernel_scale;
          g2d[ia] += gd2 * (-2.0 * (1.0 - hit.t)) * (q - closest);
          g2d[ib] += gd2 * (-2.0 * hit.t) * (q - closest);
        }

        if (has_ga && fwd.ring_face[i] == static_cast<int>(f)) {
          const Vec3 ga(grad_appearance.data[i * 3], grad_appearance.data[i * 3 + 1],
                        grad_appearance.data[i * 3 + 2]);
          if (ga.isZero(0.0)) continue;
          const Vec2 uv = (1.0 - hit.t) * mesh.uv[ia] + hit.t * mesh.uv[ib];
          const Vec2 guv = bilinear_backward(texture, bilinear_tap(texture, uv), ga, g.texture);
          if (hit.t > 0.0 && hit.t < 1.0) {
            const double gt = guv.dot(mesh.uv[ib] - mesh.uv[ia]);
            const Vec2 e = bpt - a;
            const double ee = e.squaredNorm();
            g2d[ia] += gt * (-e - (q - a) + 2.0 * hit.t * e) / ee;
            g2d[ib] += gt * ((q - a) - 2.0 * hit.t * e) / ee;
          }
        }
      }
    }
  }

  // Image-space adjoints to world space through the pinhole projection.
  const Mat3 rt = camera.world_to_camera.rotation.transpose();
  for (size_t v = 0; v < mesh.vertices.size(); ++v) {
    const Vec2& gp = g2d[v];
    if (gp.isZero(0.0)) continue;
    const Vec3& c = proj.camera_points[v];
    const double iz = 1.0 / c.z();
    const Vec3 gc(camera.fx * iz * gp.x(), camera.fy * iz * gp.y(),
                  -(camera.fx * c.x() * gp.x() + camera.fy * c.y() * gp.y()) * iz * iz);
    g.vertices[v] = rt * gc;
  }
  return g;
}

}  // namespace blurpose
