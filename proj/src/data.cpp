#include "blurpose/data.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "blurpose/eval.hpp"
#include "blurpose/io.hpp"
#include "blurpose/pipeline.hpp"
#include "blurpose/rotation.hpp"

namespace blurpose {

namespace {

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do v = Vec3(n(rng), n(rng), n(rng));
  while (v.norm() < 1e-6);
  return v.normalized();
}

// Scales every non-constant coefficient.
MotionCoeffs scale_dynamics(const MotionCoeffs& c, double s) {
  MotionCoeffs out = c;
  for (int ch = 0; ch < MotionCoeffs::kChannels; ++ch)
    for (int k = 1; k <= c.degree; ++k) out.coeffs.row(c.row(ch, k)) *= s;
  return out;
}

std::vector<Image> render_silhouettes(const BodyModel& body, const ShapedBody& shaped,
                                      const MotionCoeffs& motion, const Camera& camera, int subframes) {
  const TimeGrid grid{subframes, 0.0};
  std::vector<Image> out;
  for (int i = 1; i <= subframes; ++i) {
    const PoseSample pose = sample_at(motion, i, grid);
    const JointState js = forward_kinematics(shaped.skeleton, pose);
    const std::vector<Vec3> verts =
        skin(shaped.rest_vertices, body.mesh.weights, skinning_transforms(js, shaped.rest_joints));
    RenderOutput r = rasterize(camera, {verts, body.mesh.faces, body.mesh.uv}, body.mesh.texture,
                               RenderSettings{1.0, false});
    round_to_float(r.silhouette);
    out.push_back(threshold_mask(r.silhouette));
  }
  return out;
}

double mass(const Image& im) {
  double s = 0.0;
  for (double v : im.data) s += v;
  return s;
}

// True when the mask reaches the outermost pixel ring.
bool touches_border(const Image& mask) {
  for (int x = 0; x < mask.width; ++x)
    if (mask.at(0, x) > 0.5 || mask.at(mask.height - 1, x) > 0.5) return true;
  for (int y = 0; y < mask.height; ++y)
    if (mask.at(y, 0) > 0.5 || mask.at(y, mask.width - 1) > 0.5) return true;
  return false;
}

Vec3 hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h * 6.0, 6.0);
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  Vec3 rgb;
  if (hp < 1) rgb = {c, x, 0};
  else if (hp < 2) rgb = {x, c, 0};
  else if (hp < 3) rgb = {0, c, x};
  else if (hp < 4) rgb = {0, x, c};
  else if (hp < 5) rgb = {x, 0, c};
  else rgb = {c, 0, x};
  return rgb + Vec3::Constant(v - c);
}

Image box_blur3(const Image& in) {
  Image out(in.height, in.width, in.channels);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x)
      for (int c = 0; c < in.channels; ++c) {
        double acc = 0.0;
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= in.height || xx < 0 || xx >= in.width) continue;
            acc += in.at(yy, xx, c);
            ++n;
          }
        out.at(y, x, c) = acc / n;
      }
  return out;
}

}  // namespace

void GenerationConfig::validate() const {
  if (width < 8 || height < 8) throw DataError("image must be at least 8x8");
  if (!(focal > 0.0) || !(distance > 0.0)) throw DataError("camera focal and distance must be positive");
  if (solve_subframes < 1 || gt_subframes < 2 * solve_subframes)
    throw DataError("generation needs at least twice as many sub-frames as the solver");
  if (degree < 1) throw DataError("polynomial degree must be at least 1");
  if (!(tau >= 0.0)) throw DataError("tau must be non-negative");
  if (!(band.lo <= band.hi) || band.lo < 0.0 || band.hi > 1.1)
    throw DataError(fmt::format("blur band [{}, {}] must lie in [0, 1.1]", band.lo, band.hi));
  if (max_bisection < 1 || max_bisection > 40) throw DataError("bisection steps must lie in [1, 40]");
}

json generation_to_json(const GenerationConfig& c) {
  return {{"width", c.width},
          {"height", c.height},
          {"focal", c.focal},
          {"distance", c.distance},
          {"height_offset", c.height_offset},
          {"gt_subframes", c.gt_subframes},
          {"solve_subframes", c.solve_subframes},
          {"degree", c.degree},
          {"tau", c.tau},
          {"band", {c.band.lo, c.band.hi}},
          {"alpha_gain", c.alpha_gain},
          {"pose_spread", c.pose_spread},
          {"beta_std", c.beta_std},
          {"max_bisection", c.max_bisection},
          {"band_tolerance", c.band_tolerance},
          {"max_retries", c.max_retries}};
}

GenerationConfig generation_from_json(const json& doc, GenerationConfig c) {
  auto get = [&](const char* key, auto& field) {
    if (doc.contains(key)) field = doc.at(key).get<std::decay_t<decltype(field)>>();
  };
  try {
    if (!doc.is_object()) throw DataError("generation config must be a JSON object");
    get("width", c.width);
    get("height", c.height);
    get("focal", c.focal);
    get("distance", c.distance);
    get("height_offset", c.height_offset);
    get("gt_subframes", c.gt_subframes);
    get("solve_subframes", c.solve_subframes);
    get("degree", c.degree);
    get("tau", c.tau);
    if (doc.contains("band")) {
      const auto& b = doc.at("band");
      if (!b.is_array() || b.size() != 2) throw DataError("band must be [lo, hi]");
      c.band = {b[0].get<double>(), b[1].get<double>()};
    }
    get("alpha_gain", c.alpha_gain);
    get("pose_spread", c.pose_spread);
    get("beta_std", c.beta_std);
    get("max_bisection", c.max_bisection);
    get("band_tolerance", c.band_tolerance);
    get("max_retries", c.max_retries);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("invalid generation config: {}", e.what()));
  }
  c.validate();
  return c;
}

const char* background_name(BackgroundKind kind) {
  switch (kind) {
    case BackgroundKind::gradient: return "gradient";
    case BackgroundKind::checker: return "checker";
    case BackgroundKind::noise: return "noise";
  }
  return "gradient";
}

double labeled_blur_rate(const BodyModel& body, const VecX& beta, const MotionCoeffs& motion,
                         const Camera& camera, int subframes) {
  const ShapedBody shaped = shape_body(body, beta);
  const std::vector<Image> masks = render_silhouettes(body, shaped, motion, camera, subframes);
  return blur_rate(masks);
}

MotionCoeffs sample_motion(std::uint64_t seed, const BlurBand& band, const BodyModel& body,
                           const VecX& beta, const GenerationConfig& config) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Camera camera = config.camera();
  const ShapedBody shaped = shape_body(body, beta);
  const int jc = body.joint_count();

  for (int attempt = 0; attempt < config.max_retries; ++attempt) {
    MotionCoeffs c(config.degree, jc);
    for (int k = 0; k < jc; ++k) {
      const JointLimit& lim = body.joint_limits[k];
      const double range = config.pose_spread * lim.max_angle;
      Vec3 axis;
      double angle;
      if (lim.hinge) {
        axis = lim.hinge_axis.normalized();
        angle = 0.5 * (uni(rng) + 1.0) * range;
      } else {
        axis = random_unit(rng);
        angle = uni(rng) * range;
      }
      for (int ch = 0; ch < 3; ++ch) c.at(ch, 0, k) = axis[ch];
      c.at(3, 0, k) = angle;
      for (int p = 1; p <= config.degree; ++p) {
        const double sd = p == 1 ? 1.0 : 0.5;
        if (!lim.hinge)
          for (int ch = 0; ch < 3; ++ch) c.at(ch, p, k) = 0.3 * sd * normal(rng);
        c.at(3, p, k) = 0.4 * sd * normal(rng);
      }
    }
    const int tc = c.translation_column(), rc = c.rotation_column();
    const Vec3 t0(0.15 * uni(rng), 0.08 * uni(rng), 0.2 * uni(rng));
    const double dist = std::max(t0.norm(), 1e-3);
    const Vec3 dir = t0.norm() > 1e-3 ? Vec3(t0 / t0.norm()) : Vec3::UnitX();
    for (int ch = 0; ch < 3; ++ch) c.at(ch, 0, tc) = dir[ch];
    c.at(3, 0, tc) = dist;
    c.at(1, 0, rc) = 1.0;
    c.at(3, 0, rc) = 0.6 * uni(rng);
    for (int p = 1; p <= config.degree; ++p) {
      const double sd = p == 1 ? 1.0 : 0.5;
      for (int ch = 0; ch < 3; ++ch) c.at(ch, p, tc) = 0.5 * sd * normal(rng);
      c.at(3, p, tc) = 0.3 * sd * normal(rng);
      c.at(3, p, rc) = 0.4 * sd * normal(rng);
    }

    auto rate = [&](double s) {
      const std::vector<Image> masks =
          render_silhouettes(body, shaped, scale_dynamics(c, s), camera, config.gt_subframes);
      for (const Image& m : masks)
        if (mass(m) <= 0.0 || touches_border(m)) return std::numeric_limits<double>::infinity();
      return blur_rate(masks);
    };

    const double tol = config.band_tolerance;
    const double r0 = rate(0.0);
    if (!std::isfinite(r0)) continue;  // static pose already leaves the frame
    if (r0 >= band.lo - tol && r0 <= band.hi + tol && band.lo <= tol) return scale_dynamics(c, 0.0);

    double s_lo = 0.0, s_hi = 1.0;
    int steps = 0;
    double r_hi = rate(s_hi);
    while (std::isfinite(r_hi) && r_hi < band.lo && steps < config.max_bisection) {
      s_lo = s_hi;
      s_hi *= 2.0;
      r_hi = rate(s_hi);
      ++steps;
    }
    if (std::isfinite(r_hi) && r_hi >= band.lo && r_hi <= band.hi) return scale_dynamics(c, s_hi);
    if (std::isfinite(r_hi) && r_hi < band.lo) continue;

    double best_s = -1.0, best_gap = std::numeric_limits<double>::infinity();
    for (; steps < config.max_bisection; ++steps) {
      const double mid = 0.5 * (s_lo + s_hi);
      const double r = rate(mid);
      if (std::isfinite(r)) {
        const double gap = r < band.lo ? band.lo - r : (r > band.hi ? r - band.hi : 0.0);
        if (gap < best_gap) {
          best_gap = gap;
          best_s = mid;
        }
        if (gap == 0.0) break;
      }
      if (std::isfinite(r) && r < band.lo)
        s_lo = mid;
      else
        s_hi = mid;
    }
    if (best_s >= 0.0 && best_gap <= tol) return scale_dynamics(c, best_s);
    spdlog::debug("motion sample {} missed band [{}, {}], retrying", attempt, band.lo, band.hi);
  }
  throw DataError(fmt::format("could not reach blur band [{}, {}] after {} draws", band.lo, band.hi,
                              config.max_retries));
}

Image procedural_texture(const BodyModel& body, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int h = body.texture_height(), w = body.texture_width();
  const int parts = static_cast<int>(body.parts.size());
  std::vector<Vec3> colors;
  const double hue0 = uni(rng);
  for (int p = 0; p < parts; ++p)
    colors.push_back(hsv_to_rgb(std::fmod(hue0 + 0.37 * p + 0.1 * uni(rng), 1.0), 0.45 + 0.4 * uni(rng),
                                0.45 + 0.4 * uni(rng)));
  Image t(h, w, 3, 0.5);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const int f = body.texel_owner[r * w + c];
      const Vec3 base = f >= 0 ? colors[body.face_part[f]] : Vec3::Constant(0.5);
      for (int ch = 0; ch < 3; ++ch) t.at(r, c, ch) = std::clamp(base[ch] + 0.06 * (uni(rng) - 0.5), 0.02, 0.98);
    }
  round_to_float(t);
  return t;
}

Image procedural_background(BackgroundKind kind, int height, int width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Image b(height, width, 3);
  const Vec3 c0(uni(rng), uni(rng), uni(rng)), c1(uni(rng), uni(rng), uni(rng));
  switch (kind) {
    case BackgroundKind::gradient: {
      const double ang = 2.0 * 3.14159265358979 * uni(rng);
      const Vec2 d(std::cos(ang), std::sin(ang));
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          const double s = 0.5 + 0.5 * d.dot(Vec2((x + 0.5) / width - 0.5, (y + 0.5) / height - 0.5)) * 1.41;
          for (int c = 0; c < 3; ++c) b.at(y, x, c) = (1.0 - s) * c0[c] + s * c1[c];
        }
      break;
    }
    case BackgroundKind::checker: {
      const int cell = 8 + static_cast<int>(uni(rng) * 16);
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          const bool odd = ((x / cell) + (y / cell)) % 2 == 1;
          for (int c = 0; c < 3; ++c) b.at(y, x, c) = odd ? c0[c] : 0.7 * c0[c] + 0.3 * c1[c];
        }
      break;
    }
    case BackgroundKind::noise: {
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          const double s = uni(rng);
          for (int c = 0; c < 3; ++c) b.at(y, x, c) = (1.0 - s) * c0[c] + s * c1[c];
        }
      for (int k = 0; k < 3; ++k) b = box_blur3(b);
      break;
    }
  }
  for (double& v : b.data) v = std::clamp(v, 0.0, 1.0);
  round_to_float(b);
  return b;
}

Image estimate_alpha_in(const Image& image, const Image& background, double gain) {
  if (!image.same_shape(background) || image.channels != 3)
    throw DataError("matting needs RGB image and background of the same size");
  Image a(image.height, image.width, 1);
  for (size_t p = 0; p < a.pixel_count(); ++p) {
    double d = 0.0;
    for (int c = 0; c < 3; ++c) d += std::abs(image.data[p * 3 + c] - background.data[p * 3 + c]);
    a.data[p] = std::clamp(gain * d, 0.0, 1.0);
  }
  return box_blur3(a);
}

SyntheticScene generate_scene(const MotionCoeffs& motion, const BodyModel& body, const VecX& beta,
                              const Image& texture, const Image& background,
                              const GenerationConfig& config) {
  config.validate();
  motion.validate();
  const Camera camera = config.camera();
  if (background.height != camera.height || background.width != camera.width || background.channels != 3)
    throw DataError("background does not match the camera");
  SyntheticScene s;
  s.motion = motion;
  s.beta = beta;
  s.texture = texture;
  round_to_float(s.texture);
  s.gt_subframes = config.gt_subframes;
  const ShapedBody shaped = shape_body(body, beta);
  const TimeGrid gt_grid{config.gt_subframes, 0.0};
  for (int i = 1; i <= config.gt_subframes; ++i) {
    const PoseSample pose = sample_at(motion, i, gt_grid);
    const JointState js = forward_kinematics(shaped.skeleton, pose);
    const std::vector<Vec3> verts =
        skin(shaped.rest_vertices, body.mesh.weights, skinning_transforms(js, shaped.rest_joints));
    RenderOutput r = rasterize(camera, {verts, body.mesh.faces, body.mesh.uv}, s.texture, {});
    round_to_float(r.silhouette);
    round_to_float(r.appearance);
    if (mass(threshold_mask(r.silhouette)) <= 0.0)
      throw DataError(fmt::format("subject is outside the image at sub-frame {}", i));
    s.gt_silhouettes.push_back(std::move(r.silhouette));
    s.gt_appearances.push_back(std::move(r.appearance));
    std::vector<Vec3> joints = js.positions;
    for (Vec3& j : joints)
      for (int c = 0; c < 3; ++c) j[c] = static_cast<double>(static_cast<float>(j[c]));
    s.gt_joints.push_back(std::move(joints));
  }
  s.scene.camera = camera;
  s.scene.grid = {config.solve_subframes, config.tau};
  s.scene.background = background;
  round_to_float(s.scene.background);
  s.scene.image = compose(s.gt_silhouettes, s.gt_appearances, s.scene.background).image;
  round_to_float(s.scene.image);
  s.scene.alpha_in = estimate_alpha_in(s.scene.image, s.scene.background, config.alpha_gain);
  round_to_float(s.scene.alpha_in);
  std::vector<Image> masks;
  for (const Image& m : s.gt_silhouettes) masks.push_back(threshold_mask(m));
  s.blur_rate = blur_rate(masks);
  s.bucket = bucket_label(s.blur_rate);
  return s;
}

SyntheticScene generate_random_scene(std::uint64_t seed, const BodyModel& body, const GenerationConfig& config) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::uint64_t motion_seed = rng(), texture_seed = rng(), bg_seed = rng();
  VecX beta(body.shape_dim());
  for (int b = 0; b < beta.size(); ++b) beta[b] = std::clamp(config.beta_std * normal(rng), -0.3, 0.3);
  beta = beta.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
  const auto kind = static_cast<BackgroundKind>(rng() % 3);
  const MotionCoeffs motion = sample_motion(motion_seed, config.band, body, beta, config);
  SyntheticScene s = generate_scene(motion, body, beta, procedural_texture(body, texture_seed),
                                    procedural_background(kind, config.height, config.width, bg_seed), config);
  s.seed = seed;
  s.background_kind = background_name(kind);
  return s;
}

std::vector<SyntheticScene> generate_sequence(std::uint64_t seed, int frames, const BodyModel& body,
                                              const GenerationConfig& config) {
  if (frames < 1) throw DataError("a sequence needs at least one frame");
  SyntheticScene first = generate_random_scene(seed, body, config);
  first.sequence_id = fmt::format("seq{}", seed);
  std::vector<SyntheticScene> out;
  const double step = config.solve_subframes > 1 ? 1.0 + config.tau / (config.solve_subframes - 1.0) : 1.0;
  for (int f = 1; f < frames; ++f) {
    const MotionCoeffs m = taylor_shift(first.motion, f * step);
    SyntheticScene s = generate_scene(m, body, first.beta, first.texture, first.scene.background, config);
    s.seed = seed;
    s.background_kind = first.background_kind;
    s.sequence_id = first.sequence_id;
    s.frame_index = f;
    out.push_back(std::move(s));
  }
  out.insert(out.begin(), std::move(first));
  return out;
}

void save_scene(const fs::path& dir, const SyntheticScene& s) {
  fs::create_directories(dir / "gt");
  write_png(dir / "blur.png", s.scene.image);
  write_image_npy(dir / "blur.npy", s.scene.image);
  write_png(dir / "background.png", s.scene.background);
  write_image_npy(dir / "background.npy", s.scene.background);
  write_image_npy(dir / "alpha_in.npy", s.scene.alpha_in);
  json meta;
  meta["version"] = kSceneFormatVersion;
  meta["seed"] = s.seed;
  meta["camera"] = camera_to_json(s.scene.camera);
  meta["n_solve"] = s.scene.grid.count;
  meta["tau"] = s.scene.grid.tau;
  meta["n_gt"] = s.gt_subframes;
  meta["beta"] = std::vector<double>(s.beta.data(), s.beta.data() + s.beta.size());
  meta["blur_rate"] = s.blur_rate;
  meta["bucket"] = s.bucket;
  meta["background_kind"] = s.background_kind;
  meta["sequence_id"] = s.sequence_id;
  meta["frame_index"] = s.frame_index;
  write_json(dir / "meta.json", meta);
  write_json(dir / "gt" / "motion.json", motion_to_json(s.motion));
  std::vector<double> joints;
  for (const auto& frame : s.gt_joints)
    for (const Vec3& j : frame) joints.insert(joints.end(), {j.x(), j.y(), j.z()});
  const size_t jshape[3] = {s.gt_joints.size(), s.gt_joints.empty() ? 0 : s.gt_joints[0].size(), 3};
  write_npy(dir / "gt" / "joints.npy", jshape, joints);
  write_stack_npy(dir / "gt" / "silhouettes.npy", s.gt_silhouettes);
  write_stack_npy(dir / "gt" / "appearances.npy", s.gt_appearances);
  write_image_npy(dir / "gt" / "texture.npy", s.texture);
  write_png(dir / "gt" / "texture.png", s.texture);
}

BlurScene load_blur_scene(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError(fmt::format("scene directory '{}' does not exist", dir.string()));
  const json meta = read_json(dir / "meta.json");
  if (meta.value("version", 0) != kSceneFormatVersion)
    throw DataError(fmt::format("scene '{}' has format version {}, expected {}", dir.string(),
                                meta.value("version", 0), kSceneFormatVersion));
  BlurScene b;
  try {
    b.camera = camera_from_json(meta.at("camera"));
    b.grid = {meta.at("n_solve").get<int>(), meta.at("tau").get<double>()};
  } catch (const json::exception& e) {
    throw DataError(fmt::format("invalid meta.json in '{}': {}", dir.string(), e.what()));
  }
  for (const char* f : {"blur.npy", "background.npy", "alpha_in.npy"})
    if (!fs::exists(dir / f)) throw DataError(fmt::format("scene '{}' is missing {}", dir.string(), f));
  b.image = read_image_npy(dir / "blur.npy");
  b.background = read_image_npy(dir / "background.npy");
  b.alpha_in = read_image_npy(dir / "alpha_in.npy");
  b.validate();
  return b;
}

SyntheticScene load_scene(const fs::path& dir) {
  SyntheticScene s;
  s.scene = load_blur_scene(dir);
  const json meta = read_json(dir / "meta.json");
  try {
    s.seed = meta.at("seed").get<std::uint64_t>();
    s.gt_subframes = meta.at("n_gt").get<int>();
    const auto beta = meta.at("beta").get<std::vector<double>>();
    s.beta = Eigen::Map<const VecX>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    s.blur_rate = meta.at("blur_rate").get<double>();
    s.bucket = meta.at("bucket").get<std::string>();
    s.background_kind = meta.value("background_kind", "");
    s.sequence_id = meta.value("sequence_id", "");
    s.frame_index = meta.value("frame_index", 0);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("invalid meta.json in '{}': {}", dir.string(), e.what()));
  }
  s.motion = motion_from_json(read_json(dir / "gt" / "motion.json"));
  const NpyArray j = read_npy(dir / "gt" / "joints.npy");
  if (j.shape.size() != 3 || j.shape[2] != 3) throw DataError("gt/joints.npy must be N x J x 3");
  for (size_t i = 0; i < j.shape[0]; ++i) {
    std::vector<Vec3> frame;
    for (size_t k = 0; k < j.shape[1]; ++k) {
      const size_t o = (i * j.shape[1] + k) * 3;
      frame.emplace_back(j.data[o], j.data[o + 1], j.data[o + 2]);
    }
    s.gt_joints.push_back(std::move(frame));
  }
  s.gt_silhouettes = read_stack_npy(dir / "gt" / "silhouettes.npy");
  s.gt_appearances = read_stack_npy(dir / "gt" / "appearances.npy");
  s.texture = read_image_npy(dir / "gt" / "texture.npy");
  if (static_cast<int>(s.gt_silhouettes.size()) != s.gt_subframes ||
      s.gt_appearances.size() != s.gt_silhouettes.size())
    throw DataError(fmt::format("scene '{}' has inconsistent sub-frame arrays", dir.string()));
  return s;
}

void write_dataset_manifest(const fs::path& root, const std::vector<ManifestEntry>& entries) {
  json doc;
  doc["version"] = kSceneFormatVersion;
  doc["count"] = entries.size();
  doc["scenes"] = json::array();
  for (const auto& e : entries)
    doc["scenes"].push_back({{"path", e.path}, {"blur_rate", e.blur_rate}, {"bucket", e.bucket}, {"seed", e.seed}});
  write_json(root / "manifest.json", doc);
}

std::vector<ManifestEntry> read_dataset_manifest(const fs::path& root) {
  const json doc = read_json(root / "manifest.json");
  std::vector<ManifestEntry> out;
  try {
    for (const auto& e : doc.at("scenes"))
      out.push_back({e.at("path").get<std::string>(), e.at("blur_rate").get<double>(),
                     e.at("bucket").get<std::string>(), e.at("seed").get<std::uint64_t>()});
  } catch (const json::exception& e) {
    throw DataError(fmt::format("invalid dataset manifest: {}", e.what()));
  }
  return out;
}

}  // namespace blurpose
