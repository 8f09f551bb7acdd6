#include "blurpose/solver.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "blurpose/render.hpp"
#include "blurpose/rotation.hpp"

namespace blurpose {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct FrameWork {
  FrameRender render;
  std::vector<Image> silhouettes;
  std::vector<Image> appearances;
};

void check_scenes(const BodyModel& body, const SolveState& state, std::span<const BlurScene> scenes,
                  const SolveConfig& config) {
  if (scenes.empty()) throw DataError("no scenes to solve");
  if (state.motions.size() != scenes.size())
    throw DataError(fmt::format("state has {} frames but {} scenes were given", state.motions.size(),
                                scenes.size()));
  if (config.mode == SolveMode::single && scenes.size() != 1)
    throw DataError("single-frame mode takes exactly one scene");
  if (config.mode == SolveMode::multi && scenes.size() < 2)
    throw DataError("multi-frame mode needs at least two scenes");
  for (const auto& s : scenes) {
    if (!s.image.same_shape(scenes[0].image))
      throw DataError("scene dimensions differ between frames");
    if (s.camera.width != s.image.width || s.camera.height != s.image.height)
      throw DataError("camera size does not match the scene image");
  }
  for (const auto& m : state.motions)
    if (m.joints != body.joint_count()) throw DataError("motion joint count differs from body");
  if (state.beta.size() != body.shape_dim()) throw DataError("shape vector has the wrong length");
  if (state.texture_logits.height != body.texture_height() ||
      state.texture_logits.width != body.texture_width() || state.texture_logits.channels != 3)
    throw DataError("texture size differs from the body atlas");
}

// Forward pass shared by evaluate and gradient.
LossReport forward(const BodyModel& body, const SolveState& state, std::span<const BlurScene> scenes,
                   const SolveConfig& config, const MotionPrior* prior, const ShapedBody& shaped,
                   const Image& texture, const TexturePairs& pairs, std::vector<FrameWork>& work,
                   std::vector<char>& visible) {
  const bool multi = config.mode == SolveMode::multi;
  const TimeGrid grid = config.grid();
  const RenderSettings settings{config.sigma, true};
  LossTerms terms;
  visible.assign(body.face_count(), 0);
  work.resize(scenes.size());
  for (size_t f = 0; f < scenes.size(); ++f) {
    const BlurScene& sc = scenes[f];
    FrameWork& w = work[f];
    w.render = render_frame(body, shaped, texture, state.motions[f], grid, sc.camera, sc.background, settings);
    w.silhouettes = w.render.silhouettes();
    w.appearances = w.render.appearances();
    for (const auto& sub : w.render.subframes)
      for (int face : sub.render.visible_faces) visible[face] = 1;
    terms.image += image_loss(sc.image, w.render.composite.image);
    terms.matting += matting_loss(sc.alpha_in, w.render.composite.alpha);
    std::vector<MatX> channels;
    for (const auto& sub : w.render.subframes) channels.push_back(sub.channels);
    terms.pose += pose_prior(channels, body.joint_limits);
    terms.poly += poly_reg(state.motions[f]);
    terms.background += background_reg(w.silhouettes, w.appearances, sc.background);
    if (!multi && prior) terms.prior += motion_prior(state.motions[f], *prior);
  }
  terms.texture = texture_smoothness(texture, pairs, visible);
  terms.shape = shape_reg(state.beta);
  if (multi)
    for (size_t f = 0; f + 1 < scenes.size(); ++f)
      terms.boundary += boundary_residual(state.motions[f], state.motions[f + 1], grid);

  LossReport report = weighted_total(terms, config.weights, multi);
  report.iteration = state.iteration;
  double first = 0.0;
  for (double v : work[0].silhouettes.front().data) first += v;
  report.blur_rate = first > 0.0 ? blur_rate(work[0].silhouettes) : 0.0;
  return report;
}

const TexturePairs& pairs_for(const BodyModel& body) {
  // Cached per body instance; rebuilt only when the body changes.
  thread_local const BodyModel* cached_body = nullptr;
  thread_local size_t cached_faces = 0;
  thread_local TexturePairs cached;
  if (cached_body != &body || cached_faces != static_cast<size_t>(body.face_count()) ||
      cached.height != body.texture_height() || cached.width != body.texture_width()) {
    cached = build_texture_pairs(body);
    cached_body = &body;
    cached_faces = body.face_count();
  }
  return cached;
}

void require_finite(const LossReport& r) {
  const LossTerms& t = r.terms;
  const std::pair<const char*, double> named[] = {
      {"image", t.image}, {"matting", t.matting}, {"texture", t.texture}, {"pose", t.pose},
      {"shape", t.shape}, {"poly", t.poly}, {"background", t.background}, {"prior", t.prior},
      {"boundary", t.boundary}};
  for (const auto& [name, v] : named)
    if (!std::isfinite(v))
      throw NumericalError(fmt::format("non-finite {} loss at iteration {}", name, r.iteration));
}

}  // namespace

void SolveConfig::validate() const {
  if (iterations < 1) throw DataError("iterations must be at least 1");
  if (!(learning_rate > 0.0)) throw DataError("learning rate must be positive");
  if (!(shape_learning_rate >= 0.0) || !(texture_learning_rate >= 0.0))
    throw DataError("group learning rates must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw DataError("ADAM decay rates must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw DataError("ADAM epsilon must be positive");
  if (subframes < 1) throw DataError("need at least one sub-frame");
  if (degree < 1) throw DataError("polynomial degree must be at least 1");
  if (!(sigma > 0.0)) throw DataError("sigma must be positive");
  if (!(tau >= 0.0)) throw DataError("tau must be non-negative");
  if (mode == SolveMode::multi && subframes < 2) throw DataError("multi-frame mode needs N >= 2");
  weights.validate();
}

size_t SolveState::parameter_count() const {
  size_t n = 0;
  for (const auto& m : motions) n += static_cast<size_t>(m.coeffs.size());
  return n + static_cast<size_t>(beta.size()) + texture_logits.size();
}

VecX SolveState::pack() const {
  VecX p(parameter_count());
  Eigen::Index o = 0;
  for (const auto& m : motions) {
    p.segment(o, m.coeffs.size()) = Eigen::Map<const VecX>(m.coeffs.data(), m.coeffs.size());
    o += m.coeffs.size();
  }
  p.segment(o, beta.size()) = beta;
  o += beta.size();
  for (double v : texture_logits.data) p[o++] = v;
  return p;
}

void SolveState::unpack(const VecX& p) {
  if (static_cast<size_t>(p.size()) != parameter_count())
    throw DataError("parameter vector length differs from the state");
  Eigen::Index o = 0;
  for (auto& m : motions) {
    Eigen::Map<VecX>(m.coeffs.data(), m.coeffs.size()) = p.segment(o, m.coeffs.size());
    o += m.coeffs.size();
  }
  beta = p.segment(o, beta.size());
  o += beta.size();
  for (double& v : texture_logits.data) v = p[o++];
}

Image SolveState::texture() const {
  Image t = texture_logits;
  for (double& v : t.data) v = sigmoid(v);
  return t;
}

bool SolveState::operator==(const SolveState& o) const {
  return motions == o.motions && beta == o.beta && texture_logits == o.texture_logits &&
         adam_m == o.adam_m && adam_v == o.adam_v && iteration == o.iteration;
}

Image texture_to_logits(const Image& texture) {
  Image l = texture;
  for (double& v : l.data) {
    const double c = std::clamp(v, 1e-4, 1.0 - 1e-4);
    v = std::log(c / (1.0 - c));
  }
  return l;
}

SolveState make_state(std::vector<MotionCoeffs> motions, VecX beta, const Image& texture) {
  SolveState s;
  s.motions = std::move(motions);
  s.beta = std::move(beta);
  s.texture_logits = texture_to_logits(texture);
  s.adam_m = VecX::Zero(s.parameter_count());
  s.adam_v = VecX::Zero(s.parameter_count());
  return s;
}

LossReport evaluate(const BodyModel& body, const SolveState& state, std::span<const BlurScene> scenes,
                    const SolveConfig& config, const MotionPrior* prior) {
  check_scenes(body, state, scenes, config);
  const ShapedBody shaped = shape_body(body, state.beta);
  const Image texture = state.texture();
  std::vector<FrameWork> work;
  std::vector<char> visible;
  return forward(body, state, scenes, config, prior, shaped, texture, pairs_for(body), work, visible);
}

GradientResult gradient(const BodyModel& body, const SolveState& state,
                        std::span<const BlurScene> scenes, const SolveConfig& config,
                        const MotionPrior* prior) {
  check_scenes(body, state, scenes, config);
  const bool multi = config.mode == SolveMode::multi;
  const LossWeights& w = config.weights;
  const TimeGrid grid = config.grid();
  const RenderSettings settings{config.sigma, true};
  const ShapedBody shaped = shape_body(body, state.beta);
  const Image texture = state.texture();
  const TexturePairs& pairs = pairs_for(body);
  std::vector<FrameWork> work;
  std::vector<char> visible;

  GradientResult out;
  out.report = forward(body, state, scenes, config, prior, shaped, texture, pairs, work, visible);
  require_finite(out.report);

  FrameAdjoint adj;
  adj.beta = VecX::Zero(body.shape_dim());
  adj.texture = Image(texture.height, texture.width, 3);
  std::vector<MatX> g_motion;
  for (size_t f = 0; f < scenes.size(); ++f) {
    const BlurScene& sc = scenes[f];
    const FrameWork& fw = work[f];
    const Composite& comp = fw.render.composite;
    const Image g_img = image_loss_backward(sc.image, comp.image, w.image);
    const Image g_alpha = matting_loss_backward(sc.alpha_in, comp.alpha, w.matting);
    std::vector<SubframeAdjoint> sub =
        compose_backward(g_img, g_alpha, fw.silhouettes, fw.appearances, sc.background);
    if (w.background != 0.0) {
      const std::vector<Image> gb = background_reg_backward(fw.silhouettes, fw.appearances, sc.background, w.background);
      for (size_t i = 0; i < sub.size(); ++i)
        for (size_t p = 0; p < gb[i].size(); ++p) sub[i].appearance.data[p] += gb[i].data[p];
    }
    std::vector<MatX> channels;
    for (const auto& s : fw.render.subframes) channels.push_back(s.channels);
    const std::vector<MatX> g_ch = pose_prior_backward(channels, body.joint_limits, w.pose);

    FrameAdjoint fa;
    fa.motion = MatX::Zero(state.motions[f].rows(), state.motions[f].cols());
    fa.beta = VecX::Zero(body.shape_dim());
    fa.texture = Image(texture.height, texture.width, 3);
    backprop_frame(body, shaped, texture, state.motions[f], sc.camera, settings, fw.render, sub, g_ch, fa);
    fa.motion += poly_reg_backward(state.motions[f], w.poly);
    if (!multi && prior && w.prior != 0.0) fa.motion += motion_prior_backward(state.motions[f], *prior, w.prior);
    adj.beta += fa.beta;
    for (size_t p = 0; p < fa.texture.size(); ++p) adj.texture.data[p] += fa.texture.data[p];
    g_motion.push_back(std::move(fa.motion));
  }
  if (multi)
    for (size_t f = 0; f + 1 < scenes.size(); ++f)
      boundary_residual_backward(state.motions[f], state.motions[f + 1], grid, 1.0, g_motion[f], g_motion[f + 1]);
  if (w.texture != 0.0) texture_smoothness_backward(texture, pairs, visible, w.texture, adj.texture);
  adj.beta += shape_reg_backward(state.beta, w.shape);

  out.gradient = VecX(state.parameter_count());
  Eigen::Index o = 0;
  for (const MatX& g : g_motion) {
    out.gradient.segment(o, g.size()) = Eigen::Map<const VecX>(g.data(), g.size());
    o += g.size();
  }
  out.gradient.segment(o, adj.beta.size()) = adj.beta;
  o += adj.beta.size();
  for (size_t p = 0; p < texture.size(); ++p) {
    const double t = texture.data[p];
    out.gradient[o++] = adj.texture.data[p] * t * (1.0 - t);
  }
  if (!out.gradient.allFinite())
    throw NumericalError(fmt::format("non-finite gradient at iteration {} (total loss {})",
                                     state.iteration, out.report.total));
  return out;
}

void adam_step(SolveState& state, const VecX& grad, const SolveConfig& config) {
  const Eigen::Index n = static_cast<Eigen::Index>(state.parameter_count());
  if (grad.size() != n) throw DataError("gradient length differs from the state");
  if (state.adam_m.size() != n) state.adam_m = VecX::Zero(n);
  if (state.adam_v.size() != n) state.adam_v = VecX::Zero(n);
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  state.adam_m = b1 * state.adam_m + (1.0 - b1) * grad;
  state.adam_v = b2 * state.adam_v + (1.0 - b2) * grad.cwiseProduct(grad);
  const int t = state.iteration + 1;
  const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
  Eigen::Index motion_end = 0;
  for (const auto& m : state.motions) motion_end += m.coeffs.size();
  const Eigen::Index shape_end = motion_end + state.beta.size();
  VecX p = state.pack();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mhat = state.adam_m[i] / c1;
    const double vhat = state.adam_v[i] / c2;
    const double lr = i < motion_end ? config.learning_rate
                      : i < shape_end ? config.shape_rate()
                                      : config.texture_rate();
    p[i] -= lr * mhat / (std::sqrt(vhat) + config.adam_epsilon);
  }
  state.unpack(p);
  state.iteration = t;
}

SolveResult solve(const BodyModel& body, std::span<const BlurScene> scenes, const SolveState& init,
                  const SolveConfig& config, const MotionPrior* prior, const IterationCallback& callback) {
  config.validate();
  SolveResult out;
  out.state = init;
  const Eigen::Index n = static_cast<Eigen::Index>(init.parameter_count());
  if (out.state.adam_m.size() != n) out.state.adam_m = VecX::Zero(n);
  if (out.state.adam_v.size() != n) out.state.adam_v = VecX::Zero(n);
  for (int it = 0; it < config.iterations; ++it) {
    GradientResult g = gradient(body, out.state, scenes, config, prior);
    g.report.iteration = it;
    out.trajectory.push_back(g.report);
    if (callback) callback(g.report);
    adam_step(out.state, g.gradient, config);
  }
  LossReport last = evaluate(body, out.state, scenes, config, prior);
  require_finite(last);
  last.iteration = config.iterations;
  out.trajectory.push_back(last);
  if (callback) callback(last);
  if (out.trajectory.back().total > out.trajectory.front().total) {
    out.non_monotone = true;
    spdlog::warn("final loss {:.6g} exceeds the initial loss {:.6g}", out.trajectory.back().total,
                 out.trajectory.front().total);
  }
  return out;
}

Image texture_from_image(const BodyModel& body, const VecX& beta, const MotionCoeffs& motion,
                         const BlurScene& scene) {
  const Camera& cam = scene.camera;
  const FrameRender fr = render_frame(body, shape_body(body, beta), body.mesh.texture, motion, {1, 0.0}, cam,
                                      scene.background);
  const auto& sub = fr.subframes[0];
  const auto proj = project(cam, sub.vertices);
  Image tex = body.mesh.texture;
  const int h = tex.height, w = tex.width;
  const size_t parts = body.parts.size();
  std::vector<char> seen(static_cast<size_t>(h * w), 0);
  std::vector<Vec3> sum(parts + 1, Vec3::Zero());
  std::vector<int> count(parts + 1, 0);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const size_t t = static_cast<size_t>(r * w + c);
      const int f = body.texel_owner[t];
      if (f < 0) continue;
      const auto& face = body.mesh.faces[static_cast<size_t>(f)];
      const Vec2 a = body.mesh.uv[face[0]], b = body.mesh.uv[face[1]], d = body.mesh.uv[face[2]];
      Eigen::Matrix2d m;
      m << b - a, d - a;
      const Vec2 l = m.inverse() * (Vec2((c + 0.5) / w, (r + 0.5) / h) - a);
      const Vec2 px = (1.0 - l[0] - l[1]) * proj.pixels[face[0]] + l[0] * proj.pixels[face[1]] +
                      l[1] * proj.pixels[face[2]];
      const int x = static_cast<int>(std::floor(px.x())), y = static_cast<int>(std::floor(px.y()));
      if (x < 0 || y < 0 || x >= cam.width || y >= cam.height) continue;
      const size_t p = static_cast<size_t>(y) * static_cast<size_t>(cam.width) + static_cast<size_t>(x);
      if (sub.render.face_id[p] != f) continue;
      const double alpha = scene.alpha_in.data[p];
      if (alpha < 0.5) continue;
      Vec3 col;
      for (int k = 0; k < 3; ++k) {
        const double v = scene.image.data[p * 3 + k], bg = scene.background.data[p * 3 + k];
        col[k] = std::clamp((v - (1.0 - alpha) * bg) / alpha, 0.0, 1.0);
        tex.data[t * 3 + k] = col[k];
      }
      seen[t] = 1;
      const size_t part = static_cast<size_t>(body.face_part[static_cast<size_t>(f)]);
      sum[part] += col;
      ++count[part];
      sum[parts] += col;
      ++count[parts];
    }
  for (size_t t = 0; t < seen.size(); ++t) {
    if (seen[t]) continue;
    const int f = body.texel_owner[t];
    const size_t part = f < 0 ? parts : static_cast<size_t>(body.face_part[static_cast<size_t>(f)]);
    Vec3 col(0.5, 0.5, 0.5);
    if (count[part] > 0)
      col = sum[part] / count[part];
    else if (count[parts] > 0)
      col = sum[parts] / count[parts];
    for (int k = 0; k < 3; ++k) tex.data[t * 3 + k] = col[k];
  }
  for (double& v : tex.data) v = std::clamp(v, 0.02, 0.98);
  return tex;
}

SolveState initial_state(const BodyModel& body, std::span<const BlurScene> scenes,
                         std::vector<MotionCoeffs> motions) {
  if (scenes.empty() || motions.size() != scenes.size()) throw DataError("one initial motion per scene is required");
  const VecX beta = VecX::Zero(body.shape_dim());
  const Image tex = texture_from_image(body, beta, motions[0], scenes[0]);
  return make_state(std::move(motions), beta, tex);
}

MotionCoeffs oracle_init(const MotionCoeffs& gt, const SolveConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  PoseSample pose = pose_from_channels(channel_values(gt, 0.5), gt.joints);
  for (auto& r : pose.joint_rotations) {
    Vec3 axis(normal(rng), normal(rng), normal(rng));
    const double angle = config.init_noise * normal(rng);
    r = r * axis_angle_to_matrix(axis, angle);
  }
  return init_from_pose(pose, config.degree, gt.joints);
}

MotionCoeffs silhouette_init(const BodyModel& body, const BlurScene& scene, const MotionCoeffs& start,
                             const SolveConfig& config) {
  SolveConfig cfg = config;
  cfg.mode = SolveMode::single;
  cfg.weights = LossWeights{0, 1, 0, 0, 0, 0, 0, 0};
  cfg.iterations = config.init_iterations;
  MotionCoeffs c0 = start;
  if (c0.degree != config.degree) {
    c0 = init_from_pose(sample_at(start, 1, config.grid()), config.degree, start.joints);
  }
  // A zero axis with zero angle (or zero direction with zero distance) is a
  // stationary point of the rotation map. Any unit axis gives the same pose.
  for (int col = 0; col < c0.cols(); ++col) {
    if (c0.at(0, 0, col) != 0.0 || c0.at(1, 0, col) != 0.0 || c0.at(2, 0, col) != 0.0) continue;
    for (int ch = 0; ch < 3; ++ch) c0.at(ch, 0, col) = 1.0 / std::sqrt(3.0);
  }
  SolveState state = make_state({c0}, VecX::Zero(body.shape_dim()), body.mesh.texture);
  const std::span<const BlurScene> scenes(&scene, 1);
  const size_t motion_size = static_cast<size_t>(c0.coeffs.size());
  for (int it = 0; it < cfg.iterations; ++it) {
    GradientResult g = gradient(body, state, scenes, cfg, nullptr);
    // Only the constant coefficients move.
    for (size_t i = 0; i < static_cast<size_t>(g.gradient.size()); ++i) {
      if (i >= motion_size) {
        g.gradient[static_cast<Eigen::Index>(i)] = 0.0;
        continue;
      }
      const int row = static_cast<int>(i) / c0.cols();
      if (row % (c0.degree + 1) != 0) g.gradient[static_cast<Eigen::Index>(i)] = 0.0;
    }
    adam_step(state, g.gradient, cfg);
  }
  return init_from_pose(sample_at(state.motions[0], 1, cfg.grid()), config.degree, start.joints);
}

GradientCheckReport check_gradients(const GradientCheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const BodyModel body = make_tiny_body();
  SolveConfig config;
  config.subframes = 2;
  config.degree = 1;
  config.sigma = 1.0;
  config.tau = options.multi_frame ? 1.0 : 0.0;
  config.mode = options.multi_frame ? SolveMode::multi : SolveMode::single;
  config.weights.background = 1e-3;

  const Camera camera = make_camera(16, 16, 20.0, 1.2, 0.17);
  const int frames = options.multi_frame ? 2 : 1;
  std::vector<BlurScene> scenes(frames);
  for (auto& sc : scenes) {
    sc.camera = camera;
    sc.grid = config.grid();
    sc.image = Image(16, 16, 3);
    sc.background = Image(16, 16, 3);
    sc.alpha_in = Image(16, 16, 1);
    for (double& v : sc.image.data) v = uni(rng);
    for (double& v : sc.background.data) v = uni(rng);
    for (double& v : sc.alpha_in.data) v = uni(rng);
  }

  auto random_motion = [&]() {
    MotionCoeffs c(config.degree, body.joint_count());
    for (int col = 0; col < c.cols(); ++col)
      for (int ch = 0; ch < 4; ++ch)
        for (int k = 0; k <= c.degree; ++k) c.at(ch, k, col) = 0.15 * normal(rng);
    for (int col = 0; col < c.cols(); ++col) {
      c.at(0, 0, col) += 0.6;
      c.at(3, 0, col) += 0.3;
    }
    return c;
  };
  std::vector<MotionCoeffs> motions;
  for (int f = 0; f < frames; ++f) motions.push_back(random_motion());
  std::vector<MotionCoeffs> bank;
  for (int k = 0; k < 4; ++k) bank.push_back(random_motion());
  const BankPrior prior(bank);

  VecX beta(body.shape_dim());
  for (int b = 0; b < beta.size(); ++b) beta[b] = 0.1 * (2.0 * uni(rng) - 1.0);
  Image texture(body.texture_height(), body.texture_width(), 3);
  for (double& v : texture.data) v = 0.1 + 0.8 * uni(rng);
  SolveState state = make_state(motions, beta, texture);

  GradientResult analytic = gradient(body, state, scenes, config, &prior);
  const VecX p0 = state.pack();
  GradientCheckReport report;
  report.parameter_count = state.parameter_count();
  const size_t motion_size = static_cast<size_t>(motions[0].coeffs.size()) * frames;
  if (options.break_adjoint)
    for (size_t i = motion_size; i < motion_size + static_cast<size_t>(beta.size()); ++i)
      analytic.gradient[static_cast<Eigen::Index>(i)] = 1.5 * analytic.gradient[static_cast<Eigen::Index>(i)] + 0.1;

  for (Eigen::Index i = 0; i < p0.size(); ++i) {
    VecX p = p0;
    p[i] = p0[i] + options.step;
    state.unpack(p);
    const double lp = evaluate(body, state, scenes, config, &prior).total;
    p[i] = p0[i] - options.step;
    state.unpack(p);
    const double lm = evaluate(body, state, scenes, config, &prior).total;
    const double fd = (lp - lm) / (2.0 * options.step);
    const double a = analytic.gradient[i];
    const double abs_err = std::abs(a - fd);
    const double rel = abs_err / std::max({std::abs(a), std::abs(fd), 1e-2});
    report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
    if (rel > report.max_relative_error || report.worst_parameter < 0) {
      report.max_relative_error = rel;
      report.worst_parameter = static_cast<int>(i);
      const size_t ui = static_cast<size_t>(i);
      report.worst_group = ui < motion_size ? "motion"
                           : ui < motion_size + static_cast<size_t>(beta.size()) ? "beta"
                                                                                : "texture";
    }
  }
  state.unpack(p0);
  report.pass = report.max_relative_error <= options.tolerance &&
                report.max_absolute_error <= options.absolute_tolerance;
  return report;
}

}  // namespace blurpose
