// Acceptance suite. Prints one PASS/FAIL line per criterion; pass numbers on
// the command line to run a subset.

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "blurpose/data.hpp"
#include "blurpose/eval.hpp"
#include "blurpose/io.hpp"
#include "blurpose/solver.hpp"

using namespace blurpose;

namespace {

// Tolerances and sizes, fixed.
constexpr double kGradRelTol = 1e-2;
constexpr double kGradAbsTol = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr double kIdentityTol = 1e-6;
constexpr double kReversalTol = 1e-5;
constexpr int kReversalScenes = 20;
constexpr int kRecoveryScenes = 10;
constexpr double kRecoveryIou = 0.75;
constexpr double kRecoveryRatio = 0.6;
constexpr int kTrendScenes = 5;
constexpr int kContinuityScenes = 5;
constexpr double kContinuityRatio = 0.1;
constexpr double kTimestampTol = 1e-9;
constexpr int kSimilarityTrials = 100;
constexpr double kPaDriftMm = 1e-9;
constexpr int kMattingPairs = 1000;
constexpr int kOracleInstances = 50;
constexpr double kOracleTol = 1e-9;
constexpr double kRendererOracleTol = 1e-6;

struct Outcome {
  bool pass = false;
  std::string detail;
};

const BodyModel& humanoid() {
  static const BodyModel body = make_humanoid();
  return body;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double max_abs_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b)) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

double rel(double a, double b) {
  const double d = std::abs(a - b);
  return d == 0.0 ? 0.0 : d / std::max(std::abs(b), 1e-300);
}

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t s) : gen(s) {}
  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(gen); }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(gen); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); }
  Image image(int h, int w, int c) {
    Image im(h, w, c);
    for (double& v : im.data) v = uniform();
    return im;
  }
  MotionCoeffs motion(int degree, int joints, double sd) {
    MotionCoeffs m(degree, joints);
    for (Eigen::Index i = 0; i < m.coeffs.size(); ++i) m.coeffs.data()[i] = normal(sd);
    return m;
  }
};

// ---------------------------------------------------------------------------
// 1. Gradient correctness.

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  GradientCheckOptions o;
  o.tolerance = kGradRelTol;
  o.absolute_tolerance = kGradAbsTol;
  const GradientCheckReport r = check_gradients(o);
  const double secs = seconds_since(t0);
  Outcome out;
  out.pass = r.max_relative_error <= kGradRelTol && r.max_absolute_error <= kGradAbsTol && secs <= kGradSeconds;
  out.detail = fmt::format("max rel {:.2e}, max abs {:.2e} over {} parameters in {:.1f} s", r.max_relative_error,
                           r.max_absolute_error, r.parameter_count, secs);
#ifdef BLURPOSE_CLI_PATH
  const int rc = std::system(fmt::format("{} check > /dev/null 2>&1", BLURPOSE_CLI_PATH).c_str());
  out.pass = out.pass && rc == 0;
  out.detail += fmt::format(", cli check exit {}", rc);
#endif
  return out;
}

// ---------------------------------------------------------------------------
// 2. Forward-model identities.

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / fmt::format("blurpose_accept_{}_{}", tag, ::getpid())) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Outcome forward_identities() {
  const BodyModel& body = humanoid();
  GenerationConfig g;
  std::vector<std::string> notes;
  bool ok = true;

  // (a) Zero motion: blur rate 0 and the blurry image equals one sharp render.
  MotionCoeffs still = sample_motion(11, {0.2, 0.3}, body, VecX::Zero(body.shape_dim()), g);
  for (int k = 1; k <= still.degree; ++k)
    for (int ch = 0; ch < MotionCoeffs::kChannels; ++ch) still.coeffs.row(still.row(ch, k)).setZero();
  const Image bg = procedural_background(BackgroundKind::noise, g.height, g.width, 3);
  const ShapedBody shaped = shape_body(body, VecX::Zero(body.shape_dim()));
  const FrameRender blurred = render_frame(body, shaped, body.mesh.texture, still, {8, 0.0}, g.camera(), bg);
  const FrameRender sharp = render_frame(body, shaped, body.mesh.texture, still, {1, 0.0}, g.camera(), bg);
  std::vector<Image> masks;
  for (const Image& s : blurred.silhouettes()) masks.push_back(threshold_mask(s));
  const double rate = blur_rate(masks);
  const double diff = max_abs_diff(blurred.composite.image, sharp.composite.image);
  ok = ok && rate <= kIdentityTol && diff <= kIdentityTol;
  notes.push_back(fmt::format("static rate {:.1e} diff {:.1e}", rate, diff));

  // (b) Empty foreground returns the background exactly.
  Rng rng(2);
  const Image b2 = rng.image(32, 24, 3);
  std::vector<Image> sil(8, Image(32, 24, 1)), app;
  for (int i = 0; i < 8; ++i) app.push_back(rng.image(32, 24, 3));
  const Composite empty = compose(sil, app, b2);
  const bool exact = empty.image == b2;
  ok = ok && exact;
  notes.push_back(exact ? "empty == B" : "empty != B");

  // (c) Stored sub-frames recompose the stored image bit for bit.
  TempDir tmp("identity");
  bool bits = true;
  for (std::uint64_t seed : {0, 1, 2}) {
    save_scene(tmp.path / std::to_string(seed), generate_random_scene(seed, body, g));
    const SyntheticScene s = load_scene(tmp.path / std::to_string(seed));
    Image re = compose(s.gt_silhouettes, s.gt_appearances, s.scene.background).image;
    round_to_float(re);
    bits = bits && re == s.scene.image;
  }
  ok = ok && bits;
  notes.push_back(bits ? "recomposition bit-exact" : "recomposition differs");
  return {ok, fmt::format("{}", fmt::join(notes, ", "))};
}

// ---------------------------------------------------------------------------
// 3. Time reversal.

Outcome time_reversal() {
  const BodyModel& body = humanoid();
  double worst = 0.0;
  for (int s = 0; s < kReversalScenes; ++s) {
    GenerationConfig g;
    const double lo = 0.05 + 0.05 * (s % 10);
    g.band = {lo, lo + 0.1};
    const SyntheticScene sc = generate_random_scene(300 + static_cast<std::uint64_t>(s), body, g);
    const ShapedBody shaped = shape_body(body, sc.beta);
    for (const TimeGrid grid : {TimeGrid{8, 0.0}, TimeGrid{sc.gt_subframes, 0.0}}) {
      const Image a = render_frame(body, shaped, sc.texture, sc.motion, grid, sc.scene.camera, sc.scene.background)
                          .composite.image;
      const Image b = render_frame(body, shaped, sc.texture, reverse(sc.motion), grid, sc.scene.camera,
                                   sc.scene.background)
                          .composite.image;
      worst = std::max(worst, max_abs_diff(a, b));
    }
  }
  return {worst <= kReversalTol, fmt::format("{} scenes, max |I(C) - I(reverse C)| = {:.2e}", kReversalScenes, worst)};
}

// ---------------------------------------------------------------------------
// 4 and 5. Single-frame recovery.

struct Recovery {
  double iou = 0.0;
  double initial_mpjpe = 0.0;
  double final_mpjpe = 0.0;
};

Recovery recover(const SyntheticScene& s) {
  const BodyModel& body = humanoid();
  SolveConfig cfg;  // 200 iterations, lr 0.01, N = 8, oracle init, 0.1 rad noise
  const MotionCoeffs init = oracle_init(s.motion, cfg, oracle_seed(cfg.seed, s.seed, s.frame_index));
  BlurScene scene = s.scene;
  scene.grid = cfg.grid();
  const std::span<const BlurScene> scenes(&scene, 1);
  const SolveState start = initial_state(body, scenes, {init});
  const SolveResult r = solve(body, scenes, start, cfg);
  Recovery out;
  out.initial_mpjpe = score_scene(body, s, start.beta, start.motions[0], cfg.sigma).mpjpe;
  const SceneResult fin = score_scene(body, s, r.state.beta, r.state.motions[0], cfg.sigma);
  out.final_mpjpe = fin.mpjpe;
  out.iou = fin.iou;
  return out;
}

Recovery recover_band(BlurBand band, int count, std::uint64_t first_seed) {
  GenerationConfig g;
  g.band = band;
  Recovery mean;
  for (int i = 0; i < count; ++i) {
    const Recovery r = recover(generate_random_scene(first_seed + static_cast<std::uint64_t>(i), humanoid(), g));
    mean.iou += r.iou / count;
    mean.initial_mpjpe += r.initial_mpjpe / count;
    mean.final_mpjpe += r.final_mpjpe / count;
  }
  return mean;
}

Outcome recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const Recovery r = recover_band({0.2, 0.3}, kRecoveryScenes, 0);
  const double ratio = r.final_mpjpe / r.initial_mpjpe;
  return {r.iou >= kRecoveryIou && ratio <= kRecoveryRatio,
          fmt::format("IoU {:.3f}, MPJPE {:.1f} -> {:.1f} mm (ratio {:.3f}) in {:.0f} s", r.iou, r.initial_mpjpe,
                      r.final_mpjpe, ratio, seconds_since(t0))};
}

Outcome degradation() {
  const auto t0 = std::chrono::steady_clock::now();
  const BlurBand bands[3] = {{0.05, 0.2}, {0.2, 0.4}, {0.4, 0.6}};
  double iou[3];
  for (int b = 0; b < 3; ++b) iou[b] = recover_band(bands[b], kTrendScenes, 1000).iou;
  return {iou[0] >= iou[1] && iou[1] >= iou[2],
          fmt::format("IoU {:.3f} / {:.3f} / {:.3f} over [0.05,0.2) [0.2,0.4) [0.4,0.6) in {:.0f} s", iou[0], iou[1],
                      iou[2], seconds_since(t0))};
}

// ---------------------------------------------------------------------------
// 6. Multi-frame continuity.

Outcome continuity() {
  const BodyModel& body = humanoid();
  const auto t0 = std::chrono::steady_clock::now();
  double before = 0.0, after = 0.0;
  for (int s = 0; s < kContinuityScenes; ++s) {
    GenerationConfig g;
    const auto seq = generate_sequence(500 + static_cast<std::uint64_t>(s), 2, body, g);
    SolveConfig cfg;
    cfg.mode = SolveMode::multi;
    cfg.tau = 0.0;
    std::vector<BlurScene> scenes;
    std::vector<MotionCoeffs> motions;
    for (const auto& f : seq) {
      scenes.push_back(f.scene);
      scenes.back().grid = cfg.grid();
      motions.push_back(oracle_init(f.motion, cfg, oracle_seed(cfg.seed, f.seed, f.frame_index)));
    }
    const SolveResult r = solve(body, scenes, initial_state(body, scenes, motions), cfg);
    before += r.trajectory.front().terms.boundary;
    after += r.trajectory.back().terms.boundary;
  }
  const bool reduced = after <= kContinuityRatio * before;

  // With a gap of tau sub-frames the next frame starts at N + tau: ground
  // truth sequences are continuous there and not at N.
  GenerationConfig g;
  g.tau = 4.0;
  const auto seq = generate_sequence(600, 2, body, g);
  const TimeGrid gap{8, 4.0}, none{8, 0.0};
  const double at_gap = boundary_residual(seq[0].motion, seq[1].motion, gap);
  const double at_end = boundary_residual(seq[0].motion, seq[1].motion, none);
  const bool timestamp = at_gap <= kTimestampTol && at_end > 1e3 * kTimestampTol;

  // And a tau = 4 solve runs and reduces its residual as well.
  SolveConfig cfg;
  cfg.mode = SolveMode::multi;
  cfg.tau = 4.0;
  std::vector<BlurScene> scenes;
  std::vector<MotionCoeffs> motions;
  for (const auto& f : seq) {
    scenes.push_back(f.scene);
    scenes.back().grid = cfg.grid();
    motions.push_back(oracle_init(f.motion, cfg, oracle_seed(cfg.seed, f.seed, f.frame_index)));
  }
  const SolveResult r4 = solve(body, scenes, initial_state(body, scenes, motions), cfg);
  const double b4 = r4.trajectory.front().terms.boundary, a4 = r4.trajectory.back().terms.boundary;

  return {reduced && timestamp,
          fmt::format("tau=0 boundary {:.3f} -> {:.3f} ({:.1f}%); tau=4 GT residual {:.1e} at N+tau vs {:.2f} at N, "
                      "solve {:.3f} -> {:.3f}; {:.0f} s",
                      before, after, 100.0 * after / before, at_gap, at_end, b4, a4, seconds_since(t0))};
}

// ---------------------------------------------------------------------------
// 7. Metric properties.

Outcome metrics() {
  Rng rng(7);
  JointTrack gt(4), pred(4);
  for (int f = 0; f < 4; ++f)
    for (int j = 0; j < 16; ++j) {
      gt[f].push_back(Vec3(rng.normal(300), rng.normal(300), rng.normal(300)));
      pred[f].push_back(gt[f].back() + Vec3(rng.normal(40), rng.normal(40), rng.normal(40)));
    }
  const double base = pa_mpjpe(pred, gt);
  double drift = 0.0;
  for (int t = 0; t < kSimilarityTrials; ++t) {
    const Mat3 r = Eigen::AngleAxisd(rng.uniform(-M_PI, M_PI),
                                     Vec3(rng.normal(), rng.normal(), rng.normal()).normalized())
                       .toRotationMatrix();
    const double s = rng.uniform(0.2, 5.0);
    const Vec3 tr(rng.normal(1000), rng.normal(1000), rng.normal(1000));
    JointTrack moved = pred;
    for (auto& f : moved)
      for (Vec3& j : f) j = s * (r * j) + tr;
    drift = std::max(drift, std::abs(pa_mpjpe(moved, gt) - base));
  }

  JointTrack off = gt;
  for (auto& f : off)
    for (size_t j = 1; j < f.size(); ++j) f[j] += Vec3(30, 40, 0);
  const double fifty = mpjpe(off, gt);

  bool matting_ok = true;
  for (int t = 0; t < kMattingPairs; ++t) {
    const int h = rng.integer(1, 8), w = rng.integer(1, 8);
    Image a = rng.image(h, w, 1), b = rng.image(h, w, 1);
    if (t % 4 == 0)
      for (double& v : a.data) v = v < 0.5 ? 0.0 : 1.0;
    const double ab = matting_loss(a, b), ba = matting_loss(b, a);
    matting_ok = matting_ok && ab == ba && ab >= 0.0 && ab <= 1.0 && matting_loss(a, a) == 0.0;
  }
  return {drift <= kPaDriftMm && fifty == 50.0 && matting_ok,
          fmt::format("PA drift {:.1e} mm over {} transforms, offset MPJPE {} mm, matting bounds/symmetry {} on {} pairs",
                      drift, kSimilarityTrials, fifty, matting_ok ? "hold" : "broken", kMattingPairs)};
}

// ---------------------------------------------------------------------------
// 8. Loss oracles.

double naive_image(const Image& a, const Image& b) {
  double acc = 0.0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x)
      for (int c = 0; c < a.channels; ++c) acc += (a.at(y, x, c) - b.at(y, x, c)) * (a.at(y, x, c) - b.at(y, x, c));
  return acc / (static_cast<double>(a.height) * a.width * a.channels);
}

double naive_matting(const Image& a, const Image& b) {
  double lo = 0.0, hi = 0.0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      lo += std::min(a.at(y, x), b.at(y, x));
      hi += std::max(a.at(y, x), b.at(y, x));
    }
  return hi > 0.0 ? 1.0 - lo / hi : 0.0;
}

double naive_smoothness(const BodyModel& body, const Image& tex, const std::vector<char>& vis) {
  const int h = tex.height, w = tex.width;
  double acc = 0.0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const int fk = body.texel_owner[static_cast<size_t>(r * w + c)];
      if (fk < 0) continue;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if ((dr == 0 && dc == 0) || rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
          const int fj = body.texel_owner[static_cast<size_t>(rr * w + cc)];
          if (fj < 0 || !vis[static_cast<size_t>(fj)]) continue;
          bool related = fj == fk;
          for (int a : body.adjacency[static_cast<size_t>(fk)]) related = related || a == fj;
          if (!related) continue;
          const double cosine = body.rest_normals[static_cast<size_t>(fk)].dot(body.rest_normals[static_cast<size_t>(fj)]);
          if (cosine <= 0.0) continue;
          for (int k = 0; k < 3; ++k) acc += cosine * std::abs(tex.at(r, c, k) - tex.at(rr, cc, k));
        }
    }
  return acc / (8.0 * h * w);
}

double naive_pose(const std::vector<MatX>& chans, const std::vector<JointLimit>& limits) {
  double acc = 0.0;
  for (const MatX& m : chans)
    for (size_t k = 0; k < limits.size(); ++k) {
      const double e = std::abs(m(3, static_cast<int>(k))) - limits[k].max_angle;
      if (e > 0) acc += e * e;
    }
  return chans.empty() ? 0.0 : acc / static_cast<double>(chans.size());
}

double naive_poly(const MotionCoeffs& c) {
  double l1 = 0.0, sq = 0.0;
  for (int r = 0; r < c.coeffs.rows(); ++r)
    for (int k = 0; k < c.coeffs.cols(); ++k) {
      l1 += std::abs(c.coeffs(r, k));
      sq += c.coeffs(r, k) * c.coeffs(r, k);
    }
  return l1 + std::sqrt(sq);
}

double naive_background(const std::vector<Image>& sil, const std::vector<Image>& app, const Image& bg) {
  double acc = 0.0;
  for (size_t i = 0; i < sil.size(); ++i) {
    double sum = 0.0;
    int n = 0;
    for (int y = 0; y < bg.height; ++y)
      for (int x = 0; x < bg.width; ++x) {
        if (!(sil[i].at(y, x) > 0.5)) continue;
        double l1 = 0.0;
        for (int k = 0; k < 3; ++k) l1 += std::abs(bg.at(y, x, k) - app[i].at(y, x, k));
        sum += 1.0 / (l1 + 1e-6);
        ++n;
      }
    if (n > 0) acc += sum / n;
  }
  return sil.empty() ? 0.0 : acc / static_cast<double>(sil.size());
}

MotionCoeffs naive_canonical(MotionCoeffs c) {
  for (int k = 0; k < c.cols(); ++k)
    if (c.at(3, 0, k) < 0.0)
      for (int r = 0; r < c.rows(); ++r) c.coeffs(r, k) = -c.coeffs(r, k);
  return c;
}

double naive_prior(const MotionCoeffs& c, const std::vector<MotionCoeffs>& bank) {
  const MotionCoeffs q = naive_canonical(c);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : bank) {
    const MotionCoeffs cb = naive_canonical(b);
    double d = 0.0;
    for (int r = 0; r < q.rows(); ++r)
      for (int k = 0; k < q.cols(); ++k) d += std::abs(cb.coeffs(r, k) - q.coeffs(r, k));
    best = std::min(best, d);
  }
  return best;
}

double naive_boundary(const MotionCoeffs& a, const MotionCoeffs& b, const TimeGrid& g) {
  const double te = (g.count + g.tau - 1.0) / (g.count - 1.0);
  double acc = 0.0;
  for (int col = 0; col < a.cols(); ++col)
    for (int ch = 0; ch < 4; ++ch) {
      double va = 0, vb = 0, da = 0, db = 0;
      for (int k = 0; k <= a.degree; ++k) {
        va += a.at(ch, k, col) * std::pow(te, k);
        vb += k == 0 ? b.at(ch, 0, col) : 0.0;
        if (k >= 1) da += k * a.at(ch, k, col) * std::pow(te, k - 1);
        if (k == 1) db += b.at(ch, 1, col);
      }
      acc += std::abs(va - vb) + std::abs(da - db);
    }
  return acc;
}

Outcome loss_oracles() {
  const BodyModel tiny = make_tiny_body();
  const TexturePairs pairs = build_texture_pairs(tiny);
  Rng rng(8);
  double worst = 0.0, worst_render = 0.0;
  std::string worst_name, worst_render_name;
  auto note = [](double e, double& w, std::string& name, const char* term) {
    if (e > w) {
      w = e;
      name = term;
    }
  };
  for (int inst = 0; inst < kOracleInstances; ++inst) {
    const int h = rng.integer(3, 12), w = rng.integer(3, 12), n = rng.integer(1, 4);
    const Image a = rng.image(h, w, 3), b = rng.image(h, w, 3);
    note(rel(image_loss(a, b), naive_image(a, b)), worst, worst_name, "image");
    const Image ma = rng.image(h, w, 1), mb = rng.image(h, w, 1);
    note(rel(matting_loss(ma, mb), naive_matting(ma, mb)), worst, worst_name, "matting");

    const Image tex = rng.image(tiny.texture_height(), tiny.texture_width(), 3);
    std::vector<char> vis(static_cast<size_t>(tiny.face_count()));
    for (auto& v : vis) v = rng.uniform() < 0.7;
    note(rel(texture_smoothness(tex, pairs, vis), naive_smoothness(tiny, tex, vis)), worst, worst_name, "texture");

    std::vector<MatX> chans;
    for (int i = 0; i < n; ++i) {
      MatX m(4, tiny.joint_count() + 2);
      for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.normal(1.2);
      chans.push_back(m);
    }
    note(rel(pose_prior(chans, tiny.joint_limits), naive_pose(chans, tiny.joint_limits)), worst, worst_name, "pose");

    VecX beta(rng.integer(1, 6));
    double dot = 0.0;
    for (Eigen::Index k = 0; k < beta.size(); ++k) {
      beta[k] = rng.normal();
      dot += beta[k] * beta[k];
    }
    note(rel(shape_reg(beta), dot), worst, worst_name, "shape");

    const MotionCoeffs c = rng.motion(rng.integer(1, 3), rng.integer(1, 4), 0.5);
    note(rel(poly_reg(c), naive_poly(c)), worst, worst_name, "poly");

    std::vector<Image> sil, app;
    for (int i = 0; i < n; ++i) {
      sil.push_back(rng.image(h, w, 1));
      app.push_back(rng.image(h, w, 3));
    }
    note(rel(background_reg(sil, app, a), naive_background(sil, app, a)), worst, worst_name, "background");

    std::vector<MotionCoeffs> bank;
    for (int k = 0; k < 8; ++k) bank.push_back(rng.motion(c.degree, c.joints, 0.5));
    note(rel(motion_prior(c, BankPrior(bank)), naive_prior(c, bank)), worst, worst_name, "prior");

    const MotionCoeffs c2 = rng.motion(c.degree, c.joints, 0.5);
    const TimeGrid g{rng.integer(2, 9), static_cast<double>(rng.integer(0, 4))};
    note(rel(boundary_residual(c, c2, g), naive_boundary(c, c2, g)), worst, worst_name, "boundary");

    // Terms through the renderer on the tiny body: recompute every term of
    // evaluate() from the rendered sub-frames.
    SolveConfig cfg;
    cfg.subframes = rng.integer(2, 4);
    cfg.degree = 1;
    cfg.weights = LossWeights{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(),
                              rng.uniform(), rng.uniform(), rng.uniform(), 0.0};
    BlurScene sc;
    sc.camera = make_camera(16, 16, 20.0, 1.2, 0.17);
    sc.grid = cfg.grid();
    sc.image = rng.image(16, 16, 3);
    sc.background = rng.image(16, 16, 3);
    sc.alpha_in = rng.image(16, 16, 1);
    MotionCoeffs m = rng.motion(1, tiny.joint_count(), 0.3);
    m.at(3, 0, m.translation_column()) = 0.0;
    VecX tb(tiny.shape_dim());
    for (Eigen::Index k = 0; k < tb.size(); ++k) tb[k] = rng.normal(0.1);
    const SolveState st = make_state({m}, tb, rng.image(tiny.texture_height(), tiny.texture_width(), 3));
    const LossReport rep = evaluate(tiny, st, std::span<const BlurScene>(&sc, 1), cfg);

    const FrameRender fr = render_frame(tiny, shape_body(tiny, tb), st.texture(), m, cfg.grid(), sc.camera,
                                        sc.background, {cfg.sigma, true});
    const std::vector<Image> s = fr.silhouettes(), f = fr.appearances();
    Image ihat(16, 16, 3), alpha(16, 16, 1);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        double al = 0.0;
        for (const Image& si : s) al += si.at(y, x);
        al /= static_cast<double>(s.size());
        alpha.at(y, x) = al;
        for (int k = 0; k < 3; ++k) {
          double fg = 0.0;
          for (size_t i = 0; i < s.size(); ++i) fg += s[i].at(y, x) * f[i].at(y, x, k);
          ihat.at(y, x, k) = (1.0 - al) * sc.background.at(y, x, k) + fg / static_cast<double>(s.size());
        }
      }
    std::vector<MatX> ch;
    for (const auto& sub : fr.subframes) ch.push_back(sub.channels);
    const std::vector<char> fvis = fr.visible_faces(tiny.face_count());
    const LossTerms& t = rep.terms;
    const double terms[7][2] = {{t.image, naive_image(sc.image, ihat)},
                                {t.matting, naive_matting(sc.alpha_in, alpha)},
                                {t.texture, naive_smoothness(tiny, st.texture(), fvis)},
                                {t.pose, naive_pose(ch, tiny.joint_limits)},
                                {t.shape, tb.squaredNorm()},
                                {t.poly, naive_poly(m)},
                                {t.background, naive_background(s, f, sc.background)}};
    const char* names[7] = {"image", "matting", "texture", "pose", "shape", "poly", "background"};
    const double weights[7] = {cfg.weights.image, cfg.weights.matting, cfg.weights.texture, cfg.weights.pose,
                               cfg.weights.shape, cfg.weights.poly, cfg.weights.background};
    double total = 0.0;
    for (int k = 0; k < 7; ++k) {
      if (terms[k][1] != 0.0 || terms[k][0] != 0.0) note(rel(terms[k][0], terms[k][1]), worst_render, worst_render_name, names[k]);
      total += weights[k] * terms[k][1];
    }
    note(rel(rep.total, total), worst_render, worst_render_name, "total");
  }
  return {worst <= kOracleTol && worst_render <= kRendererOracleTol,
          fmt::format("{} instances: max rel {:.1e} ({}), through the renderer {:.1e} ({})", kOracleInstances, worst,
                      worst_name.empty() ? "-" : worst_name, worst_render,
                      worst_render_name.empty() ? "-" : worst_render_name)};
}

// ---------------------------------------------------------------------------
// 9. Determinism.

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Relative paths of every file except the per-run manifests (timings).
std::set<std::string> tree(const fs::path& root) {
  std::set<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename().string().find("_run.json") == std::string::npos)
      out.insert(fs::relative(e.path(), root).string());
  return out;
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  const auto ta = tree(a), tb = tree(b);
  if (ta != tb) {
    why = "file lists differ";
    return false;
  }
  for (const auto& f : ta)
    if (slurp(a / f) != slurp(b / f)) {
      why = f + " differs";
      return false;
    }
  return true;
}

Outcome determinism() {
  // Library: two solves from the same inputs.
  const BodyModel& body = humanoid();
  const SyntheticScene s = generate_random_scene(42, body, GenerationConfig{});
  SolveConfig cfg;
  cfg.iterations = 20;
  const MotionCoeffs init = oracle_init(s.motion, cfg, oracle_seed(cfg.seed, s.seed, 0));
  const std::span<const BlurScene> scenes(&s.scene, 1);
  const SolveState start = initial_state(body, scenes, {init});
  const bool lib = solve(body, scenes, start, cfg).state == solve(body, scenes, start, cfg).state;
  std::string detail = lib ? "library solve repeatable" : "library solve differs";
#ifdef BLURPOSE_CLI_PATH
  TempDir tmp("determinism");
  const fs::path d = tmp.path;
  auto run = [&](const std::string& args) {
    return std::system(fmt::format("{} {} > /dev/null 2>&1", BLURPOSE_CLI_PATH, args).c_str());
  };
  int rc = 0;
  rc |= run(fmt::format("generate -o {} -n 3 -b 0.2,0.3 -s 5 -j 1", (d / "data1").string()));
  rc |= run(fmt::format("generate -o {} -n 3 -b 0.2,0.3 -s 5 -j 3", (d / "data2").string()));
  std::string why;
  const bool data_same = rc == 0 && same_tree(d / "data1", d / "data2", why);
  const std::string scenes_arg = fmt::format("{0}/scene_0000 {0}/scene_0001 {0}/scene_0002", (d / "data1").string());
  rc |= run(fmt::format("solve {} -o {} --iterations 20 -j 1", scenes_arg, (d / "solve1").string()));
  rc |= run(fmt::format("solve {} -o {} --iterations 20 -j 3", scenes_arg, (d / "solve2").string()));
  std::string why2;
  const bool solve_same = rc == 0 && same_tree(d / "solve1", d / "solve2", why2);
  detail += fmt::format(", dataset -j1 vs -j3 {}, solve -j1 vs -j3 {}", data_same ? "identical" : "differs: " + why,
                        solve_same ? "identical" : "differs: " + why2);
  return {lib && data_same && solve_same, detail};
#else
  return {false, detail + ", CLI not built so --jobs cannot be checked"};
#endif
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradients},     {"forward-model identities", forward_identities},
      {"time-reversal ambiguity", time_reversal}, {"single-frame recovery", recovery},
      {"blur-rate degradation trend", degradation}, {"multi-frame continuity", continuity},
      {"metric properties", metrics},           {"loss-oracle equivalence", loss_oracles},
      {"determinism", determinism}};
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
