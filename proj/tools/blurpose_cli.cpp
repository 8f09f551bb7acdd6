// blurpose: generate | solve | eval | render | check
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "blurpose/blur.hpp"
#include "blurpose/data.hpp"
#include "blurpose/eval.hpp"
#include "blurpose/humanoid.hpp"
#include "blurpose/io.hpp"
#include "blurpose/losses.hpp"
#include "blurpose/pipeline.hpp"
#include "blurpose/solver.hpp"

using namespace blurpose;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("BLURPOSE_SEED");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (*end != '\0') throw UsageError(fmt::format("BLURPOSE_SEED='{}' is not an unsigned integer", v));
  return s;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first failure by
// index is rethrown after all workers stop.
template <class F>
void parallel_for(size_t n, int jobs, F&& fn) {
  const size_t workers = std::min<size_t>(std::max(jobs, 1), n);
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (size_t i = next++; i < n && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
          failed = true;
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Run manifest written next to the outputs of every command.
class RunRecord {
 public:
  RunRecord(std::string command, std::vector<std::string> argv) {
    doc_["command"] = std::move(command);
    doc_["argv"] = std::move(argv);
    doc_["build_id"] = build_id();
    doc_["inputs"] = json::array();
    doc_["outputs"] = json::array();
    doc_["timings"] = json::object();
  }
  void set(const std::string& key, json value) { doc_[key] = std::move(value); }
  void input(const fs::path& p) { doc_["inputs"].push_back(p.string()); }
  void stage(const std::string& name, double secs) {
    std::lock_guard lock(mu_);
    doc_["timings"][name] = secs;
  }
  void output(const fs::path& p) {
    std::lock_guard lock(mu_);
    outputs_.push_back(p.string());
  }
  void write(const fs::path& path) {
    std::sort(outputs_.begin(), outputs_.end());
    for (const auto& o : outputs_)
      if (!fs::exists(o)) throw DataError(fmt::format("output '{}' is missing", o));
    doc_["outputs"] = outputs_;
    doc_["timings"]["total"] = seconds_since(start_);
    write_json(path, doc_);
  }

 private:
  json doc_;
  std::vector<std::string> outputs_;
  std::mutex mu_;
  Clock::time_point start_ = Clock::now();
};

BlurBand parse_band(const std::string& spec) {
  std::string s = spec;
  s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == '[' || c == ']' || c == ')' || c == ' '; }),
          s.end());
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw UsageError(fmt::format("bucket '{}' is not of the form lo,hi", spec));
  try {
    size_t a = 0, b = 0;
    const double lo = std::stod(s.substr(0, comma), &a), hi = std::stod(s.substr(comma + 1), &b);
    if (a != comma || b != s.size() - comma - 1) throw std::invalid_argument("trailing");
    if (!(lo < hi)) throw UsageError(fmt::format("bucket '{}' must have lo < hi", spec));
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw UsageError(fmt::format("bucket '{}' is not of the form lo,hi", spec));
  }
}

std::vector<double> parse_edges(const std::string& spec) {
  std::vector<double> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::logic_error&) {
      throw UsageError(fmt::format("bad bucket edge '{}'", item));
    }
  }
  if (out.size() < 2) throw UsageError("need at least two bucket edges");
  return out;
}

// A config document may be a plain config or a run manifest holding one.
json config_document(const std::string& path) {
  if (path.empty()) return json::object();
  json doc = read_json(path);
  if (doc.contains("command") && doc.contains("config")) return doc.at("config");
  return doc;
}

Image sub_frame_composite(const SubframeState& s, const Image& background) {
  Image out = background;
  const Image& sil = s.render.silhouette;
  const Image& app = s.render.appearance;
  for (size_t p = 0; p < out.pixel_count(); ++p)
    for (int c = 0; c < out.channels; ++c) {
      const double a = sil.data[p];
      out.data[p * out.channels + c] = a * app.data[p * 3 + c] + (1.0 - a) * background.data[p * out.channels + c];
    }
  return out;
}

// Strip of sub-frame composites plus the recomposed blurry image.
void write_renders(const fs::path& dir, const FrameRender& fr, const Image& background, RunRecord& rec) {
  std::vector<Image> frames;
  for (const auto& s : fr.subframes) frames.push_back(sub_frame_composite(s, background));
  write_png(dir / "subframes.png", hstack(frames));
  write_png(dir / "recomposed.png", fr.composite.image);
  rec.output(dir / "subframes.png");
  rec.output(dir / "recomposed.png");
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string out, config, bucket;
  int count = 1;
  int frames = 1;
  std::optional<double> tau;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

int cmd_generate(const GenerateArgs& a, const std::vector<std::string>& argv) {
  RunRecord rec("generate", argv);
  GenerationConfig g = generation_from_json(config_document(a.config));
  if (!a.bucket.empty()) g.band = parse_band(a.bucket);
  if (a.tau) g.tau = *a.tau;
  g.validate();
  if (a.count < 0) throw UsageError("--count must be non-negative");
  if (a.frames < 1) throw UsageError("--frames must be at least 1");
  const std::uint64_t seed = a.seed ? *a.seed : env_seed().value_or(0);
  rec.set("config", generation_to_json(g));
  rec.set("seed", seed);
  rec.set("count", a.count);
  rec.set("frames", a.frames);

  const fs::path root(a.out);
  fs::create_directories(root);
  const BodyModel body = make_humanoid();
  std::vector<std::vector<ManifestEntry>> entries(static_cast<size_t>(a.count));
  const auto t0 = Clock::now();
  parallel_for(entries.size(), a.jobs, [&](size_t i) {
    const std::uint64_t s = seed + i;
    std::vector<SyntheticScene> scenes;
    if (a.frames == 1)
      scenes.push_back(generate_random_scene(s, body, g));
    else
      scenes = generate_sequence(s, a.frames, body, g);
    for (const auto& sc : scenes) {
      const std::string name =
          a.frames == 1 ? fmt::format("scene_{:04d}", i) : fmt::format("seq_{:04d}_f{}", i, sc.frame_index);
      save_scene(root / name, sc);
      rec.output(root / name / "meta.json");
      entries[i].push_back({name, sc.blur_rate, sc.bucket, sc.seed});
      spdlog::info("{}: blur rate {:.3f} {}", name, sc.blur_rate, sc.bucket);
    }
  });
  rec.stage("generate", seconds_since(t0));
  std::vector<ManifestEntry> flat;
  for (auto& e : entries) flat.insert(flat.end(), e.begin(), e.end());
  write_dataset_manifest(root, flat);
  rec.output(root / "manifest.json");
  rec.write(root / "generate_run.json");
  fmt::print("generated {} scene(s) in {}\n", flat.size(), root.string());
  return kOk;
}

// ---------------------------------------------------------------- solve

// Flags mirroring SolveConfig. Only flags given on the command line override
// the config document.
struct SolveFlags {
  std::map<std::string, CLI::Option*> opts;
  int iterations = 0, subframes = 0, degree = 0, init_iterations = 0;
  double learning_rate = 0, shape_learning_rate = 0, texture_learning_rate = 0, adam_beta1 = 0,
         adam_beta2 = 0, adam_epsilon = 0, sigma = 0, tau = 0, init_noise = 0;
  std::string mode, init;
  std::uint64_t seed = 0;
  std::map<std::string, double> weights{{"image", 0},  {"matting", 0}, {"texture", 0},    {"pose", 0},
                                        {"shape", 0},  {"poly", 0},    {"background", 0}, {"prior", 0}};

  void add(CLI::App* app) {
    auto both = [](const std::string& f) {
      std::string dash = f;
      std::replace(dash.begin(), dash.end(), '_', '-');
      return dash == f ? "--" + f : "--" + f + ",--" + dash;
    };
    opts["iterations"] = app->add_option(both("iterations"), iterations, "ADAM iterations");
    opts["learning_rate"] = app->add_option(both("learning_rate"), learning_rate, "ADAM step size");
    opts["shape_learning_rate"] =
        app->add_option(both("shape_learning_rate"), shape_learning_rate, "step size for beta (0: learning_rate)");
    opts["texture_learning_rate"] = app->add_option(both("texture_learning_rate"), texture_learning_rate,
                                                    "step size for the texture (0: learning_rate)");
    opts["adam_beta1"] = app->add_option(both("adam_beta1"), adam_beta1);
    opts["adam_beta2"] = app->add_option(both("adam_beta2"), adam_beta2);
    opts["adam_epsilon"] = app->add_option(both("adam_epsilon"), adam_epsilon);
    opts["subframes"] = app->add_option(both("subframes"), subframes, "sub-frames per blurry frame (N)");
    opts["degree"] = app->add_option(both("degree"), degree, "polynomial degree (d)");
    opts["sigma"] = app->add_option(both("sigma"), sigma, "soft silhouette falloff in pixels");
    opts["tau"] = app->add_option(both("tau"), tau, "exposure gap in sub-frames");
    opts["mode"] = app->add_option(both("mode"), mode, "single | multi")->check(CLI::IsMember({"single", "multi"}));
    opts["init"] =
        app->add_option(both("init"), init, "oracle | silhouette")->check(CLI::IsMember({"oracle", "silhouette"}));
    opts["init_noise"] = app->add_option(both("init_noise"), init_noise, "oracle joint noise, rad");
    opts["init_iterations"] = app->add_option(both("init_iterations"), init_iterations);
    opts["seed"] = app->add_option(both("seed"), seed);
    for (auto& [name, value] : weights)
      opts["weights." + name] = app->add_option("--weights." + name + ",--w-" + name, value,
                                                fmt::format("weight of the {} term", name));
  }

  json patch() const {
    json doc = json::object();
    auto put = [&](const std::string& key, const json& v) {
      if (opts.at(key)->count() > 0) doc[key] = v;
    };
    put("iterations", iterations);
    put("learning_rate", learning_rate);
    put("shape_learning_rate", shape_learning_rate);
    put("texture_learning_rate", texture_learning_rate);
    put("adam_beta1", adam_beta1);
    put("adam_beta2", adam_beta2);
    put("adam_epsilon", adam_epsilon);
    put("subframes", subframes);
    put("degree", degree);
    put("sigma", sigma);
    put("tau", tau);
    put("mode", mode);
    put("init", init);
    put("init_noise", init_noise);
    put("init_iterations", init_iterations);
    put("seed", seed);
    for (const auto& [name, value] : weights)
      if (opts.at("weights." + name)->count() > 0) doc["weights"][name] = value;
    return doc;
  }
};

struct SolveArgs {
  std::vector<std::string> scenes;
  std::string out, config, bank;
  int bank_size = 32;
  int jobs = 1;
  SolveFlags flags;
};

struct LoadedScene {
  fs::path dir;
  std::string name;
  BlurScene scene;
  json meta;
};

LoadedScene load_input(const fs::path& dir) {
  LoadedScene s;
  s.dir = dir;
  s.name = fs::path(dir).lexically_normal().filename().string();
  if (s.name.empty()) s.name = fs::path(dir).lexically_normal().parent_path().filename().string();
  s.scene = load_blur_scene(dir);
  s.meta = read_json(dir / "meta.json");
  return s;
}

MotionCoeffs initial_motion(const BodyModel& body, const LoadedScene& s, const SolveConfig& cfg) {
  if (cfg.init == InitMode::oracle) {
    const fs::path gt = s.dir / "gt" / "motion.json";
    if (!fs::exists(gt)) throw DataError(fmt::format("oracle init needs '{}'", gt.string()));
    return oracle_init(motion_from_json(read_json(gt)), cfg,
                       oracle_seed(cfg.seed, s.meta.value("seed", std::uint64_t{0}), s.meta.value("frame_index", 0)));
  }
  const MotionCoeffs start = init_from_pose(PoseSample::identity(body.joint_count()), cfg.degree, body.joint_count());
  return silhouette_init(body, s.scene, start, cfg);
}

std::unique_ptr<BankPrior> make_prior(const SolveArgs& a, const SolveConfig& cfg, const BodyModel& body,
                                      RunRecord& rec) {
  if (cfg.mode != SolveMode::single || cfg.weights.prior <= 0.0) return nullptr;
  std::vector<MotionCoeffs> bank;
  if (!a.bank.empty()) {
    const json doc = read_json(a.bank);
    rec.input(a.bank);
    for (const auto& m : doc) bank.push_back(motion_from_json(m));
  } else {
    if (a.bank_size < 1) throw UsageError("--bank-size must be positive");
    GenerationConfig g;
    g.degree = cfg.degree;
    g.band = {0.05, 1.1};
    for (int k = 0; k < a.bank_size; ++k)
      bank.push_back(sample_motion(1000 + static_cast<std::uint64_t>(k), g.band, body, VecX::Zero(body.shape_dim()), g));
  }
  return std::make_unique<BankPrior>(std::move(bank));
}

// Solves frames jointly (one entry in single mode) and writes all outputs
// under `dir`.
void run_solve(const BodyModel& body, const std::vector<LoadedScene>& inputs, const SolveConfig& cfg,
               const MotionPrior* prior, const fs::path& dir, RunRecord& rec) {
  fs::create_directories(dir);
  const std::string tag = cfg.mode == SolveMode::single ? inputs[0].name : "sequence";
  auto t0 = Clock::now();
  std::vector<MotionCoeffs> motions;
  for (const auto& s : inputs) motions.push_back(initial_motion(body, s, cfg));
  std::vector<BlurScene> scenes;
  for (const auto& s : inputs) {
    scenes.push_back(s.scene);
    scenes.back().grid = cfg.grid();
  }
  const SolveState init = initial_state(body, scenes, motions);
  rec.stage("init:" + tag, seconds_since(t0));
  const fs::path log_path = dir / "loss.jsonl";
  std::ofstream log(log_path);
  if (!log) throw DataError(fmt::format("cannot write '{}'", log_path.string()));
  rec.output(log_path);
  t0 = Clock::now();
  SolveResult result;
  try {
    result = solve(body, scenes, init, cfg, prior, [&](const LossReport& r) {
      log << report_to_json(r).dump() << '\n';
      log.flush();
    });
  } catch (const NumericalError&) {
    spdlog::error("{}: solve aborted, partial log in {}", tag, log_path.string());
    throw;
  }
  rec.stage("solve:" + tag, seconds_since(t0));

  t0 = Clock::now();
  save_state(dir / "state", result.state);
  rec.output(dir / "state" / "state.json");
  const Image texture = result.state.texture();
  const ShapedBody shaped = shape_body(body, result.state.beta);
  for (size_t f = 0; f < inputs.size(); ++f) {
    const fs::path fdir = cfg.mode == SolveMode::single ? dir : dir / inputs[f].name;
    if (cfg.mode == SolveMode::multi) {
      SolveState slice = result.state;
      slice.motions = {result.state.motions[f]};
      slice.adam_m = VecX::Zero(static_cast<Eigen::Index>(slice.parameter_count()));
      slice.adam_v = slice.adam_m;
      save_state(fdir / "state", slice);
      rec.output(fdir / "state" / "state.json");
    }
    const FrameRender fr = render_frame(body, shaped, texture, result.state.motions[f], cfg.grid(),
                                        scenes[f].camera, scenes[f].background, {cfg.sigma, true});
    write_renders(fdir, fr, scenes[f].background, rec);
  }
  write_png(dir / "texture.png", texture);
  rec.output(dir / "texture.png");
  rec.stage("render:" + tag, seconds_since(t0));
  const LossReport& last = result.trajectory.back();
  spdlog::info("{}: loss {:.6g} -> {:.6g} (image {:.3g}) after {} iterations", tag, result.trajectory.front().total,
               last.total, last.terms.image, cfg.iterations);
}

int cmd_solve(const SolveArgs& a, const std::vector<std::string>& argv) {
  RunRecord rec("solve", argv);
  SolveConfig base;
  if (auto s = env_seed()) base.seed = *s;
  SolveConfig cfg = config_from_json(config_document(a.config), base);
  cfg = config_from_json(a.flags.patch(), cfg);
  rec.set("config", config_to_json(cfg));
  rec.set("seed", cfg.seed);
  rec.set("bank", a.bank.empty() ? json(a.bank_size) : json(a.bank));
  if (cfg.mode == SolveMode::multi && a.scenes.size() < 2)
    throw UsageError("multi-frame mode needs at least two consecutive scenes");

  const auto t0 = Clock::now();
  std::vector<LoadedScene> inputs;
  for (const auto& s : a.scenes) {
    inputs.push_back(load_input(s));
    rec.input(s);
  }
  rec.stage("load", seconds_since(t0));
  if (cfg.mode == SolveMode::multi) {
    const std::string seq = inputs[0].meta.value("sequence_id", "");
    for (size_t f = 0; f < inputs.size(); ++f) {
      if (inputs[f].meta.value("sequence_id", "") != seq)
        throw DataError("multi-frame scenes must come from one sequence");
      if (f > 0 && inputs[f].meta.value("frame_index", 0) != inputs[f - 1].meta.value("frame_index", 0) + 1)
        throw DataError("multi-frame scenes must be consecutive frames in order");
    }
  }

  const fs::path out(a.out);
  fs::create_directories(out);
  const BodyModel body = make_humanoid();
  const auto tp = Clock::now();
  const auto prior = make_prior(a, cfg, body, rec);
  rec.stage("prior", seconds_since(tp));

  if (cfg.mode == SolveMode::multi) {
    run_solve(body, inputs, cfg, prior.get(), out, rec);
  } else {
    std::vector<std::string> names;
    for (const auto& s : inputs) names.push_back(s.name);
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end())
      throw UsageError("scene directory names must be unique");
    parallel_for(inputs.size(), a.jobs, [&](size_t i) {
      run_solve(body, {inputs[i]}, cfg, prior.get(), out / inputs[i].name, rec);
    });
  }
  rec.write(out / "solve_run.json");
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string results, dataset, out, edges;
  double sigma = 1.0;
  int jobs = 1;
};

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv) {
  RunRecord rec("eval", argv);
  const fs::path results(a.results), dataset(a.dataset);
  rec.input(results);
  rec.input(dataset);
  const std::vector<double> edges = a.edges.empty() ? default_bucket_edges() : parse_edges(a.edges);
  rec.set("config", {{"edges", edges}, {"sigma", a.sigma}});
  const std::vector<ManifestEntry> entries = read_dataset_manifest(dataset);
  std::vector<ManifestEntry> matched;
  for (const auto& e : entries) {
    if (fs::exists(results / e.path / "state" / "state.json"))
      matched.push_back(e);
    else
      spdlog::warn("no result for scene '{}', skipped", e.path);
  }
  if (matched.empty()) throw DataError(fmt::format("no scene in '{}' has a result in '{}'", dataset.string(),
                                                   results.string()));
  const BodyModel body = make_humanoid();
  std::vector<SceneResult> scores(matched.size());
  const auto t0 = Clock::now();
  parallel_for(matched.size(), a.jobs, [&](size_t i) {
    const SyntheticScene gt = load_scene(dataset / matched[i].path);
    const SolveState st = load_state(results / matched[i].path / "state");
    if (st.motions.size() != 1)
      throw DataError(fmt::format("result for '{}' holds {} frames, expected one", matched[i].path, st.motions.size()));
    scores[i] = score_scene(body, gt, st.beta, st.motions[0], a.sigma);
    scores[i].name = matched[i].path;
  });
  rec.stage("score", seconds_since(t0));

  const fs::path out = a.out.empty() ? results : fs::path(a.out);
  fs::create_directories(out);
  const BucketTable table = bucket_report(scores, edges);
  std::ofstream(out / "eval_table.txt") << table.text();
  std::ofstream(out / "eval_table.csv") << table.csv();
  {
    std::ofstream per(out / "eval_scenes.csv");
    per << "scene,blur_rate,mpjpe_mm,pa_mpjpe_mm,iou,iou_subframe\n";
    for (const auto& r : scores)
      per << fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", r.name, r.blur_rate, r.mpjpe, r.pa_mpjpe, r.iou,
                         r.iou_subframe);
  }
  for (const char* f : {"eval_table.txt", "eval_table.csv", "eval_scenes.csv"}) rec.output(out / f);
  rec.set("skipped", entries.size() - matched.size());
  rec.write(out / "eval_run.json");
  fmt::print("{}", table.text());
  if (matched.size() < entries.size())
    fmt::print("{} of {} scene(s) skipped without results\n", entries.size() - matched.size(), entries.size());
  return kOk;
}

// ---------------------------------------------------------------- render

struct RenderArgs {
  std::string scene, state, out;
  int subframes = 0;
  int frame = 0;
  double sigma = 1.0;
};

int cmd_render(const RenderArgs& a, const std::vector<std::string>& argv) {
  RunRecord rec("render", argv);
  const fs::path scene_dir(a.scene), out(a.out);
  rec.input(scene_dir);
  const LoadedScene in = load_input(scene_dir);
  const BodyModel body = make_humanoid();
  MotionCoeffs motion;
  VecX beta;
  Image texture;
  if (a.state.empty()) {
    const SyntheticScene gt = load_scene(scene_dir);
    motion = gt.motion;
    beta = gt.beta;
    texture = gt.texture;
  } else {
    rec.input(a.state);
    const SolveState st = load_state(a.state);
    if (a.frame < 0 || a.frame >= static_cast<int>(st.motions.size()))
      throw UsageError(fmt::format("--frame {} is out of range for {} frame(s)", a.frame, st.motions.size()));
    motion = st.motions[static_cast<size_t>(a.frame)];
    beta = st.beta;
    texture = st.texture();
  }
  const TimeGrid grid{a.subframes > 0 ? a.subframes : in.scene.grid.count, in.scene.grid.tau};
  if (!(a.sigma > 0.0)) throw UsageError("--sigma must be positive");
  rec.set("config", {{"subframes", grid.count}, {"tau", grid.tau}, {"sigma", a.sigma}, {"frame", a.frame}});
  const auto t0 = Clock::now();
  fs::create_directories(out);
  const ShapedBody shaped = shape_body(body, beta);
  const FrameRender fr =
      render_frame(body, shaped, texture, motion, grid, in.scene.camera, in.scene.background, {a.sigma, true});
  write_renders(out, fr, in.scene.background, rec);
  write_stack_npy(out / "silhouettes.npy", fr.silhouettes());
  rec.output(out / "silhouettes.npy");
  const SubframeState& mid = fr.subframes[fr.subframes.size() / 2];
  write_obj(out / "mesh.obj", mid.vertices, body.mesh.uv, body.mesh.faces);
  write_json(out / "skeleton.json", skeleton_to_json(shaped.skeleton, body.mesh.weights));
  write_png(out / "texture.png", texture);
  for (const char* f : {"mesh.obj", "skeleton.json", "texture.png"}) rec.output(out / f);
  rec.stage("render", seconds_since(t0));
  rec.write(out / "render_run.json");
  return kOk;
}

// ---------------------------------------------------------------- check

struct CheckArgs {
  std::optional<std::uint64_t> seed;
  bool break_adjoint = false;
  std::string out;
};

// Small random scene on the two-joint body for the forward identities.
struct TinyScene {
  BodyModel body = make_tiny_body();
  Camera camera = make_camera(16, 16, 20.0, 1.2, 0.17);
  Image background{16, 16, 3};
  MotionCoeffs motion;
};

TinyScene tiny_scene(std::uint64_t seed) {
  TinyScene t;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (double& v : t.background.data) v = uni(rng);
  t.motion = MotionCoeffs(2, t.body.joint_count());
  for (int col = 0; col < t.motion.cols(); ++col)
    for (int ch = 0; ch < 4; ++ch)
      for (int k = 0; k <= 2; ++k) t.motion.at(ch, k, col) = 0.15 * normal(rng);
  for (int col = 0; col < t.motion.cols(); ++col) {
    t.motion.at(0, 0, col) += 0.6;
    t.motion.at(3, 0, col) += 0.3;
  }
  return t;
}

int cmd_check(const CheckArgs& a, const std::vector<std::string>& argv) {
  RunRecord rec("check", argv);
  const std::uint64_t seed = a.seed ? *a.seed : env_seed().value_or(0);
  rec.set("seed", seed);
  rec.set("config", {{"break_adjoint", a.break_adjoint}});
  std::vector<std::string> lines;
  bool pass = true;
  const auto t0 = Clock::now();
  for (bool multi : {false, true}) {
    GradientCheckOptions o;
    o.seed = seed;
    o.multi_frame = multi;
    o.break_adjoint = a.break_adjoint;
    const GradientCheckReport r = check_gradients(o);
    pass = pass && r.pass;
    lines.push_back(fmt::format("{} gradient {}-frame: max relative error {:.3e}, max absolute error {:.3e} "
                                "({} parameters, worst #{} in {})",
                                r.pass ? "ok  " : "FAIL", multi ? "multi" : "single", r.max_relative_error,
                                r.max_absolute_error, r.parameter_count, r.worst_parameter, r.worst_group));
  }
  rec.stage("gradients", seconds_since(t0));

  const auto t1 = Clock::now();
  const TinyScene t = tiny_scene(seed);
  const ShapedBody shaped = shape_body(t.body, VecX::Zero(t.body.shape_dim()));
  const TimeGrid grid{8, 0.0};
  {
    MotionCoeffs still = t.motion;
    for (int ch = 0; ch < 4; ++ch)
      for (int k = 1; k <= still.degree; ++k) still.coeffs.row(still.row(ch, k)).setZero();
    const FrameRender fr = render_frame(t.body, shaped, t.body.mesh.texture, still, grid, t.camera, t.background);
    std::vector<Image> masks;
    for (const Image& s : fr.silhouettes()) masks.push_back(threshold_mask(s));
    const double rate = blur_rate(masks);
    const bool ok = rate <= 1e-6;
    pass = pass && ok;
    lines.push_back(fmt::format("{} zero-motion blur rate {:.3e}", ok ? "ok  " : "FAIL", rate));
  }
  {
    const Image empty(16, 16, 1);
    const std::vector<Image> sils(4, empty), apps(4, Image(16, 16, 3));
    const Composite c = compose(sils, apps, t.background);
    const bool ok = c.image.data == t.background.data;
    pass = pass && ok;
    lines.push_back(fmt::format("{} empty foreground reproduces the background", ok ? "ok  " : "FAIL"));
  }
  {
    const FrameRender fwd = render_frame(t.body, shaped, t.body.mesh.texture, t.motion, grid, t.camera, t.background);
    const FrameRender bwd =
        render_frame(t.body, shaped, t.body.mesh.texture, reverse(t.motion), grid, t.camera, t.background);
    double diff = 0.0;
    for (size_t i = 0; i < fwd.composite.image.data.size(); ++i)
      diff = std::max(diff, std::abs(fwd.composite.image.data[i] - bwd.composite.image.data[i]));
    const bool ok = diff <= 1e-5;
    pass = pass && ok;
    lines.push_back(fmt::format("{} time reversal max pixel difference {:.3e}", ok ? "ok  " : "FAIL", diff));
  }
  rec.stage("properties", seconds_since(t1));
  lines.push_back(pass ? "PASS" : "FAIL");
  for (const auto& l : lines) fmt::print("{}\n", l);
  if (!a.out.empty()) {
    const fs::path out(a.out);
    fs::create_directories(out);
    std::ofstream(out / "check_report.txt") << fmt::format("{}\n", fmt::join(lines, "\n"));
    rec.output(out / "check_report.txt");
    rec.write(out / "check_run.json");
  }
  return pass ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Motion-blurred body pose recovery by differentiable rendering"};
  app.require_subcommand(1);
  app.set_version_flag("--version", build_id());
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace | debug | info | warn | error | off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "render a synthetic dataset");
  gen->add_option("--out,-o", ga.out, "dataset directory")->required();
  gen->add_option("--config,-c", ga.config, "generation config JSON");
  gen->add_option("--count,-n", ga.count, "number of scenes (sequences with --frames > 1)");
  gen->add_option("--bucket,-b", ga.bucket, "blur-rate band lo,hi");
  gen->add_option("--frames", ga.frames, "consecutive frames per sequence");
  gen->add_option("--tau", ga.tau, "exposure gap in sub-frames");
  gen->add_option("--seed,-s", ga.seed, "base seed (default: BLURPOSE_SEED or 0)");
  gen->add_option("--jobs,-j", ga.jobs, "parallel scenes")->check(CLI::PositiveNumber);

  SolveArgs sa;
  auto* sol = app.add_subcommand("solve", "recover motion, shape and texture");
  sol->add_option("scenes", sa.scenes, "scene directories (consecutive frames in multi mode)")->required();
  sol->add_option("--out,-o", sa.out, "output directory")->required();
  sol->add_option("--config,-c", sa.config, "solve config JSON or a previous solve_run.json");
  sol->add_option("--bank", sa.bank, "motion bank JSON (array of motions) for the prior");
  sol->add_option("--bank-size", sa.bank_size, "generated bank size when --bank is absent");
  sol->add_option("--jobs,-j", sa.jobs, "parallel scenes in single mode")->check(CLI::PositiveNumber);
  sa.flags.add(sol);

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "score results against a dataset");
  ev->add_option("--results,-r", ea.results, "solve output directory")->required();
  ev->add_option("--dataset,-d", ea.dataset, "dataset directory")->required();
  ev->add_option("--out,-o", ea.out, "table directory (default: results)");
  ev->add_option("--edges", ea.edges, "comma-separated bucket edges");
  ev->add_option("--sigma", ea.sigma, "soft silhouette falloff for the IoU renders");
  ev->add_option("--jobs,-j", ea.jobs, "parallel scenes")->check(CLI::PositiveNumber);

  RenderArgs ra;
  auto* ren = app.add_subcommand("render", "render a scene's ground truth or a solved state");
  ren->add_option("--scene", ra.scene, "scene directory")->required();
  ren->add_option("--state", ra.state, "state directory (default: ground truth)");
  ren->add_option("--out,-o", ra.out, "output directory")->required();
  ren->add_option("--subframes", ra.subframes, "sub-frames (default: the scene's)");
  ren->add_option("--frame", ra.frame, "frame of a multi-frame state");
  ren->add_option("--sigma", ra.sigma, "soft silhouette falloff in pixels");

  CheckArgs ca;
  auto* chk = app.add_subcommand("check", "gradient and forward-model self-check");
  chk->add_option("--seed,-s", ca.seed, "seed (default: BLURPOSE_SEED or 0)");
  chk->add_flag("--break-adjoint", ca.break_adjoint, "corrupt one adjoint (negative control)");
  chk->add_option("--out,-o", ca.out, "write the report and run manifest here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));
  spdlog::set_pattern("[%l] %v");

  try {
    if (*gen) return cmd_generate(ga, args);
    if (*sol) return cmd_solve(sa, args);
    if (*ev) return cmd_eval(ea, args);
    if (*ren) return cmd_render(ra, args);
    if (*chk) return cmd_check(ca, args);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const NumericalError& e) {
    spdlog::error("numerical failure: {}", e.what());
    return kNumerical;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return kData;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kData;
  } catch (const json::exception& e) {
    spdlog::error("malformed JSON: {}", e.what());
    return kData;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kData;
  }
  return kUsage;
}
