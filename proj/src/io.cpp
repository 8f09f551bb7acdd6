#include "blurpose/io.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

#include <fmt/format.h>

namespace blurpose {

#ifndef BLURPOSE_BUILD_ID
#define BLURPOSE_BUILD_ID "unknown"
#endif

std::string build_id() { return BLURPOSE_BUILD_ID; }

namespace {

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const json& j) {
  if (!j.is_array() || j.size() != 3) throw DataError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

template <typename T>
void maybe(const json& doc, const char* key, T& value) {
  if (doc.contains(key)) value = doc.at(key).get<T>();
}

}  // namespace

size_t NpyArray::count() const {
  size_t n = 1;
  for (size_t s : shape) n *= s;
  return n;
}

void write_npy(const fs::path& path, std::span<const size_t> shape, std::span<const double> data,
               NpyType type) {
  size_t n = 1;
  for (size_t s : shape) n *= s;
  if (n != data.size()) throw DataError("array data does not match its shape");
  std::string dims;
  for (size_t s : shape) dims += fmt::format("{}, ", s);
  if (shape.size() > 1) dims.resize(dims.size() - 1);
  if (shape.size() > 1 && dims.back() == ',') dims.pop_back();
  std::string header = fmt::format("{{'descr': '{}', 'fortran_order': False, 'shape': ({}), }}",
                                   type == NpyType::f32 ? "<f4" : "<f8", dims);
  const size_t total = 10 + header.size() + 1;
  header.append((64 - total % 64) % 64, ' ');
  header.push_back('\n');
  std::ofstream out = open_out(path);
  const char magic[] = {'\x93', 'N', 'U', 'M', 'P', 'Y', 1, 0};
  out.write(magic, 8);
  const uint16_t hlen = static_cast<uint16_t>(header.size());
  const unsigned char lenb[2] = {static_cast<unsigned char>(hlen & 0xff), static_cast<unsigned char>(hlen >> 8)};
  out.write(reinterpret_cast<const char*>(lenb), 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  if (type == NpyType::f32) {
    std::vector<float> buf(data.begin(), data.end());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
  } else {
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * 8));
  }
  if (!out) throw DataError(fmt::format("failed writing '{}'", path.string()));
}

NpyArray read_npy(const fs::path& path) {
  std::ifstream in = open_in(path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0)
    throw DataError(fmt::format("'{}' is not an NPY file", path.string()));
  size_t hlen = 0;
  if (magic[6] == 1) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    hlen = b[0] | (b[1] << 8);
  } else if (magic[6] == 2 || magic[6] == 3) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    hlen = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<size_t>(b[3]) << 24);
  } else {
    throw DataError(fmt::format("unsupported NPY version in '{}'", path.string()));
  }
  std::string header(hlen, '\0');
  in.read(header.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw DataError(fmt::format("truncated NPY header in '{}'", path.string()));

  NpyArray arr;
  std::smatch m;
  if (!std::regex_search(header, m, std::regex("'descr':\\s*'([^']*)'")))
    throw DataError("NPY header lacks descr");
  if (m[1] == "<f4")
    arr.type = NpyType::f32;
  else if (m[1] == "<f8")
    arr.type = NpyType::f64;
  else
    throw DataError(fmt::format("unsupported NPY dtype '{}'", m[1].str()));
  if (std::regex_search(header, m, std::regex("'fortran_order':\\s*True")))
    throw DataError("Fortran-ordered NPY arrays are not supported");
  if (!std::regex_search(header, m, std::regex("'shape':\\s*\\(([^)]*)\\)")))
    throw DataError("NPY header lacks shape");
  std::stringstream dims(m[1].str());
  std::string tok;
  while (std::getline(dims, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(" "));
    if (tok.empty()) continue;
    arr.shape.push_back(std::stoul(tok));
  }
  const size_t n = arr.count();
  arr.data.resize(n);
  if (arr.type == NpyType::f32) {
    std::vector<float> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 4));
    for (size_t i = 0; i < n; ++i) arr.data[i] = buf[i];
  } else {
    in.read(reinterpret_cast<char*>(arr.data.data()), static_cast<std::streamsize>(n * 8));
  }
  if (!in) throw DataError(fmt::format("truncated NPY data in '{}'", path.string()));
  return arr;
}

void write_image_npy(const fs::path& path, const Image& image, NpyType type) {
  std::vector<size_t> shape = {static_cast<size_t>(image.height), static_cast<size_t>(image.width)};
  if (image.channels != 1) shape.push_back(static_cast<size_t>(image.channels));
  write_npy(path, shape, image.data, type);
}

Image read_image_npy(const fs::path& path) {
  NpyArray a = read_npy(path);
  if (a.shape.size() != 2 && a.shape.size() != 3)
    throw DataError(fmt::format("'{}' is not an image array", path.string()));
  Image img(static_cast<int>(a.shape[0]), static_cast<int>(a.shape[1]),
            a.shape.size() == 3 ? static_cast<int>(a.shape[2]) : 1);
  img.data = std::move(a.data);
  return img;
}

void write_stack_npy(const fs::path& path, std::span<const Image> images, NpyType type) {
  if (images.empty()) throw DataError("cannot write an empty image stack");
  const Image& f = images.front();
  std::vector<size_t> shape = {images.size(), static_cast<size_t>(f.height), static_cast<size_t>(f.width)};
  if (f.channels != 1) shape.push_back(static_cast<size_t>(f.channels));
  std::vector<double> data;
  data.reserve(images.size() * f.size());
  for (const Image& im : images) {
    if (!im.same_shape(f)) throw DataError("image stack entries differ in shape");
    data.insert(data.end(), im.data.begin(), im.data.end());
  }
  write_npy(path, shape, data, type);
}

std::vector<Image> read_stack_npy(const fs::path& path) {
  NpyArray a = read_npy(path);
  if (a.shape.size() != 3 && a.shape.size() != 4)
    throw DataError(fmt::format("'{}' is not an image stack", path.string()));
  const int h = static_cast<int>(a.shape[1]), w = static_cast<int>(a.shape[2]);
  const int c = a.shape.size() == 4 ? static_cast<int>(a.shape[3]) : 1;
  std::vector<Image> out;
  const size_t per = static_cast<size_t>(h) * w * c;
  for (size_t i = 0; i < a.shape[0]; ++i) {
    Image im(h, w, c);
    std::copy(a.data.begin() + static_cast<std::ptrdiff_t>(i * per),
              a.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * per), im.data.begin());
    out.push_back(std::move(im));
  }
  return out;
}

void write_png(const fs::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw DataError("PNG export needs 1 or 3 channels");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::vector<unsigned char> buf(image.size());
  for (size_t i = 0; i < image.size(); ++i)
    buf[i] = static_cast<unsigned char>(std::lround(std::clamp(image.data[i], 0.0, 1.0) * 255.0));
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(image.width);
  pi.height = static_cast<png_uint_32>(image.height);
  pi.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&pi, path.c_str(), 0, buf.data(), 0, nullptr))
    throw DataError(fmt::format("cannot write PNG '{}': {}", path.string(), pi.message));
}

Image read_png(const fs::path& path) {
  if (!fs::exists(path)) throw DataError(fmt::format("missing PNG '{}'", path.string()));
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&pi, path.c_str()))
    throw DataError(fmt::format("cannot read PNG '{}': {}", path.string(), pi.message));
  const bool color = (pi.format & PNG_FORMAT_FLAG_COLOR) != 0;
  pi.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image img(static_cast<int>(pi.height), static_cast<int>(pi.width), color ? 3 : 1);
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(pi));
  if (!png_image_finish_read(&pi, nullptr, buf.data(), 0, nullptr))
    throw DataError(fmt::format("cannot decode PNG '{}': {}", path.string(), pi.message));
  for (size_t i = 0; i < img.size(); ++i) img.data[i] = buf[i] / 255.0;
  return img;
}

Image hstack(std::span<const Image> images) {
  if (images.empty()) return {};
  const Image& f = images.front();
  Image out(f.height, f.width * static_cast<int>(images.size()), f.channels);
  for (size_t i = 0; i < images.size(); ++i) {
    if (!images[i].same_shape(f)) throw DataError("strip images differ in shape");
    for (int y = 0; y < f.height; ++y)
      for (int x = 0; x < f.width; ++x)
        for (int c = 0; c < f.channels; ++c)
          out.at(y, static_cast<int>(i) * f.width + x, c) = images[i].at(y, x, c);
  }
  return out;
}

json read_json(const fs::path& path) {
  std::ifstream in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("invalid JSON in '{}': {}", path.string(), e.what()));
  }
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
}

json motion_to_json(const MotionCoeffs& c) {
  std::vector<double> flat(c.coeffs.data(), c.coeffs.data() + c.coeffs.size());
  return {{"degree", c.degree}, {"joints", c.joints}, {"channels", flat}};
}

MotionCoeffs motion_from_json(const json& doc) {
  try {
    MotionCoeffs c(doc.at("degree").get<int>(), doc.at("joints").get<int>());
    const auto flat = doc.at("channels").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != c.coeffs.size())
      throw DataError("motion coefficient count does not match degree and joints");
    std::copy(flat.begin(), flat.end(), c.coeffs.data());
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw DataError(fmt::format("invalid motion JSON: {}", e.what()));
  }
}

json camera_to_json(const Camera& c) {
  const Mat3& r = c.world_to_camera.rotation;
  std::vector<double> rot;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) rot.push_back(r(i, j));
  return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width},
          {"height", c.height}, {"rotation", rot}, {"translation", vec_json(c.world_to_camera.translation)}};
}

Camera camera_from_json(const json& doc) {
  try {
    Camera c;
    c.fx = doc.at("fx").get<double>();
    c.fy = doc.at("fy").get<double>();
    c.cx = doc.at("cx").get<double>();
    c.cy = doc.at("cy").get<double>();
    c.width = doc.at("width").get<int>();
    c.height = doc.at("height").get<int>();
    const auto rot = doc.at("rotation").get<std::vector<double>>();
    if (rot.size() != 9) throw DataError("camera rotation needs 9 entries");
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) c.world_to_camera.rotation(i, j) = rot[i * 3 + j];
    c.world_to_camera.translation = json_vec(doc.at("translation"));
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw DataError(fmt::format("invalid camera JSON: {}", e.what()));
  }
}

json weights_to_json(const LossWeights& w) {
  return {{"image", w.image}, {"matting", w.matting}, {"texture", w.texture},
          {"pose", w.pose}, {"shape", w.shape}, {"poly", w.poly},
          {"background", w.background}, {"prior", w.prior}};
}

LossWeights weights_from_json(const json& doc, LossWeights w) {
  maybe(doc, "image", w.image);
  maybe(doc, "matting", w.matting);
  maybe(doc, "texture", w.texture);
  maybe(doc, "pose", w.pose);
  maybe(doc, "shape", w.shape);
  maybe(doc, "poly", w.poly);
  maybe(doc, "background", w.background);
  maybe(doc, "prior", w.prior);
  w.validate();
  return w;
}

json config_to_json(const SolveConfig& c) {
  return {{"iterations", c.iterations},
          {"learning_rate", c.learning_rate},
          {"shape_learning_rate", c.shape_learning_rate},
          {"texture_learning_rate", c.texture_learning_rate},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"subframes", c.subframes},
          {"degree", c.degree},
          {"sigma", c.sigma},
          {"tau", c.tau},
          {"weights", weights_to_json(c.weights)},
          {"mode", c.mode == SolveMode::single ? "single" : "multi"},
          {"init", c.init == InitMode::oracle ? "oracle" : "silhouette"},
          {"init_noise", c.init_noise},
          {"init_iterations", c.init_iterations},
          {"seed", c.seed}};
}

SolveConfig config_from_json(const json& doc, SolveConfig c) {
  try {
    maybe(doc, "iterations", c.iterations);
    maybe(doc, "learning_rate", c.learning_rate);
    maybe(doc, "shape_learning_rate", c.shape_learning_rate);
    maybe(doc, "texture_learning_rate", c.texture_learning_rate);
    maybe(doc, "adam_beta1", c.adam_beta1);
    maybe(doc, "adam_beta2", c.adam_beta2);
    maybe(doc, "adam_epsilon", c.adam_epsilon);
    maybe(doc, "subframes", c.subframes);
    maybe(doc, "degree", c.degree);
    maybe(doc, "sigma", c.sigma);
    maybe(doc, "tau", c.tau);
    if (doc.contains("weights")) c.weights = weights_from_json(doc.at("weights"), c.weights);
    if (doc.contains("mode")) {
      const std::string m = doc.at("mode").get<std::string>();
      if (m != "single" && m != "multi") throw DataError(fmt::format("unknown mode '{}'", m));
      c.mode = m == "single" ? SolveMode::single : SolveMode::multi;
    }
    if (doc.contains("init")) {
      const std::string m = doc.at("init").get<std::string>();
      if (m != "oracle" && m != "silhouette") throw DataError(fmt::format("unknown init '{}'", m));
      c.init = m == "oracle" ? InitMode::oracle : InitMode::silhouette;
    }
    maybe(doc, "init_noise", c.init_noise);
    maybe(doc, "init_iterations", c.init_iterations);
    maybe(doc, "seed", c.seed);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("invalid config: {}", e.what()));
  }
  c.validate();
  return c;
}

json report_to_json(const LossReport& r) {
  const LossTerms& t = r.terms;
  return {{"iteration", r.iteration}, {"total", r.total},      {"blur_rate", r.blur_rate},
          {"image", t.image},         {"matting", t.matting},  {"texture", t.texture},
          {"pose", t.pose},           {"shape", t.shape},      {"poly", t.poly},
          {"background", t.background}, {"prior", t.prior},    {"boundary", t.boundary}};
}

void save_state(const fs::path& dir, const SolveState& state) {
  fs::create_directories(dir);
  json doc;
  doc["version"] = 1;
  doc["iteration"] = state.iteration;
  doc["beta"] = std::vector<double>(state.beta.data(), state.beta.data() + state.beta.size());
  doc["motions"] = json::array();
  for (const auto& m : state.motions) doc["motions"].push_back(motion_to_json(m));
  write_json(dir / "state.json", doc);
  write_image_npy(dir / "texture_logits.npy", state.texture_logits, NpyType::f64);
  const size_t n = static_cast<size_t>(state.adam_m.size());
  std::vector<double> moments(state.adam_m.data(), state.adam_m.data() + n);
  moments.insert(moments.end(), state.adam_v.data(), state.adam_v.data() + state.adam_v.size());
  const size_t shape[2] = {2, n};
  if (static_cast<size_t>(state.adam_v.size()) == n) write_npy(dir / "adam.npy", shape, moments, NpyType::f64);
}

SolveState load_state(const fs::path& dir) {
  const json doc = read_json(dir / "state.json");
  if (doc.value("version", 0) != 1) throw DataError("unsupported checkpoint version");
  SolveState s;
  s.iteration = doc.at("iteration").get<int>();
  const auto beta = doc.at("beta").get<std::vector<double>>();
  s.beta = Eigen::Map<const VecX>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  for (const auto& m : doc.at("motions")) s.motions.push_back(motion_from_json(m));
  s.texture_logits = read_image_npy(dir / "texture_logits.npy");
  const Eigen::Index n = static_cast<Eigen::Index>(s.parameter_count());
  s.adam_m = VecX::Zero(n);
  s.adam_v = VecX::Zero(n);
  if (fs::exists(dir / "adam.npy")) {
    const NpyArray a = read_npy(dir / "adam.npy");
    if (a.shape.size() != 2 || a.shape[0] != 2 || a.shape[1] != static_cast<size_t>(n))
      throw DataError("optimizer moments do not match the checkpoint");
    s.adam_m = Eigen::Map<const VecX>(a.data.data(), n);
    s.adam_v = Eigen::Map<const VecX>(a.data.data() + n, n);
  }
  return s;
}

void write_obj(const fs::path& path, std::span<const Vec3> vertices, std::span<const Vec2> uv,
               std::span<const std::array<int, 3>> faces) {
  std::ofstream out = open_out(path);
  for (const Vec3& v : vertices) out << fmt::format("v {:.9g} {:.9g} {:.9g}\n", v.x(), v.y(), v.z());
  for (const Vec2& t : uv) out << fmt::format("vt {:.9g} {:.9g}\n", t.x(), 1.0 - t.y());
  const bool has_uv = uv.size() == vertices.size();
  for (const auto& f : faces) {
    if (has_uv)
      out << fmt::format("f {0}/{0} {1}/{1} {2}/{2}\n", f[0] + 1, f[1] + 1, f[2] + 1);
    else
      out << fmt::format("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1);
  }
}

ObjMesh read_obj(const fs::path& path) {
  std::ifstream in = open_in(path);
  ObjMesh m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      ls >> v.x() >> v.y() >> v.z();
      m.vertices.push_back(v);
    } else if (tag == "vt") {
      Vec2 t;
      ls >> t.x() >> t.y();
      t.y() = 1.0 - t.y();
      m.uv.push_back(t);
    } else if (tag == "f") {
      std::array<int, 3> f{};
      for (int k = 0; k < 3; ++k) {
        std::string tok;
        if (!(ls >> tok)) throw DataError(fmt::format("{}:{}: face needs three vertices", path.string(), lineno));
        f[k] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
      }
      m.faces.push_back(f);
    } else {
      continue;
    }
    if (ls.fail()) throw DataError(fmt::format("{}:{}: malformed record", path.string(), lineno));
  }
  for (const auto& f : m.faces)
    for (int idx : f)
      if (idx < 0 || idx >= static_cast<int>(m.vertices.size()))
        throw DataError(fmt::format("{}: face index out of range", path.string()));
  return m;
}

json skeleton_to_json(const SkeletonTemplate& skeleton, const MatX& weights) {
  json doc;
  doc["joints"] = json::array();
  for (int k = 0; k < skeleton.joint_count(); ++k)
    doc["joints"].push_back({{"name", skeleton.names[k]},
                             {"parent", skeleton.parent[k]},
                             {"offset", vec_json(skeleton.rest_offsets[k])}});
  doc["weights"] = json::array();
  for (Eigen::Index v = 0; v < weights.rows(); ++v) {
    std::vector<double> row(weights.row(v).data(), weights.row(v).data() + weights.cols());
    doc["weights"].push_back(row);
  }
  return doc;
}

SkeletonTemplate skeleton_from_json(const json& doc, MatX* weights) {
  try {
    SkeletonTemplate s;
    for (const auto& j : doc.at("joints")) {
      s.names.push_back(j.at("name").get<std::string>());
      s.parent.push_back(j.at("parent").get<int>());
      s.rest_offsets.push_back(json_vec(j.at("offset")));
    }
    s.validate();
    if (weights) {
      const auto& rows = doc.at("weights");
      *weights = MatX::Zero(static_cast<Eigen::Index>(rows.size()), s.joint_count());
      for (size_t v = 0; v < rows.size(); ++v) {
        const auto r = rows[v].get<std::vector<double>>();
        if (static_cast<int>(r.size()) != s.joint_count()) throw DataError("weight row has the wrong length");
        for (int k = 0; k < s.joint_count(); ++k) (*weights)(static_cast<Eigen::Index>(v), k) = r[k];
      }
    }
    return s;
  } catch (const json::exception& e) {
    throw DataError(fmt::format("invalid skeleton JSON: {}", e.what()));
  }
}

}  // namespace blurpose
