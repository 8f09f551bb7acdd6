#include "blurpose/blur.hpp"

#include <algorithm>

namespace blurpose {

void BlurScene::validate() const {
  if (image.channels != 3 || background.channels != 3 || alpha_in.channels != 1)
    throw DataError("scene images must be RGB and the alpha single-channel");
  if (!image.same_extent(background) || !image.same_extent(alpha_in))
    throw DataError("scene image, background and alpha differ in size");
  if (image.width != camera.width || image.height != camera.height)
    throw DataError("camera size does not match the scene image");
  camera.validate();
  for (const Image* im : {&image, &background, &alpha_in})
    for (double v : im->data)
      if (!(v >= 0.0 && v <= 1.0)) throw DataError("scene values must lie in [0,1]");
}

Composite compose(std::span<const Image> silhouettes, std::span<const Image> appearances,
                  const Image& background) {
  const size_t n = silhouettes.size();
  if (n == 0) throw DataError("compose needs at least one sub-frame");
  if (appearances.size() != n) throw DataError("silhouette and appearance counts differ");
  for (size_t i = 0; i < n; ++i)
    if (!silhouettes[i].same_extent(background) || !appearances[i].same_extent(background))
      throw DataError("sub-frame render size differs from the background");

  const size_t npix = background.pixel_count();
  Composite out{Image(background.height, background.width, 3), Image(background.height, background.width, 1)};
  const double inv = 1.0 / static_cast<double>(n);
  for (size_t p = 0; p < npix; ++p) {
    double s_sum = 0.0;
    double f_sum[3] = {0.0, 0.0, 0.0};
    for (size_t i = 0; i < n; ++i) {
      const double s = silhouettes[i].data[p];
      s_sum += s;
      for (int c = 0; c < 3; ++c) f_sum[c] += s * appearances[i].data[p * 3 + c];
    }
    const double alpha = s_sum * inv;
    out.alpha.data[p] = alpha;
    for (int c = 0; c < 3; ++c)
      out.image.data[p * 3 + c] = (1.0 - alpha) * background.data[p * 3 + c] + f_sum[c] * inv;
  }
  return out;
}

Composite compose(std::span<const RenderOutput> renders, const Image& background) {
  std::vector<Image> s, f;
  s.reserve(renders.size());
  f.reserve(renders.size());
  for (const auto& r : renders) {
    s.push_back(r.silhouette);
    f.push_back(r.appearance);
  }
  return compose(s, f, background);
}

std::vector<SubframeAdjoint> compose_backward(const Image& grad_image, const Image& grad_alpha,
                                              std::span<const Image> silhouettes,
                                              std::span<const Image> appearances,
                                              const Image& background) {
  const size_t n = silhouettes.size();
  const size_t npix = background.pixel_count();
  const bool has_ga = grad_alpha.size() == npix;
  const double inv = 1.0 / static_cast<double>(n);
  std::vector<SubframeAdjoint> out(n);
  for (size_t i = 0; i < n; ++i) {
    out[i].silhouette = Image(background.height, background.width, 1);
    out[i].appearance = Image(background.height, background.width, 3);
    for (size_t p = 0; p < npix; ++p) {
      const double s = silhouettes[i].data[p];
      double gs = has_ga ? grad_alpha.data[p] * inv : 0.0;
      for (int c = 0; c < 3; ++c) {
        const double gi = grad_image.data[p * 3 + c];
        gs += gi * (appearances[i].data[p * 3 + c] - background.data[p * 3 + c]) * inv;
        out[i].appearance.data[p * 3 + c] = gi * s * inv;
      }
      out[i].silhouette.data[p] = gs;
    }
  }
  return out;
}

double blur_rate(std::span<const Image> silhouettes) {
  if (silhouettes.empty()) throw DataError("blur rate needs at least one sub-frame");
  double first = 0.0;
  for (double v : silhouettes[0].data) first += v;
  if (!(first > 0.0)) throw DataError("no subject in first sub-frame");
  const Image u = union_mask(silhouettes);
  double total = 0.0;
  for (double v : u.data) total += v;
  return total / first - 1.0;
}

double blur_rate(std::span<const RenderOutput> renders) {
  std::vector<Image> s;
  s.reserve(renders.size());
  for (const auto& r : renders) s.push_back(r.silhouette);
  return blur_rate(s);
}

Image threshold_mask(const Image& values, double threshold) {
  Image out = values;
  for (double& v : out.data) v = v > threshold ? 1.0 : 0.0;
  return out;
}

Image union_mask(std::span<const Image> silhouettes) {
  if (silhouettes.empty()) return {};
  Image out = silhouettes[0];
  for (size_t i = 1; i < silhouettes.size(); ++i) {
    if (!silhouettes[i].same_shape(out)) throw DataError("silhouette sizes differ");
    for (size_t p = 0; p < out.size(); ++p) out.data[p] = std::max(out.data[p], silhouettes[i].data[p]);
  }
  return out;
}

}  // namespace blurpose
