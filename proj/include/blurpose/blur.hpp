#pragma once

#include <span>
#include <vector>

#include "blurpose/motion.hpp"
#include "blurpose/render.hpp"
#include "blurpose/types.hpp"

namespace blurpose {

// Observed blurry frame plus everything needed to explain it.
struct BlurScene {
  Image image;       // H x W x 3
  Image background;  // H x W x 3
  Image alpha_in;    // H x W x 1, matting estimate
  Camera camera;
  TimeGrid grid;

  void validate() const;
};

struct Composite {
  Image image;  // (1 - alpha) B + (1/N) sum S_i F_i
  Image alpha;  // (1/N) sum S_i
};

Composite compose(std::span<const Image> silhouettes, std::span<const Image> appearances,
                  const Image& background);
Composite compose(std::span<const RenderOutput> renders, const Image& background);

struct SubframeAdjoint {
  Image silhouette;
  Image appearance;
};

// Adjoints of every sub-frame silhouette and appearance. grad_alpha may be
// empty.
std::vector<SubframeAdjoint> compose_backward(const Image& grad_image, const Image& grad_alpha,
                                              std::span<const Image> silhouettes,
                                              std::span<const Image> appearances,
                                              const Image& background);

// |max_i S_i|_1 / |S_1|_1 - 1. Throws DataError when S_1 is empty.
double blur_rate(std::span<const Image> silhouettes);
double blur_rate(std::span<const RenderOutput> renders);

// 1 where value > threshold, else 0.
Image threshold_mask(const Image& values, double threshold = 0.5);
// Per-pixel max over the list.
Image union_mask(std::span<const Image> silhouettes);

}  // namespace blurpose
