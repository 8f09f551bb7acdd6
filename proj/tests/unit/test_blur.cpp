#include <doctest.h>

#include "blurpose/blur.hpp"
#include "helpers.hpp"

using namespace blurpose;
using testing::Rng;

namespace {

Image box(int h, int w, int x0, int y0, int x1, int y1) {
  Image m(h, w, 1);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) m.at(y, x) = 1.0;
  return m;
}

Image solid(int h, int w, double r, double g, double b) {
  Image im(h, w, 3);
  for (size_t p = 0; p < im.pixel_count(); ++p) {
    im.data[p * 3] = r;
    im.data[p * 3 + 1] = g;
    im.data[p * 3 + 2] = b;
  }
  return im;
}

}  // namespace

TEST_CASE("compose: empty foreground returns the background exactly") {
  Rng rng(1);
  const Image bg = rng.image(9, 7, 3);
  std::vector<Image> sil(5, Image(9, 7, 1)), app;
  for (int i = 0; i < 5; ++i) app.push_back(rng.image(9, 7, 3));
  const Composite c = compose(sil, app, bg);
  CHECK(c.image == bg);
  CHECK(testing::max_abs_diff(c.alpha, Image(9, 7, 1)) == 0.0);
}

TEST_CASE("compose: one hard sub-frame") {
  const Image bg = solid(6, 6, 0.1, 0.2, 0.3);
  const std::vector<Image> sil{box(6, 6, 1, 1, 4, 4)}, app{solid(6, 6, 0.9, 0.8, 0.7)};
  const Composite c = compose(sil, app, bg);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      const bool in = sil[0].at(y, x) == 1.0;
      CHECK(c.image.at(y, x, 0) == doctest::Approx(in ? 0.9 : 0.1));
      CHECK(c.image.at(y, x, 2) == doctest::Approx(in ? 0.7 : 0.3));
      CHECK(c.alpha.at(y, x) == (in ? 1.0 : 0.0));
    }
}

TEST_CASE("compose: two disjoint sub-frames average with the background") {
  const Image bg = solid(4, 8, 0.2, 0.2, 0.2);
  const std::vector<Image> sil{box(4, 8, 0, 0, 4, 4), box(4, 8, 4, 0, 8, 4)};
  const std::vector<Image> app{solid(4, 8, 1, 0, 0), solid(4, 8, 0, 1, 0)};
  const Composite c = compose(sil, app, bg);
  CHECK(c.image.at(1, 1, 0) == doctest::Approx(0.6));
  CHECK(c.image.at(1, 1, 1) == doctest::Approx(0.1));
  CHECK(c.image.at(1, 6, 0) == doctest::Approx(0.1));
  CHECK(c.image.at(1, 6, 1) == doctest::Approx(0.6));
  CHECK(c.alpha.at(2, 2) == 0.5);
}

TEST_CASE("compose rejects mismatched inputs") {
  const std::vector<Image> sil{Image(4, 4, 1)}, app{Image(4, 5, 3)};
  CHECK_THROWS_AS(compose(sil, app, Image(4, 4, 3)), DataError);
  CHECK_THROWS_AS(compose(std::vector<Image>{}, std::vector<Image>{}, Image(4, 4, 3)), DataError);
}

TEST_CASE("blur rate") {
  const Image a = box(8, 8, 0, 0, 4, 4);
  CHECK(blur_rate(std::vector<Image>{a, a, a}) == 0.0);
  CHECK(blur_rate(std::vector<Image>{a, box(8, 8, 4, 4, 8, 8)}) == doctest::Approx(1.0));
  CHECK(blur_rate(std::vector<Image>{a, box(8, 8, 2, 0, 6, 4)}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(blur_rate(std::vector<Image>{Image(8, 8, 1), a}), DataError);
}

TEST_CASE("threshold and union masks") {
  Image v(1, 3, 1);
  v.data = {0.2, 0.5, 0.7};
  CHECK(threshold_mask(v).data == std::vector<double>{0, 0, 1});
  Image w(1, 3, 1);
  w.data = {0.9, 0.1, 0.3};
  CHECK(union_mask(std::vector<Image>{v, w}).data == std::vector<double>{0.9, 0.5, 0.7});
}

TEST_CASE("compose_backward") {
  Rng rng(2);
  const int n = 3, h = 5, w = 6;
  std::vector<Image> sil, app;
  for (int i = 0; i < n; ++i) {
    sil.push_back(rng.image(h, w, 1));
    app.push_back(rng.image(h, w, 3));
  }
  const Image bg = rng.image(h, w, 3);

  SUBCASE("zero adjoint") {
    for (const auto& a : compose_backward(Image(h, w, 3), Image(h, w, 1), sil, app, bg)) {
      CHECK(a.silhouette.data == Image(h, w, 1).data);
      CHECK(a.appearance.data == Image(h, w, 3).data);
    }
  }
  SUBCASE("foreground equal to background kills the silhouette adjoint") {
    const std::vector<Image> same(n, bg);
    for (const auto& a : compose_backward(rng.image(h, w, 3), Image(), sil, same, bg))
      for (double v : a.silhouette.data) CHECK(v == doctest::Approx(0.0));
  }
  SUBCASE("finite differences") {
    const Image gi = rng.image(h, w, 3, -1, 1), ga = rng.image(h, w, 1, -1, 1);
    auto loss = [&](const std::vector<Image>& s, const std::vector<Image>& a) {
      const Composite c = compose(s, a, bg);
      double acc = 0.0;
      for (size_t k = 0; k < gi.data.size(); ++k) acc += gi.data[k] * c.image.data[k];
      for (size_t k = 0; k < ga.data.size(); ++k) acc += ga.data[k] * c.alpha.data[k];
      return acc;
    };
    const auto adj = compose_backward(gi, ga, sil, app, bg);
    for (int i = 0; i < n; ++i) {
      for (size_t k = 0; k < sil[i].data.size(); ++k) {
        auto p = sil, m = sil;
        p[i].data[k] += 1e-6;
        m[i].data[k] -= 1e-6;
        CHECK(std::abs((loss(p, app) - loss(m, app)) / 2e-6 - adj[i].silhouette.data[k]) < 1e-8);
      }
      for (size_t k = 0; k < app[i].data.size(); ++k) {
        auto p = app, m = app;
        p[i].data[k] += 1e-6;
        m[i].data[k] -= 1e-6;
        CHECK(std::abs((loss(sil, p) - loss(sil, m)) / 2e-6 - adj[i].appearance.data[k]) < 1e-8);
      }
    }
  }
}
