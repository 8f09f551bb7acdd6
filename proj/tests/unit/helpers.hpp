#pragma once

#include <cmath>
#include <random>

#include "blurpose/motion.hpp"
#include "blurpose/rotation.hpp"
#include "blurpose/types.hpp"

namespace testing {

using namespace blurpose;

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(gen); }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(gen); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); }
  Vec3 vec3(double sd = 1.0) { return Vec3(normal(sd), normal(sd), normal(sd)); }
  Mat3 rotation() { return Eigen::AngleAxisd(uniform(-3.0, 3.0), vec3().normalized()).toRotationMatrix(); }
  Image image(int h, int w, int c, double lo = 0.0, double hi = 1.0) {
    Image im(h, w, c);
    for (double& v : im.data) v = uniform(lo, hi);
    return im;
  }
  MotionCoeffs motion(int degree, int joints, double sd = 0.3) {
    MotionCoeffs m(degree, joints);
    for (Eigen::Index i = 0; i < m.coeffs.size(); ++i) m.coeffs.data()[i] = normal(sd);
    return m;
  }
};

inline double rel_err(double a, double b, double floor = 1e-2) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace testing
