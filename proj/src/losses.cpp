#include "blurpose/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

namespace blurpose {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void require_same(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) throw DataError(std::string(what) + ": image shapes differ");
}

bool owners_related(const BodyModel& body, int fa, int fb) {
  if (fa == fb) return true;
  const auto& adj = body.adjacency[fa];
  return std::find(adj.begin(), adj.end(), fb) != adj.end();
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {image, matting, texture, pose, shape, poly, background, prior})
    if (!std::isfinite(w) || w < 0.0) throw DataError("loss weights must be finite and non-negative");
}

LossReport weighted_total(const LossTerms& t, const LossWeights& w, bool multi_frame) {
  LossReport r;
  r.terms = t;
  r.total = w.image * t.image + w.matting * t.matting + w.texture * t.texture + w.pose * t.pose +
            w.shape * t.shape + w.poly * t.poly + w.background * t.background;
  if (multi_frame)
    r.total += t.boundary;
  else
    r.total += w.prior * t.prior;
  return r;
}

double image_loss(const Image& observed, const Image& rendered) {
  require_same(observed, rendered, "image loss");
  if (observed.data.empty()) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < observed.size(); ++i) {
    const double d = observed.data[i] - rendered.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(observed.size());
}

Image image_loss_backward(const Image& observed, const Image& rendered, double scale) {
  require_same(observed, rendered, "image loss");
  Image g(rendered.height, rendered.width, rendered.channels);
  const double k = 2.0 * scale / static_cast<double>(std::max<size_t>(1, observed.size()));
  for (size_t i = 0; i < observed.size(); ++i) g.data[i] = k * (rendered.data[i] - observed.data[i]);
  return g;
}

double matting_loss(const Image& alpha_in, const Image& alpha_target) {
  require_same(alpha_in, alpha_target, "matting loss");
  double lo = 0.0, hi = 0.0;
  for (size_t i = 0; i < alpha_in.size(); ++i) {
    lo += std::min(alpha_in.data[i], alpha_target.data[i]);
    hi += std::max(alpha_in.data[i], alpha_target.data[i]);
  }
  if (!(hi > 0.0)) {
    spdlog::warn("matting loss: both alpha maps are empty");
    return 0.0;
  }
  return 1.0 - lo / hi;
}

Image matting_loss_backward(const Image& alpha_in, const Image& alpha_target, double scale) {
  require_same(alpha_in, alpha_target, "matting loss");
  Image g(alpha_target.height, alpha_target.width, alpha_target.channels);
  double lo = 0.0, hi = 0.0;
  for (size_t i = 0; i < alpha_in.size(); ++i) {
    lo += std::min(alpha_in.data[i], alpha_target.data[i]);
    hi += std::max(alpha_in.data[i], alpha_target.data[i]);
  }
  if (!(hi > 0.0)) return g;
  for (size_t i = 0; i < alpha_in.size(); ++i) {
    const double a = alpha_target.data[i], b = alpha_in.data[i];
    const double dmin = a < b ? 1.0 : (a > b ? 0.0 : 0.5);
    const double dmax = 1.0 - dmin;
    g.data[i] = -scale * (dmin * hi - lo * dmax) / (hi * hi);
  }
  return g;
}

TexturePairs build_texture_pairs(const BodyModel& body) {
  TexturePairs out;
  out.height = body.texture_height();
  out.width = body.texture_width();
  out.normalizer = 8.0 * out.height * out.width;
  const auto& owner = body.texel_owner;
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      const int k = r * out.width + c;
      const int fk = owner[k];
      if (fk < 0) continue;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= out.height || cc < 0 || cc >= out.width) continue;
          const int j = rr * out.width + cc;
          const int fj = owner[j];
          if (fj < 0 || !owners_related(body, fk, fj)) continue;
          const double cosine = std::max(0.0, body.rest_normals[fk].dot(body.rest_normals[fj]));
          if (cosine <= 0.0) continue;
          out.pairs.push_back({k, j, fj, cosine});
        }
      }
    }
  }
  return out;
}

double texture_smoothness(const Image& texture, const TexturePairs& tp,
                          const std::vector<char>& face_visible) {
  if (texture.height != tp.height || texture.width != tp.width || texture.channels != 3)
    throw DataError("texture does not match the smoothness pair table");
  double acc = 0.0;
  for (const auto& p : tp.pairs) {
    if (!face_visible[p.face_j]) continue;
    double l1 = 0.0;
    for (int c = 0; c < 3; ++c) l1 += std::abs(texture.data[p.k * 3 + c] - texture.data[p.j * 3 + c]);
    acc += p.cosine * l1;
  }
  return acc / tp.normalizer;
}

void texture_smoothness_backward(const Image& texture, const TexturePairs& tp,
                                 const std::vector<char>& face_visible, double scale,
                                 Image& grad_texture) {
  const double k = scale / tp.normalizer;
  for (const auto& p : tp.pairs) {
    if (!face_visible[p.face_j]) continue;
    for (int c = 0; c < 3; ++c) {
      const double s = k * p.cosine * sign(texture.data[p.k * 3 + c] - texture.data[p.j * 3 + c]);
      grad_texture.data[p.k * 3 + c] += s;
      grad_texture.data[p.j * 3 + c] -= s;
    }
  }
}

double pose_prior(std::span<const MatX> channels, std::span<const JointLimit> limits) {
  if (channels.empty()) return 0.0;
  double acc = 0.0;
  for (const MatX& ch : channels) {
    for (size_t k = 0; k < limits.size(); ++k) {
      const double excess = std::abs(ch(3, static_cast<int>(k))) - limits[k].max_angle;
      if (excess > 0.0) acc += excess * excess;
    }
  }
  return acc / static_cast<double>(channels.size());
}

std::vector<MatX> pose_prior_backward(std::span<const MatX> channels,
                                      std::span<const JointLimit> limits, double scale) {
  std::vector<MatX> out;
  out.reserve(channels.size());
  const double inv = channels.empty() ? 0.0 : scale / static_cast<double>(channels.size());
  for (const MatX& ch : channels) {
    MatX g = MatX::Zero(ch.rows(), ch.cols());
    for (size_t k = 0; k < limits.size(); ++k) {
      const double a = ch(3, static_cast<int>(k));
      const double excess = std::abs(a) - limits[k].max_angle;
      if (excess > 0.0) g(3, static_cast<int>(k)) = inv * 2.0 * excess * sign(a);
    }
    out.push_back(std::move(g));
  }
  return out;
}

double shape_reg(const VecX& beta) { return beta.squaredNorm(); }

VecX shape_reg_backward(const VecX& beta, double scale) { return 2.0 * scale * beta; }

double poly_reg(const MotionCoeffs& c) { return c.coeffs.cwiseAbs().sum() + c.coeffs.norm(); }

MatX poly_reg_backward(const MotionCoeffs& c, double scale) {
  const double fro = c.coeffs.norm();
  MatX g = c.coeffs.unaryExpr([](double x) { return sign(x); });
  if (fro > 0.0) g += c.coeffs / fro;
  return scale * g;
}

double background_reg(std::span<const Image> silhouettes, std::span<const Image> appearances,
                      const Image& background) {
  if (silhouettes.empty()) return 0.0;
  double acc = 0.0;
  const size_t npix = background.pixel_count();
  for (size_t i = 0; i < silhouettes.size(); ++i) {
    double sum = 0.0;
    size_t count = 0;
    for (size_t p = 0; p < npix; ++p) {
      if (!(silhouettes[i].data[p] > 0.5)) continue;
      double l1 = 0.0;
      for (int c = 0; c < 3; ++c) l1 += std::abs(background.data[p * 3 + c] - appearances[i].data[p * 3 + c]);
      sum += 1.0 / (l1 + kBackgroundEpsilon);
      ++count;
    }
    if (count > 0) acc += sum / static_cast<double>(count);
  }
  return acc / static_cast<double>(silhouettes.size());
}

std::vector<Image> background_reg_backward(std::span<const Image> silhouettes,
                                           std::span<const Image> appearances,
                                           const Image& background, double scale) {
  std::vector<Image> out;
  const size_t npix = background.pixel_count();
  for (size_t i = 0; i < silhouettes.size(); ++i) {
    Image g(background.height, background.width, 3);
    size_t count = 0;
    for (size_t p = 0; p < npix; ++p)
      if (silhouettes[i].data[p] > 0.5) ++count;
    if (count > 0) {
      const double k = scale / (static_cast<double>(silhouettes.size()) * static_cast<double>(count));
      for (size_t p = 0; p < npix; ++p) {
        if (!(silhouettes[i].data[p] > 0.5)) continue;
        double l1 = 0.0;
        for (int c = 0; c < 3; ++c) l1 += std::abs(background.data[p * 3 + c] - appearances[i].data[p * 3 + c]);
        const double r = l1 + kBackgroundEpsilon;
        for (int c = 0; c < 3; ++c)
          g.data[p * 3 + c] = -k * sign(appearances[i].data[p * 3 + c] - background.data[p * 3 + c]) / (r * r);
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<double> canonical_signs(const MotionCoeffs& c) {
  std::vector<double> s(c.cols(), 1.0);
  for (int col = 0; col < c.cols(); ++col)
    if (c.at(3, 0, col) < 0.0) s[col] = -1.0;
  return s;
}

MotionCoeffs apply_column_signs(const MotionCoeffs& c, const std::vector<double>& signs) {
  MotionCoeffs out = c;
  for (int col = 0; col < c.cols(); ++col) out.coeffs.col(col) *= signs[col];
  return out;
}

BankPrior::BankPrior(std::vector<MotionCoeffs> bank) {
  if (bank.empty()) throw DataError("motion prior bank is empty");
  for (auto& c : bank) {
    c.validate();
    if (c.degree != bank.front().degree || c.joints != bank.front().joints)
      throw DataError("motion prior bank entries differ in shape");
    canonical_.push_back(apply_column_signs(c, canonical_signs(c)));
  }
}

int BankPrior::nearest(const MotionCoeffs& c) const {
  if (c.degree != canonical_.front().degree || c.joints != canonical_.front().joints)
    throw DataError("motion does not match the prior bank shape");
  const MotionCoeffs q = apply_column_signs(c, canonical_signs(c));
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < canonical_.size(); ++i) {
    const double d = (canonical_[i].coeffs - q.coeffs).cwiseAbs().sum();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

MotionCoeffs BankPrior::project(const MotionCoeffs& c) const {
  // Signs are involutions, so the same table maps back to the query frame.
  return apply_column_signs(canonical_[nearest(c)], canonical_signs(c));
}

double motion_prior(const MotionCoeffs& c, const MotionPrior& prior) {
  return (prior.project(c).coeffs - c.coeffs).cwiseAbs().sum();
}

MatX motion_prior_backward(const MotionCoeffs& c, const MotionPrior& prior, double scale) {
  const MatX diff = c.coeffs - prior.project(c).coeffs;
  return scale * diff.unaryExpr([](double x) { return sign(x); });
}

}  // namespace blurpose
