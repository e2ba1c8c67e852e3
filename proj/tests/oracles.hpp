#pragma once

// Brute-force reference implementations used as independent oracles.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "microsim/image.hpp"

namespace oracle {

using microsim::BoundingBox;
using microsim::ComplexImage;
using microsim::RealImage;
using cd = std::complex<double>;

/// Direct O(N^2) 2-D DFT. sign = -1 forward (unnormalized), +1 inverse
/// (scaled by 1/N).
inline ComplexImage dft2(const ComplexImage& in, int sign) {
  const std::size_t w = in.width(), h = in.height();
  ComplexImage out(w, h);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t v = 0; v < h; ++v)
    for (std::size_t u = 0; u < w; ++u) {
      cd acc = 0;
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const double a = sign * two_pi *
                           (static_cast<double>(u * x) / static_cast<double>(w) +
                            static_cast<double>(v * y) / static_cast<double>(h));
          acc += in(x, y) * cd(std::cos(a), std::sin(a));
        }
      out(u, v) = sign > 0 ? acc / static_cast<double>(w * h) : acc;
    }
  return out;
}

/// out(x, y) = sum_{a, b} in(a, b) * k((x - a) mod w, (y - b) mod h).
inline ComplexImage circular_convolve(const RealImage& in, const ComplexImage& k) {
  const std::size_t w = in.width(), h = in.height();
  ComplexImage out(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      cd acc = 0;
      for (std::size_t b = 0; b < h; ++b)
        for (std::size_t a = 0; a < w; ++a)
          acc += in(a, b) * k((x + w - a) % w, (y + h - b) % h);
      out(x, y) = acc;
    }
  return out;
}

/// Gaussian-windowed SSIM evaluated window by window with explicit sums.
inline double ssim(const RealImage& a, const RealImage& b, int win = 11, double sigma = 1.5,
                   double L = 1.0) {
  std::vector<double> w2(static_cast<std::size_t>(win * win));
  const int r = win / 2;
  double total = 0;
  for (int j = 0; j < win; ++j)
    for (int i = 0; i < win; ++i) {
      const double dx = i - r, dy = j - r;
      const double g = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      w2[static_cast<std::size_t>(j * win + i)] = g;
      total += g;
    }
  for (double& v : w2) v /= total;

  const double c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);
  const int W = static_cast<int>(a.width()), H = static_cast<int>(a.height());
  double sum = 0;
  int count = 0;
  for (int y0 = 0; y0 + win <= H; ++y0)
    for (int x0 = 0; x0 + win <= W; ++x0) {
      double ma = 0, mb = 0;
      for (int j = 0; j < win; ++j)
        for (int i = 0; i < win; ++i) {
          const double g = w2[static_cast<std::size_t>(j * win + i)];
          ma += g * a(x0 + i, y0 + j);
          mb += g * b(x0 + i, y0 + j);
        }
      double va = 0, vb = 0, cov = 0;
      for (int j = 0; j < win; ++j)
        for (int i = 0; i < win; ++i) {
          const double g = w2[static_cast<std::size_t>(j * win + i)];
          const double da = a(x0 + i, y0 + j) - ma, db = b(x0 + i, y0 + j) - mb;
          va += g * da * da;
          vb += g * db * db;
          cov += g * da * db;
        }
      sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return sum / count;
}

/// Tight box of pixels where mask != 0, grown by margin, clamped to bounds.
template <typename T>
BoundingBox bbox_scan(const microsim::Image<T>& mask, T value, std::size_t margin) {
  long x0 = -1, y0 = -1, x1 = -1, y1 = -1;
  for (std::size_t y = 0; y < mask.height(); ++y)
    for (std::size_t x = 0; x < mask.width(); ++x) {
      if (mask(x, y) != value) continue;
      const long lx = static_cast<long>(x), ly = static_cast<long>(y);
      if (x0 < 0 || lx < x0) x0 = lx;
      if (y0 < 0 || ly < y0) y0 = ly;
      if (lx > x1) x1 = lx;
      if (ly > y1) y1 = ly;
    }
  const long m = static_cast<long>(margin);
  const long W = static_cast<long>(mask.width()), H = static_cast<long>(mask.height());
  const long bx0 = std::max(0L, x0 - m), by0 = std::max(0L, y0 - m);
  const long bx1 = std::min(W - 1, x1 + m), by1 = std::min(H - 1, y1 + m);
  return {static_cast<std::size_t>(bx0), static_cast<std::size_t>(by0),
          static_cast<std::size_t>(bx1 - bx0 + 1), static_cast<std::size_t>(by1 - by0 + 1)};
}

/// Intensity-weighted RMS distance from the intensity centroid.
inline double second_moment_radius(const RealImage& img) {
  double m = 0, mx = 0, my = 0;
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x) {
      m += img(x, y);
      mx += img(x, y) * static_cast<double>(x);
      my += img(x, y) * static_cast<double>(y);
    }
  mx /= m;
  my /= m;
  double r2 = 0;
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x) {
      const double dx = static_cast<double>(x) - mx, dy = static_cast<double>(y) - my;
      r2 += img(x, y) * (dx * dx + dy * dy);
    }
  return std::sqrt(r2 / m);
}

/// Plain scalar Lloyd iteration from given initial centroids; ties go to
/// the lower cluster index.
struct Lloyd {
  std::vector<int> labels;
  std::vector<double> centroids;
};

inline Lloyd lloyd(const std::vector<double>& values, std::vector<double> c, int max_iter = 100,
                   double tol = 1e-12) {
  Lloyd out;
  out.labels.assign(values.size(), 0);
  auto assign = [&] {
    for (std::size_t i = 0; i < values.size(); ++i) {
      int best = 0;
      for (int j = 1; j < static_cast<int>(c.size()); ++j)
        if (std::abs(values[i] - c[j]) < std::abs(values[i] - c[best])) best = j;
      out.labels[i] = best;
    }
  };
  for (int it = 0; it < max_iter; ++it) {
    assign();
    double moved = 0;
    for (int j = 0; j < static_cast<int>(c.size()); ++j) {
      double s = 0;
      int n = 0;
      for (std::size_t i = 0; i < values.size(); ++i)
        if (out.labels[i] == j) {
          s += values[i];
          ++n;
        }
      if (n == 0) continue;
      moved = std::max(moved, std::abs(s / n - c[j]));
      c[j] = s / n;
    }
    if (moved < tol) break;
  }
  assign();
  out.centroids = c;
  return out;
}

inline RealImage random_image(std::size_t w, std::size_t h, std::mt19937_64& rng, double lo = 0,
                              double hi = 1) {
  std::uniform_real_distribution<double> d(lo, hi);
  RealImage img(w, h);
  for (double& v : img.pixels()) v = d(rng);
  return img;
}

inline ComplexImage random_field(std::size_t w, std::size_t h, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  ComplexImage img(w, h);
  for (auto& v : img.pixels()) v = cd(d(rng), d(rng));
  return img;
}

/// Vertical step edge: 0 on the left half, 1 on the right.
inline RealImage step_edge(std::size_t w, std::size_t h) {
  RealImage img(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = w / 2; x < w; ++x) img(x, y) = 1.0;
  return img;
}

/// Depth map with a random blob of `fg` depth on a `bg` background. The blob
/// is a union of random rectangles and discs, so it is generally non-convex.
inline microsim::DepthMap random_blob(std::size_t w, std::size_t h, std::mt19937_64& rng,
                                      double bg, double fg) {
  microsim::DepthMap d(w, h, bg);
  std::uniform_int_distribution<int> shapes(1, 4);
  const int n = shapes(rng);
  const int W = static_cast<int>(w), H = static_cast<int>(h);
  std::uniform_int_distribution<int> px(0, W - 1), py(0, H - 1), sz(1, std::max(2, W / 6));
  for (int s = 0; s < n; ++s) {
    const int cx = px(rng), cy = py(rng), r = sz(rng);
    const bool disc = (rng() & 1) != 0;
    for (int y = std::max(0, cy - r); y <= std::min(H - 1, cy + r); ++y)
      for (int x = std::max(0, cx - r); x <= std::min(W - 1, cx + r); ++x)
        if (!disc || (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r)
          d(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = fg;
  }
  return d;
}

} // namespace oracle
