#pragma once

// Full-reference image-quality metrics on unit-range images.

#include <cmath>
#include <limits>

#include "microsim/error.hpp"
#include "microsim/filters.hpp"
#include "microsim/image.hpp"

namespace microsim {

struct MetricReport {
  double mse = 0;
  double psnr = 0; // +inf when mse == 0
  double ssim = 0;
};

inline double mse(const RealImage& a, const RealImage& b) {
  require_same_shape(a, b, "mse");
  if (a.empty()) throw InvalidArgument("mse: empty images");
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

inline double psnr_from_mse(double m, double max_value = 1.0) {
  if (!(max_value > 0)) throw InvalidArgument("psnr: max_value must be > 0");
  if (m == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_value * max_value / m);
}

inline double psnr(const RealImage& a, const RealImage& b, double max_value = 1.0) {
  return psnr_from_mse(mse(a, b), max_value);
}

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Per-window SSIM map over all positions where the Gaussian window fits.
inline RealImage ssim_map(const RealImage& a, const RealImage& b, const SsimParams& p = {}) {
  require_same_shape(a, b, "ssim");
  if (a.width() < p.window || a.height() < p.window)
    throw InvalidArgument("ssim: image smaller than the " + std::to_string(p.window) + "x" +
                          std::to_string(p.window) + " window");
  const auto k = gaussian_kernel_1d(p.window, p.sigma);
  RealImage aa(a.width(), a.height()), bb(a.width(), a.height()), ab(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = correlate_separable_valid(a, k);
  const auto mu_b = correlate_separable_valid(b, k);
  const auto e_aa = correlate_separable_valid(aa, k);
  const auto e_bb = correlate_separable_valid(bb, k);
  const auto e_ab = correlate_separable_valid(ab, k);

  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  RealImage out(mu_a.width(), mu_a.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    out[i] = ((2 * ma * mb + c1) * (2 * cov + c2)) /
             ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return out;
}

/// Mean SSIM: 11x11 Gaussian window, sigma 1.5, K1 = 0.01, K2 = 0.03, L = 1.
inline double ssim(const RealImage& a, const RealImage& b, const SsimParams& p = {}) {
  const auto map = ssim_map(a, b, p);
  double acc = 0;
  for (double v : map.pixels()) acc += v;
  return acc / static_cast<double>(map.size());
}

inline MetricReport evaluate(const RealImage& a, const RealImage& b, double max_value = 1.0) {
  MetricReport r;
  r.mse = mse(a, b);
  r.psnr = psnr_from_mse(r.mse, max_value);
  r.ssim = ssim(a, b);
  return r;
}

} // namespace microsim
