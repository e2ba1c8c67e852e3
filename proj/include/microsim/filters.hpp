#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "microsim/error.hpp"
#include "microsim/image.hpp"

namespace microsim {

/// Normalized 1-D Gaussian of odd length `size`.
inline std::vector<double> gaussian_kernel_1d(std::size_t size, double sigma) {
  if (size % 2 == 0 || !(sigma > 0))
    throw InvalidArgument("gaussian kernel: size must be odd and sigma > 0");
  std::vector<double> k(size);
  const double c = static_cast<double>(size / 2);
  double sum = 0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    k[i] = std::exp(-d * d / (2 * sigma * sigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

/// 2-D correlation keeping only positions where the kernel fits entirely
/// ("valid" mode). Output is (W - kw + 1) x (H - kh + 1).
inline RealImage correlate_valid(const RealImage& img, const RealImage& kernel) {
  if (kernel.width() > img.width() || kernel.height() > img.height())
    throw InvalidArgument("correlate_valid: image smaller than kernel");
  const std::size_t ow = img.width() - kernel.width() + 1;
  const std::size_t oh = img.height() - kernel.height() + 1;
  RealImage out(ow, oh);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (std::size_t j = 0; j < kernel.height(); ++j) {
        const double* row = &img(x, y + j);
        const double* krow = &kernel(0, j);
        for (std::size_t i = 0; i < kernel.width(); ++i) acc += row[i] * krow[i];
      }
      out(x, y) = acc;
    }
  return out;
}

/// Separable correlation with the same 1-D kernel on both axes, valid mode.
inline RealImage correlate_separable_valid(const RealImage& img, const std::vector<double>& k) {
  const std::size_t n = k.size();
  if (n > img.width() || n > img.height())
    throw InvalidArgument("correlate_separable_valid: image smaller than kernel");
  const std::size_t ow = img.width() - n + 1;
  const std::size_t oh = img.height() - n + 1;
  RealImage rows(ow, img.height());
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (std::size_t i = 0; i < n; ++i) acc += img(x + i, y) * k[i];
      rows(x, y) = acc;
    }
  RealImage out(ow, oh);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (std::size_t j = 0; j < n; ++j) acc += rows(x, y + j) * k[j];
      out(x, y) = acc;
    }
  return out;
}

/// Gaussian blur with mirrored borders (same size as the input). Kernel is
/// truncated at 4 sigma.
inline RealImage gaussian_blur(const RealImage& img, double sigma) {
  const auto half = static_cast<std::size_t>(std::ceil(4 * sigma));
  const auto k = gaussian_kernel_1d(2 * half + 1, sigma);
  const auto w = static_cast<long>(img.width()), h = static_cast<long>(img.height());
  auto reflect = [](long i, long n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
  };
  RealImage tmp(img.width(), img.height()), out(img.width(), img.height());
  const long r = static_cast<long>(half);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      double acc = 0;
      for (long i = -r; i <= r; ++i) acc += img(reflect(x + i, w), y) * k[i + r];
      tmp(x, y) = acc;
    }
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      double acc = 0;
      for (long i = -r; i <= r; ++i) acc += tmp(x, reflect(y + i, h)) * k[i + r];
      out(x, y) = acc;
    }
  return out;
}

/// Laplacian-of-Gaussian kernel truncated at 4 sigma (odd size), shifted to
/// zero sum so that flat regions respond with 0.
inline RealImage log_kernel(double sigma) {
  if (!(sigma > 0)) throw InvalidArgument("log_kernel: sigma must be > 0");
  const auto half = static_cast<std::size_t>(std::ceil(4 * sigma));
  const std::size_t size = 2 * half + 1;
  RealImage k(size, size);
  const double s2 = sigma * sigma;
  double sum = 0;
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double dx = static_cast<double>(x) - static_cast<double>(half);
      const double dy = static_cast<double>(y) - static_cast<double>(half);
      const double r2 = dx * dx + dy * dy;
      k(x, y) = -1.0 / (std::numbers::pi * s2 * s2) * (1.0 - r2 / (2 * s2)) *
                std::exp(-r2 / (2 * s2));
      sum += k(x, y);
    }
  const double mean = sum / static_cast<double>(k.size());
  for (auto& v : k.pixels()) v -= mean;
  return k;
}

} // namespace microsim
