#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "microsim/error.hpp"

namespace microsim {

using Complex = std::complex<double>;

/// Dense row-major 2-D buffer. Pixel (x, y) lives at data[y * width + x].
template <typename T>
class Image {
public:
  Image() = default;
  Image(std::size_t width, std::size_t height, T fill = T{})
      : width_(width), height_(height), data_(width * height, fill) {}
  Image(std::size_t width, std::size_t height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != width_ * height_)
      throw DimensionError("image buffer size does not match " +
                           std::to_string(width_) + "x" +
                           std::to_string(height_));
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t x, std::size_t y) { return data_[y * width_ + x]; }
  const T& operator()(std::size_t x, std::size_t y) const {
    return data_[y * width_ + x];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  template <typename U>
  bool same_shape(const Image<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Image&, const Image&) = default;

private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<T> data_;
};

using RealImage = Image<double>;
using ComplexImage = Image<Complex>;

/// Signed depth per pixel in meters, 0 at the focal plane.
using DepthMap = Image<double>;

template <typename A, typename B>
void require_same_shape(const Image<A>& a, const Image<B>& b,
                        const char* what) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(what) + ": shape mismatch (" +
                         std::to_string(a.width()) + "x" +
                         std::to_string(a.height()) + " vs " +
                         std::to_string(b.width()) + "x" +
                         std::to_string(b.height()) + ")");
}

struct BoundingBox {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t width = 0;
  std::size_t height = 0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Copy of the window `box` out of `src`.
template <typename T>
Image<T> crop(const Image<T>& src, const BoundingBox& box) {
  if (box.x + box.width > src.width() || box.y + box.height > src.height())
    throw InvalidArgument("crop window exceeds image bounds");
  Image<T> out(box.width, box.height);
  for (std::size_t y = 0; y < box.height; ++y)
    std::copy_n(&src(box.x, box.y + y), box.width, &out(0, y));
  return out;
}

inline ComplexImage to_complex(const RealImage& src) {
  ComplexImage out(src.width(), src.height());
  std::transform(src.pixels().begin(), src.pixels().end(),
                 out.pixels().begin(), [](double v) { return Complex(v, 0.0); });
  return out;
}

template <typename T>
double energy(const Image<T>& img) {
  double e = 0.0;
  for (const auto& v : img.pixels()) e += std::norm(v);
  return e;
}

template <typename T>
bool all_finite(const Image<T>& img) {
  return std::all_of(img.pixels().begin(), img.pixels().end(), [](const T& v) {
    if constexpr (std::is_same_v<T, Complex>)
      return std::isfinite(v.real()) && std::isfinite(v.imag());
    else
      return std::isfinite(static_cast<double>(v));
  });
}

} // namespace microsim
