#pragma once

// Thin RAII layer over FFTW3 (double precision).
//
// Convention used everywhere in the library: the forward transform is
// unnormalized, the inverse carries the 1/N factor.
//
// Plans are created with FFTW_ESTIMATE so the chosen algorithm (and thus the
// floating-point result) does not depend on timing measurements taken at
// planning time. Planning is serialized behind a mutex; executing a cached
// plan on fresh arrays is thread-safe.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include "microsim/image.hpp"

namespace microsim::fft {

static_assert(sizeof(Complex) == sizeof(fftw_complex));

/// Buffer allocated with fftw_malloc so that it satisfies the SIMD alignment
/// the aligned plans were created for.
template <typename T>
class AlignedBuffer {
public:
  AlignedBuffer() = default;
  explicit AlignedBuffer(std::size_t n)
      : ptr_(static_cast<T*>(fftw_malloc(sizeof(T) * n))), size_(n) {
    if (n != 0 && !ptr_) throw std::bad_alloc();
  }
  T* data() noexcept { return ptr_.get(); }
  const T* data() const noexcept { return ptr_.get(); }
  std::size_t size() const noexcept { return size_; }
  T& operator[](std::size_t i) { return ptr_.get()[i]; }
  const T& operator[](std::size_t i) const { return ptr_.get()[i]; }

private:
  struct Free {
    void operator()(T* p) const noexcept { fftw_free(p); }
  };
  std::unique_ptr<T, Free> ptr_;
  std::size_t size_ = 0;
};

enum class Kind { Forward, Backward, RealToComplex, ComplexToReal };

namespace detail {

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const noexcept { fftw_destroy_plan(p); }
};
using PlanHandle = std::unique_ptr<fftw_plan_s, PlanDeleter>;

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// Key: width, height, kind, aligned.
inline fftw_plan cached_plan(std::size_t width, std::size_t height, Kind kind,
                             bool aligned) {
  using Key = std::tuple<std::size_t, std::size_t, Kind, bool>;
  static std::map<Key, PlanHandle> cache;

  std::lock_guard lock(planner_mutex());
  const Key key{width, height, kind, aligned};
  if (auto it = cache.find(key); it != cache.end()) return it->second.get();

  const int w = static_cast<int>(width);
  const int h = static_cast<int>(height);
  const std::size_t n = width * height;
  const unsigned flags =
      FFTW_ESTIMATE | FFTW_DESTROY_INPUT | (aligned ? 0u : FFTW_UNALIGNED);

  AlignedBuffer<fftw_complex> c1(n), c2(n);
  AlignedBuffer<double> r(n);
  fftw_plan plan = nullptr;
  switch (kind) {
  case Kind::Forward:
    plan = fftw_plan_dft_2d(h, w, c1.data(), c2.data(), FFTW_FORWARD, flags);
    break;
  case Kind::Backward:
    plan = fftw_plan_dft_2d(h, w, c1.data(), c2.data(), FFTW_BACKWARD, flags);
    break;
  case Kind::RealToComplex:
    plan = fftw_plan_dft_r2c_2d(h, w, r.data(), c1.data(), flags);
    break;
  case Kind::ComplexToReal:
    plan = fftw_plan_dft_c2r_2d(h, w, c1.data(), r.data(), flags);
    break;
  }
  if (!plan) throw Error("FFTW failed to create a plan");
  return cache.emplace(key, PlanHandle(plan)).first->second.get();
}

inline fftw_complex* as_fftw(Complex* p) {
  return reinterpret_cast<fftw_complex*>(p);
}

} // namespace detail

/// Unnormalized forward 2-D DFT.
inline ComplexImage forward(const ComplexImage& in) {
  if (in.empty()) throw InvalidArgument("fft of an empty image");
  ComplexImage src = in; // FFTW_DESTROY_INPUT
  ComplexImage out(in.width(), in.height());
  fftw_execute_dft(
      detail::cached_plan(in.width(), in.height(), Kind::Forward, false),
      detail::as_fftw(src.data()), detail::as_fftw(out.data()));
  return out;
}

inline ComplexImage forward(const RealImage& in) { return forward(to_complex(in)); }

/// Inverse 2-D DFT including the 1/N factor.
inline ComplexImage inverse(const ComplexImage& in) {
  if (in.empty()) throw InvalidArgument("inverse fft of an empty image");
  ComplexImage src = in;
  ComplexImage out(in.width(), in.height());
  fftw_execute_dft(
      detail::cached_plan(in.width(), in.height(), Kind::Backward, false),
      detail::as_fftw(src.data()), detail::as_fftw(out.data()));
  const double scale = 1.0 / static_cast<double>(in.size());
  for (auto& v : out.pixels()) v *= scale;
  return out;
}

/// Aligned plan for the hot rendering loop; arrays passed to it must come
/// from AlignedBuffer.
inline fftw_plan aligned_plan(std::size_t width, std::size_t height, Kind kind) {
  return detail::cached_plan(width, height, kind, true);
}

namespace detail {
inline bool smooth(std::size_t m, std::initializer_list<std::size_t> primes) {
  for (std::size_t p : primes)
    while (m % p == 0) m /= p;
  return m == 1;
}
} // namespace detail

/// Transform length >= n that FFTW handles with its fast codelets. Lengths of
/// 64 and above become a multiple of 32 with an {2,3,5,7,11}-smooth cofactor
/// (678 -> 704, 488 -> 512); shorter ones the next {2,3,5,7}-smooth length.
inline std::size_t next_fast_size(std::size_t n) {
  n = std::max<std::size_t>(n, 1);
  if (n < 64) {
    for (std::size_t m = n;; ++m)
      if (detail::smooth(m, {2, 3, 5, 7})) return m;
  }
  for (std::size_t m = (n + 31) / 32 * 32;; m += 32)
    if (detail::smooth(m / 32, {2, 3, 5, 7, 11})) return m;
}

} // namespace microsim::fft
