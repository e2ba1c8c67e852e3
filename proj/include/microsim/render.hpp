#pragma once

// Depth-layered Fourier-optics rendering.
//
// An object image (intensity) and its depth map are split into depth layers.
// Each layer's amplitude is filtered in the frequency domain by the system
// transfer function times an angular-spectrum defocus kernel for the layer's
// depth, and the layers are recombined into one intensity image.

#include <chrono>
#include <cstdint>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "microsim/fft.hpp"
#include "microsim/image.hpp"
#include "microsim/optics.hpp"
#include "microsim/parallel.hpp"
#include "microsim/segment.hpp"

namespace microsim {

/// Depth-binned decomposition of an object image. Layers are stored as a
/// per-pixel layer index over the source image; `layer(i)` materializes one.
struct LayerStack {
  std::size_t n_layers = 0;
  double z_min = 0;
  double z_max = 0;
  std::vector<double> z_centers;
  Image<std::uint16_t> index;        // layer of each pixel
  RealImage source;                  // the image that was partitioned
  std::vector<std::size_t> occupancy; // pixels per layer

  double dz() const { return (z_max - z_min) / static_cast<double>(n_layers); }

  RealImage layer(std::size_t i) const {
    RealImage out(source.width(), source.height());
    for (std::size_t p = 0; p < source.size(); ++p)
      if (index[p] == i) out[p] = source[p];
    return out;
  }
};

/// Layer of a pixel at depth `d`: floor((d - z_min) / dz), clamped to
/// [0, n_layers - 1]. Bins are half-open [edge, edge + dz); depths at or
/// beyond z_max land in the last layer.
inline std::size_t depth_to_layer(double d, double z_min, double z_max,
                                  std::size_t n_layers) {
  const double dz = (z_max - z_min) / static_cast<double>(n_layers);
  const double f = std::floor((d - z_min) / dz);
  if (!(f > 0)) return 0;
  if (f >= static_cast<double>(n_layers - 1)) return n_layers - 1;
  return static_cast<std::size_t>(f);
}

inline LayerStack discretize_depth(const RealImage& image, const DepthMap& depth,
                                   double z_min = -10e-6, double z_max = 10e-6,
                                   std::size_t n_layers = 40) {
  require_same_shape(image, depth, "discretize_depth");
  if (!(z_min < z_max)) throw InvalidArgument("discretize_depth: z_min must be < z_max");
  if (n_layers < 1 || n_layers > 65535)
    throw InvalidArgument("discretize_depth: n_layers must be in [1, 65535]");
  if (!all_finite(depth)) throw InvalidArgument("discretize_depth: non-finite depth");

  LayerStack s;
  s.n_layers = n_layers;
  s.z_min = z_min;
  s.z_max = z_max;
  s.z_centers.resize(n_layers);
  const double dz = s.dz();
  for (std::size_t i = 0; i < n_layers; ++i)
    s.z_centers[i] = z_min + (static_cast<double>(i) + 0.5) * dz;
  s.index = Image<std::uint16_t>(image.width(), image.height());
  s.occupancy.assign(n_layers, 0);
  for (std::size_t p = 0; p < image.size(); ++p) {
    const auto l = depth_to_layer(depth[p], z_min, z_max, n_layers);
    s.index[p] = static_cast<std::uint16_t>(l);
    ++s.occupancy[l];
  }
  s.source = image;
  return s;
}

/// Angular-spectrum kernel exp(i 2 pi z sqrt(1/lambda^2 - U^2 - V^2)) on the
/// propagating band; evanescent cells are zero.
inline SpectrumField propagation_otf(const FrequencyGrid& grid, double z,
                                     double lambda_medium) {
  if (!(lambda_medium > 0))
    throw InvalidArgument("propagation_otf: wavelength must be > 0");
  const double k2 = 1.0 / (lambda_medium * lambda_medium);
  SpectrumField out(grid);
  for (std::size_t y = 0; y < grid.height(); ++y)
    for (std::size_t x = 0; x < grid.width(); ++x) {
      const double radicand = k2 - grid.radius2(x, y);
      out.values(x, y) = radicand >= 0
                             ? std::polar(1.0, 2.0 * std::numbers::pi * z * std::sqrt(radicand))
                             : Complex(0.0, 0.0);
    }
  return out;
}

/// Forward transform, multiply by h_total * h_prop, inverse transform.
inline ComplexImage render_layer(const RealImage& layer, const SpectrumField& h_total,
                                 const SpectrumField& h_prop) {
  require_same_shape(layer, h_total.values, "render_layer");
  require_same_shape(layer, h_prop.values, "render_layer");
  ComplexImage spectrum = fft::forward(layer);
  for (std::size_t i = 0; i < spectrum.size(); ++i)
    spectrum[i] *= h_total.values[i] * h_prop.values[i];
  return fft::inverse(spectrum);
}

/// |E_spatial - E_spectrum / N| / max(E_spatial, 1e-30) for an unnormalized
/// forward transform.
inline double parseval_check(const ComplexImage& spatial, const ComplexImage& spectrum) {
  require_same_shape(spatial, spectrum, "parseval_check");
  const double es = energy(spatial);
  const double ef = energy(spectrum) / static_cast<double>(spatial.size());
  return std::abs(es - ef) / std::max(es, 1e-30);
}

/// Min-max normalization to [0, 1]; a constant image maps to all zeros.
inline RealImage normalize_min_max(RealImage img) {
  if (img.empty()) return img;
  const auto [lo, hi] = std::minmax_element(img.pixels().begin(), img.pixels().end());
  const double min = *lo, range = *hi - *lo;
  for (auto& v : img.pixels()) v = range > 0 ? (v - min) / range : 0.0;
  return img;
}

/// Pixel-wise sum of |field|^2 over all fields, accumulated in list order.
inline RealImage accumulate_intensity(std::span<const ComplexImage> fields) {
  if (fields.empty()) throw InvalidArgument("composite: no fields");
  RealImage out(fields.front().width(), fields.front().height());
  for (const auto& f : fields) {
    require_same_shape(out, f, "composite");
    for (std::size_t i = 0; i < f.size(); ++i) out[i] += std::norm(f[i]);
  }
  return out;
}

/// Incoherent recombination: sum of |field|^2, then min-max normalized.
inline RealImage composite(std::span<const ComplexImage> fields) {
  return normalize_min_max(accumulate_intensity(fields));
}

/// Coherent recombination: |sum of fields|^2, then min-max normalized.
inline RealImage composite_coherent(std::span<const ComplexImage> fields) {
  if (fields.empty()) throw InvalidArgument("composite: no fields");
  ComplexImage sum(fields.front().width(), fields.front().height());
  for (const auto& f : fields) {
    require_same_shape(sum, f, "composite");
    for (std::size_t i = 0; i < f.size(); ++i) sum[i] += f[i];
  }
  RealImage out(sum.width(), sum.height());
  for (std::size_t i = 0; i < sum.size(); ++i) out[i] = std::norm(sum[i]);
  return normalize_min_max(std::move(out));
}

/// How the five-element train enters the system transfer function.
enum class ElementTrain {
  /// The train's net quadratic phase is referenced to the focal plane
  /// (nulled), so z = 0 images in focus. Only the band limit, aberration and
  /// per-layer defocus shape the image.
  FocusReferenced,
  /// Literal product of the element transfer functions, evaluated in SI
  /// units on the grid.
  Literal,
};

struct RenderOptions {
  std::size_t n_layers = 40;
  double z_min = -10e-6;
  double z_max = 10e-6;
  double pixel_pitch = 0.1e-6;
  bool aberration = true;
  double aberration_coefficient = 1.0;
  bool coherent = false;
  ElementTrain element_train = ElementTrain::FocusReferenced;
  /// Zero-pad the frame to the next 2-3-5-7-smooth size before transforming.
  bool pad_to_fast_size = true;
  bool crop = false;
  std::size_t k = 2;
  std::size_t margin = 8;
  std::size_t threads = 1;

  void validate() const {
    if (n_layers < 1) throw InvalidArgument("render: n_layers must be >= 1");
    if (!(z_min < z_max)) throw InvalidArgument("render: z_min must be < z_max");
    if (!(pixel_pitch > 0)) throw InvalidArgument("render: pixel pitch must be > 0");
    if (threads < 1) throw InvalidArgument("render: threads must be >= 1");
  }
};

struct RenderedFrame {
  RealImage intensity;            // normalized to [0, 1]
  RealImage raw_intensity;        // before normalization
  double parseval_error = 0;      // max over rendered layers
  double seconds = 0;             // whole pipeline, crop included
  double seconds_render = 0;      // excluding segmentation / crop
  std::optional<BoundingBox> bbox;
  std::size_t layers_rendered = 0;
  std::size_t fft_width = 0;
  std::size_t fft_height = 0;
};

/// System transfer function: element train, NA band limit, then (optionally)
/// the spherical aberration phase.
inline SpectrumField system_otf(const FrequencyGrid& grid, const OpticalConfig& cfg,
                                const RenderOptions& opts) {
  cfg.validate();
  SpectrumField h(grid);
  if (opts.element_train == ElementTrain::Literal) {
    const auto train = element_train(grid, cfg);
    h = total_otf(train);
  }
  const double cutoff = na_cutoff(cfg);
  h = apply_na_mask(std::move(h), cutoff);
  if (opts.aberration)
    h = apply_aberration(std::move(h), zernike_spherical_phase(grid, cutoff),
                         opts.aberration_coefficient);
  return h;
}

namespace detail {

// True when h(-k) == h(k) on the DFT grid, i.e. the filter's impulse response
// is even, which lets real input be filtered with two real inverse transforms.
inline bool is_even_filter(const ComplexImage& h) {
  const std::size_t w = h.width(), ht = h.height();
  for (std::size_t y = 0; y < ht; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (h(x, y) != h((w - x) % w, (ht - y) % ht)) return false;
  return true;
}

struct LayerScratch {
  fft::AlignedBuffer<double> amplitude;
  fft::AlignedBuffer<Complex> spectrum;
  fft::AlignedBuffer<Complex> re_part;
  fft::AlignedBuffer<Complex> im_part;
  fft::AlignedBuffer<double> out_re;
  fft::AlignedBuffer<double> out_im;

  LayerScratch(std::size_t n, std::size_t half)
      : amplitude(n), spectrum(half), re_part(half), im_part(half), out_re(n), out_im(n) {}
};

// Band cells (nonzero system response) of the half spectrum.
struct BandCell {
  std::size_t index;   // into the half spectrum
  double kz;           // sqrt(1/lambda^2 - r^2)
  Complex h;           // system transfer value
};

inline fftw_complex* fc(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

} // namespace detail

/// Full pipeline for one frame: optional segmentation crop, depth
/// discretization, transfer-function assembly, per-layer filtering and
/// recombination. Layers are filtered in parallel and summed in layer order,
/// so the result does not depend on `opts.threads`.
inline RenderedFrame render_frame(const RealImage& image, const DepthMap& depth,
                                  const OpticalConfig& cfg, const RenderOptions& opts) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  opts.validate();
  cfg.validate();
  require_same_shape(image, depth, "render_frame");
  if (image.width() < 2 || image.height() < 2)
    throw InvalidArgument("render_frame: image must be at least 2x2");
  for (double v : image.pixels())
    if (!(v >= 0) || !std::isfinite(v))
      throw InvalidArgument("render_frame: image intensities must be finite and >= 0");

  RenderedFrame frame;
  const RealImage* obj = &image;
  const DepthMap* dep = &depth;
  RealImage cropped_image;
  DepthMap cropped_depth;
  if (opts.crop) {
    const auto seg = segment_foreground(depth, opts.k, opts.margin);
    frame.bbox = seg.bbox;
    cropped_image = crop(image, seg.bbox);
    cropped_depth = crop(depth, seg.bbox);
    obj = &cropped_image;
    dep = &cropped_depth;
  }
  const auto t_render = clock::now();

  const auto stack = discretize_depth(*obj, *dep, opts.z_min, opts.z_max, opts.n_layers);
  const std::size_t w = obj->width(), h = obj->height();
  const std::size_t fw = opts.pad_to_fast_size ? fft::next_fast_size(w) : w;
  const std::size_t fh = opts.pad_to_fast_size ? fft::next_fast_size(h) : h;
  frame.fft_width = fw;
  frame.fft_height = fh;
  const std::size_t n = fw * fh;
  const std::size_t hw = fw / 2 + 1;
  const std::size_t half = fh * hw;

  const auto grid = make_frequency_grid(fw, fh, opts.pixel_pitch);
  const auto h_sys = system_otf(grid, cfg, opts);
  const double lambda_m = cfg.lambda_vac / cfg.n_sample;
  const double k2 = 1.0 / (lambda_m * lambda_m);

  std::vector<detail::BandCell> band;
  for (std::size_t y = 0; y < fh; ++y)
    for (std::size_t x = 0; x < hw; ++x) {
      const Complex hv = h_sys.values(x, y);
      const double radicand = k2 - grid.radius2(x, y);
      if (radicand >= 0 && hv != Complex(0.0, 0.0))
        band.push_back({y * hw + x, std::sqrt(radicand), hv});
    }
  constexpr std::uint32_t kNoBand = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> band_slot(half, kNoBand);
  for (std::size_t c = 0; c < band.size(); ++c)
    band_slot[band[c].index] = static_cast<std::uint32_t>(c);
  // The radial system response is even by construction; a non-even one would
  // need the complex inverse path.
  if (!detail::is_even_filter(h_sys.values))
    throw Error("render_frame: system transfer function is not even");

  // A layer whose pixels are all dark contributes exactly zero; skip it.
  std::vector<char> lit(stack.n_layers, 0);
  for (std::size_t p = 0; p < stack.source.size(); ++p)
    if (stack.source[p] > 0) lit[stack.index[p]] = 1;
  std::vector<std::size_t> layers;
  std::vector<std::size_t> slot(stack.n_layers, 0);
  for (std::size_t l = 0; l < stack.n_layers; ++l)
    if (lit[l]) {
      slot[l] = layers.size();
      layers.push_back(l);
    }
  // Pixel indices grouped by rendered layer (counting sort).
  std::vector<std::size_t> members_begin(layers.size() + 1, 0);
  for (std::size_t p = 0; p < stack.source.size(); ++p)
    if (lit[stack.index[p]]) ++members_begin[slot[stack.index[p]] + 1];
  for (std::size_t i = 0; i < layers.size(); ++i) members_begin[i + 1] += members_begin[i];
  std::vector<std::size_t> members(members_begin.back());
  {
    auto cursor = members_begin;
    for (std::size_t p = 0; p < stack.source.size(); ++p)
      if (lit[stack.index[p]]) members[cursor[slot[stack.index[p]]]++] = p;
  }

  // More workers than cores only adds scratch memory; the reduction order is
  // fixed, so the cap does not change the result.
  const std::size_t hw_threads = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t threads = std::clamp<std::size_t>(opts.threads, 1, hw_threads);
  std::vector<detail::LayerScratch> scratch;
  scratch.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) scratch.emplace_back(n, half);

  const fftw_plan r2c = fft::aligned_plan(fw, fh, fft::Kind::RealToComplex);
  const fftw_plan c2r = fft::aligned_plan(fw, fh, fft::Kind::ComplexToReal);
  const double inv_n = 1.0 / static_cast<double>(n);

  // Filter values per rendered layer, stepping the defocus phasor along the
  // evenly spaced layer centers. Large tables fall back to direct evaluation.
  constexpr std::size_t kMaxTableBytes = std::size_t{512} << 20;
  const bool use_table = layers.size() * band.size() * sizeof(Complex) <= kMaxTableBytes;
  std::vector<Complex> table;
  if (use_table && !layers.empty()) {
    table.resize(layers.size() * band.size());
    for (std::size_t c = 0; c < band.size(); ++c) {
      const double phase = 2.0 * std::numbers::pi * band[c].kz;
      const Complex step = std::polar(1.0, phase * stack.dz());
      Complex running = inv_n * band[c].h * std::polar(1.0, phase * stack.z_centers[0]);
      std::size_t at = 0;
      for (std::size_t li = 0; li < layers.size(); ++li) {
        for (; at < layers[li]; ++at) running *= step;
        table[li * band.size() + c] = running;
      }
    }
  }

  std::vector<double> layer_parseval(layers.size(), 0.0);
  RealImage intensity(fw, fh);
  RealImage coherent_re, coherent_im;
  if (opts.coherent) {
    coherent_re = RealImage(fw, fh);
    coherent_im = RealImage(fw, fh);
  }

  auto filter_layer = [&](std::size_t li, std::size_t worker) {
    auto& s = scratch[worker];
    const std::size_t l = layers[li];
    std::fill_n(s.amplitude.data(), n, 0.0);
    double e_spatial = 0.0;
    for (std::size_t p = members_begin[li]; p < members_begin[li + 1]; ++p) {
      const std::size_t src = members[p];
      const double a = std::sqrt(stack.source[src]);
      s.amplitude[(src / w) * fw + src % w] = a;
      e_spatial += a * a;
    }
    fftw_execute_dft_r2c(r2c, s.amplitude.data(), detail::fc(s.spectrum.data()));

    // One pass over the half spectrum: Parseval sum (self-mirrored columns
    // once, the rest twice) and the two filtered half spectra. With an even
    // filter, X*Hr and X*Hi are both Hermitian, so each inverts to a real
    // image. inv_n folds the inverse-transform normalization into the filter.
    const double z = stack.z_centers[l];
    const Complex* row = use_table ? table.data() + li * band.size() : nullptr;
    double e_spectrum = 0.0;
    for (std::size_t y = 0; y < fh; ++y)
      for (std::size_t x = 0; x < hw; ++x) {
        const std::size_t i = y * hw + x;
        const Complex xv = s.spectrum[i];
        const bool self_mirror = x == 0 || (fw % 2 == 0 && x == fw / 2);
        e_spectrum += (self_mirror ? 1.0 : 2.0) * std::norm(xv);
        const std::uint32_t c = band_slot[i];
        if (c == kNoBand) {
          s.re_part[i] = Complex(0.0, 0.0);
          s.im_part[i] = Complex(0.0, 0.0);
          continue;
        }
        const Complex t = row ? row[c]
                              : inv_n * band[c].h *
                                    std::polar(1.0, 2.0 * std::numbers::pi * z * band[c].kz);
        s.re_part[i] = xv * t.real();
        s.im_part[i] = xv * t.imag();
      }
    layer_parseval[li] =
        std::abs(e_spatial - e_spectrum * inv_n) / std::max(e_spatial, 1e-30);

    fftw_execute_dft_c2r(c2r, detail::fc(s.re_part.data()), s.out_re.data());
    fftw_execute_dft_c2r(c2r, detail::fc(s.im_part.data()), s.out_im.data());
  };

  auto accumulate = [&](std::size_t worker) {
    auto& s = scratch[worker];
    if (opts.coherent) {
      for (std::size_t i = 0; i < n; ++i) {
        coherent_re[i] += s.out_re[i];
        coherent_im[i] += s.out_im[i];
      }
    } else {
      for (std::size_t i = 0; i < n; ++i)
        intensity[i] += s.out_re[i] * s.out_re[i] + s.out_im[i] * s.out_im[i];
    }
  };

  // Batches of `threads` layers: filter in parallel, then reduce in layer
  // order on this thread.
  for (std::size_t begin = 0; begin < layers.size(); begin += threads) {
    const std::size_t count = std::min(threads, layers.size() - begin);
    parallel_for(count, count, [&](std::size_t i, std::size_t) {
      filter_layer(begin + i, i);
    });
    for (std::size_t i = 0; i < count; ++i) accumulate(i);
  }
  if (opts.coherent)
    for (std::size_t i = 0; i < n; ++i)
      intensity[i] = coherent_re[i] * coherent_re[i] + coherent_im[i] * coherent_im[i];

  frame.layers_rendered = layers.size();
  frame.parseval_error =
      layer_parseval.empty() ? 0.0 : *std::max_element(layer_parseval.begin(), layer_parseval.end());

  // Drop the padding, then place the rendered window into the full frame.
  // Outside a crop window the object is left unfiltered; a pure-phase,
  // DC-preserving system leaves a flat background's intensity unchanged.
  RealImage raw = frame.bbox ? image : RealImage(w, h);
  const std::size_t ox = frame.bbox ? frame.bbox->x : 0;
  const std::size_t oy = frame.bbox ? frame.bbox->y : 0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) raw(ox + x, oy + y) = intensity(x, y);

  frame.intensity = normalize_min_max(raw);
  frame.raw_intensity = std::move(raw);
  const auto t1 = clock::now();
  frame.seconds = std::chrono::duration<double>(t1 - t0).count();
  frame.seconds_render = std::chrono::duration<double>(t1 - t_render).count();
  return frame;
}

} // namespace microsim
