#pragma once

// Frequency grids and the per-element optical transfer functions of the
// microscope train (eyepiece, objective, coverslip, immersion oil, sample
// medium), the numerical-aperture band limit and the primary spherical
// aberration phase.
//
// All quantities are SI: lengths in meters, spatial frequencies in cycles/m.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "microsim/error.hpp"
#include "microsim/image.hpp"

namespace microsim {

struct OpticalConfig {
  double f_obj = 50e-3;
  double f_eye = 20e-3;
  double na = 1.45;
  double lambda_vac = 632.8e-9;
  double n_oil = 1.515;
  double n_coverslip = 1.515;
  double n_sample = 1.33;
  double t_coverslip = 170e-6;
  double t_oil = 100e-6;
  double t_sample = 50e-6;

  // Calibration knobs. The coverslip transfer function carries no thickness
  // term; coverslip_scale multiplies its phase. The oil and sample slabs are
  // scaled by thickness * slab_kappa.
  double coverslip_scale = 1.0;
  double slab_kappa = 1.0;

  // Effective wavelengths seen by the two lenses. Zero means "derive":
  // objective faces the immersion oil, eyepiece faces air.
  double lambda_eff_obj = 0.0;
  double lambda_eff_eye = 0.0;

  double objective_lambda_eff() const {
    return lambda_eff_obj > 0 ? lambda_eff_obj : lambda_vac / n_oil;
  }
  double eyepiece_lambda_eff() const {
    return lambda_eff_eye > 0 ? lambda_eff_eye : lambda_vac;
  }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0) || !std::isfinite(v))
        throw InvalidArgument(std::string("optical config: ") + name +
                              " must be > 0");
    };
    auto index = [](double v, const char* name) {
      if (!(v >= 1.0) || !std::isfinite(v))
        throw InvalidArgument(std::string("optical config: ") + name +
                              " must be >= 1");
    };
    positive(f_obj, "f_obj");
    positive(f_eye, "f_eye");
    positive(na, "na");
    positive(lambda_vac, "lambda_vac");
    positive(t_coverslip, "t_coverslip");
    positive(t_oil, "t_oil");
    positive(t_sample, "t_sample");
    index(n_oil, "n_oil");
    index(n_coverslip, "n_coverslip");
    index(n_sample, "n_sample");
    if (!(coverslip_scale >= 0) || !(slab_kappa >= 0))
      throw InvalidArgument("optical config: calibration scales must be >= 0");
    if (lambda_eff_obj < 0 || lambda_eff_eye < 0)
      throw InvalidArgument("optical config: effective wavelength overrides must be >= 0");
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline double parse_double(std::string_view text, const std::string& where) {
  double value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    throw ParseError(where + ": not a number: '" + std::string(text) + "'");
  return value;
}

/// Parses `key = value` lines (with `#` comments) into a map. Duplicate keys
/// are rejected.
inline std::map<std::string, std::string>
parse_key_values(std::istream& in, const std::string& source) {
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos)
      view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto where = source + ":" + std::to_string(lineno);
    const auto eq = view.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(where + ": expected 'key = value'");
    std::string key(trim(view.substr(0, eq)));
    std::string value(trim(view.substr(eq + 1)));
    if (key.empty()) throw ParseError(where + ": empty key");
    if (!out.emplace(key, value).second)
      throw ParseError(where + ": duplicate key '" + key + "'");
  }
  return out;
}

} // namespace detail

/// Reads an OpticalConfig from `key = value` text. Unknown keys are errors;
/// missing keys keep their defaults.
inline OpticalConfig parse_optical_config(std::istream& in,
                                          const std::string& source = "<config>") {
  OpticalConfig cfg;
  const std::map<std::string_view, double OpticalConfig::*> fields{
      {"f_obj", &OpticalConfig::f_obj},
      {"f_eye", &OpticalConfig::f_eye},
      {"na", &OpticalConfig::na},
      {"lambda_vac", &OpticalConfig::lambda_vac},
      {"n_oil", &OpticalConfig::n_oil},
      {"n_coverslip", &OpticalConfig::n_coverslip},
      {"n_sample", &OpticalConfig::n_sample},
      {"t_coverslip", &OpticalConfig::t_coverslip},
      {"t_oil", &OpticalConfig::t_oil},
      {"t_sample", &OpticalConfig::t_sample},
      {"coverslip_scale", &OpticalConfig::coverslip_scale},
      {"slab_kappa", &OpticalConfig::slab_kappa},
      {"lambda_eff_obj", &OpticalConfig::lambda_eff_obj},
      {"lambda_eff_eye", &OpticalConfig::lambda_eff_eye},
  };
  for (const auto& [key, value] : detail::parse_key_values(in, source)) {
    auto it = fields.find(key);
    if (it == fields.end())
      throw ParseError(source + ": unknown key '" + key + "'");
    cfg.*(it->second) = detail::parse_double(value, source + ": " + key);
  }
  cfg.validate();
  return cfg;
}

inline OpticalConfig load_optical_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open optical config '" + path + "'");
  return parse_optical_config(in, path);
}

/// Spatial-frequency coordinates of a width x height DFT grid. Axes follow
/// the standard DFT ordering: 0, df, 2df, ..., then the negative half.
class FrequencyGrid {
public:
  FrequencyGrid(std::size_t width, std::size_t height, double pixel_pitch)
      : width_(width), height_(height), pixel_pitch_(pixel_pitch),
        u_(axis(width, pixel_pitch)), v_(axis(height, pixel_pitch)) {}

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  double pixel_pitch() const noexcept { return pixel_pitch_; }
  double du() const noexcept { return 1.0 / (width_ * pixel_pitch_); }
  double dv() const noexcept { return 1.0 / (height_ * pixel_pitch_); }
  double nyquist() const noexcept { return 0.5 / pixel_pitch_; }

  std::span<const double> u() const noexcept { return u_; }
  std::span<const double> v() const noexcept { return v_; }
  double u(std::size_t x) const { return u_[x]; }
  double v(std::size_t y) const { return v_[y]; }
  double radius2(std::size_t x, std::size_t y) const {
    return u_[x] * u_[x] + v_[y] * v_[y];
  }

  friend bool operator==(const FrequencyGrid& a, const FrequencyGrid& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ &&
           a.pixel_pitch_ == b.pixel_pitch_;
  }

private:
  static std::vector<double> axis(std::size_t n, double pitch) {
    std::vector<double> f(n);
    const double step = 1.0 / (static_cast<double>(n) * pitch);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<long long>(i);
      const auto nn = static_cast<long long>(n);
      f[i] = static_cast<double>(2 * k < nn ? k : k - nn) * step;
    }
    return f;
  }

  std::size_t width_;
  std::size_t height_;
  double pixel_pitch_;
  std::vector<double> u_;
  std::vector<double> v_;
};

inline FrequencyGrid make_frequency_grid(std::size_t width, std::size_t height,
                                         double pixel_pitch) {
  if (width < 2 || height < 2)
    throw InvalidArgument("frequency grid needs at least 2x2 cells");
  if (!(pixel_pitch > 0) || !std::isfinite(pixel_pitch))
    throw InvalidArgument("pixel pitch must be > 0");
  return FrequencyGrid(width, height, pixel_pitch);
}

/// Complex transfer-function values on a frequency grid.
struct SpectrumField {
  FrequencyGrid grid;
  ComplexImage values;

  explicit SpectrumField(FrequencyGrid g, Complex fill = {1.0, 0.0})
      : grid(std::move(g)), values(grid.width(), grid.height(), fill) {}

  std::size_t width() const noexcept { return grid.width(); }
  std::size_t height() const noexcept { return grid.height(); }
  Complex operator()(std::size_t x, std::size_t y) const { return values(x, y); }
};

/// Field with value exp(i * phase(U^2 + V^2)) per cell.
inline SpectrumField radial_phase_field(const FrequencyGrid& grid,
                                        const std::function<double(double)>& phase) {
  SpectrumField out(grid);
  for (std::size_t y = 0; y < grid.height(); ++y)
    for (std::size_t x = 0; x < grid.width(); ++x)
      out.values(x, y) = std::polar(1.0, phase(grid.radius2(x, y)));
  return out;
}

/// Thin-lens transfer function exp(-i pi (U^2+V^2) lambda_eff / f).
inline SpectrumField lens_otf(const FrequencyGrid& grid, double focal_length,
                              double lambda_eff) {
  if (!(focal_length > 0) || !(lambda_eff > 0))
    throw InvalidArgument("lens_otf: focal length and wavelength must be > 0");
  const double c = -std::numbers::pi * lambda_eff / focal_length;
  return radial_phase_field(grid, [c](double r2) { return c * r2; });
}

/// Slab transfer function exp(sign * i 2 pi lambda_medium * scale * (U^2+V^2)).
/// With sign = +1 and scale = 1 this is the coverslip form as written; the
/// product lambda * (U^2 + V^2) is not dimensionless, `scale` is the knob that
/// absorbs the missing length.
inline SpectrumField slab_otf(const FrequencyGrid& grid, double lambda_medium,
                              int sign, double scale = 1.0) {
  if (!(lambda_medium > 0))
    throw InvalidArgument("slab_otf: wavelength must be > 0");
  if (sign != 1 && sign != -1)
    throw InvalidArgument("slab_otf: sign must be +1 or -1");
  const double c = sign * 2.0 * std::numbers::pi * lambda_medium * scale;
  return radial_phase_field(grid, [c](double r2) { return c * r2; });
}

/// Element-wise product of all components.
inline SpectrumField total_otf(std::span<const SpectrumField> components) {
  if (components.empty())
    throw InvalidArgument("total_otf: at least one component required");
  SpectrumField out = components.front();
  for (const auto& c : components.subspan(1)) {
    if (!(c.grid == out.grid))
      throw DimensionError("total_otf: components live on different grids");
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] *= c.values[i];
  }
  return out;
}

/// The five element transfer functions in train order: eyepiece, objective,
/// coverslip, immersion oil, sample medium.
inline std::vector<SpectrumField> element_train(const FrequencyGrid& grid,
                                                const OpticalConfig& cfg) {
  cfg.validate();
  std::vector<SpectrumField> train;
  train.reserve(5);
  train.push_back(lens_otf(grid, cfg.f_eye, cfg.eyepiece_lambda_eff()));
  train.push_back(lens_otf(grid, cfg.f_obj, cfg.objective_lambda_eff()));
  train.push_back(slab_otf(grid, cfg.lambda_vac / cfg.n_coverslip, +1,
                           cfg.coverslip_scale));
  train.push_back(slab_otf(grid, cfg.lambda_vac / cfg.n_oil, +1,
                           cfg.t_oil * cfg.slab_kappa));
  train.push_back(slab_otf(grid, cfg.lambda_vac / cfg.n_sample, +1,
                           cfg.t_sample * cfg.slab_kappa));
  return train;
}

/// Every element is exp(i c_k (U^2+V^2)); returns sum of c_k in rad*m^2.
/// The product of the train is therefore a pure quadratic (defocus-like)
/// phase with this coefficient.
inline double element_train_phase_coefficient(const OpticalConfig& cfg) {
  cfg.validate();
  const double pi = std::numbers::pi;
  return -pi * cfg.eyepiece_lambda_eff() / cfg.f_eye -
         pi * cfg.objective_lambda_eff() / cfg.f_obj +
         2 * pi * (cfg.lambda_vac / cfg.n_coverslip) * cfg.coverslip_scale +
         2 * pi * (cfg.lambda_vac / cfg.n_oil) * cfg.t_oil * cfg.slab_kappa +
         2 * pi * (cfg.lambda_vac / cfg.n_sample) * cfg.t_sample * cfg.slab_kappa;
}

/// Highest resolvable spatial frequency, NA * n_oil / lambda_vac.
inline double na_cutoff(const OpticalConfig& cfg) {
  // NA = 0 is admissible here (the formula is linear in it); everything else
  // must be a physical value.
  if (!(cfg.na >= 0)) throw InvalidArgument("na_cutoff: na must be >= 0");
  if (!(cfg.lambda_vac > 0)) throw InvalidArgument("na_cutoff: lambda_vac must be > 0");
  if (!(cfg.n_oil >= 1)) throw InvalidArgument("na_cutoff: n_oil must be >= 1");
  return cfg.na * cfg.n_oil / cfg.lambda_vac;
}

/// Zeroes every cell whose radial frequency exceeds `cutoff`.
inline SpectrumField apply_na_mask(SpectrumField field, double cutoff) {
  const double c2 = cutoff * cutoff;
  for (std::size_t y = 0; y < field.height(); ++y)
    for (std::size_t x = 0; x < field.width(); ++x)
      if (field.grid.radius2(x, y) > c2) field.values(x, y) = Complex(0.0, 0.0);
  return field;
}

/// Primary spherical aberration sqrt(3)(2 rho^2 - 1) with rho the radial
/// frequency normalized by `cutoff`, clamped to the pupil edge.
inline double zernike_spherical(double rho) {
  rho = std::clamp(rho, 0.0, 1.0);
  return std::numbers::sqrt3 * (2.0 * rho * rho - 1.0);
}

inline RealImage zernike_spherical_phase(const FrequencyGrid& grid, double cutoff) {
  if (!(cutoff > 0)) throw InvalidArgument("zernike phase: cutoff must be > 0");
  RealImage z4(grid.width(), grid.height());
  for (std::size_t y = 0; y < grid.height(); ++y)
    for (std::size_t x = 0; x < grid.width(); ++x)
      z4(x, y) = zernike_spherical(std::sqrt(grid.radius2(x, y)) / cutoff);
  return z4;
}

/// value <- value * exp(i * coefficient * z4) per cell.
inline SpectrumField apply_aberration(SpectrumField field, const RealImage& z4,
                                      double coefficient = 1.0) {
  require_same_shape(field.values, z4, "apply_aberration");
  for (std::size_t i = 0; i < z4.size(); ++i)
    field.values[i] *= std::polar(1.0, coefficient * z4[i]);
  return field;
}

} // namespace microsim
