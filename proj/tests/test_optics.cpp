#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "microsim/optics.hpp"
#include "oracles.hpp"

using namespace microsim;

namespace {

double wrapped(double phase) { return std::remainder(phase, 2.0 * std::numbers::pi); }

} // namespace

TEST(FrequencyGrid, DftOrderingOnFourCells) {
  const auto g = make_frequency_grid(4, 4, 1e-6);
  const std::vector<double> expected{0.0, 0.25e6, -0.5e6, -0.25e6};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(g.u(i), expected[i]);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(g.v(i), expected[i]);
}

TEST(FrequencyGrid, NyquistOnTwoCells) {
  const double p = 0.37e-6;
  const auto g = make_frequency_grid(2, 2, p);
  double max_abs = 0;
  for (double u : g.u()) max_abs = std::max(max_abs, std::abs(u));
  EXPECT_DOUBLE_EQ(max_abs, 1.0 / (2.0 * p));
  EXPECT_DOUBLE_EQ(g.nyquist(), 1.0 / (2.0 * p));
}

TEST(FrequencyGrid, StepAt256) {
  const auto g = make_frequency_grid(256, 256, 0.1e-6);
  EXPECT_NEAR(g.du(), 39062.5, 1e-6);
  EXPECT_NEAR(g.u(1) - g.u(0), 39062.5, 1e-6);
}

TEST(FrequencyGrid, SingleDcCellAndMaxIsNyquist) {
  for (auto [w, h] : {std::pair{8, 8}, {7, 5}, {16, 9}}) {
    const auto g = make_frequency_grid(w, h, 0.2e-6);
    int dc = 0;
    for (std::size_t y = 0; y < g.height(); ++y)
      for (std::size_t x = 0; x < g.width(); ++x) dc += g.radius2(x, y) == 0.0;
    EXPECT_EQ(dc, 1);
    double m = 0;
    for (double u : g.u()) m = std::max(m, std::abs(u));
    EXPECT_LE(m, g.nyquist() + 1e-6);
    if (w % 2 == 0) EXPECT_DOUBLE_EQ(m, g.nyquist());
  }
}

TEST(FrequencyGrid, ConjugateSymmetricLayout) {
  const auto g = make_frequency_grid(10, 7, 0.1e-6);
  for (std::size_t i = 1; i < g.width(); ++i)
    if (2 * i != g.width()) EXPECT_DOUBLE_EQ(g.u(i), -g.u(g.width() - i));
  for (std::size_t i = 1; i < g.height(); ++i) EXPECT_DOUBLE_EQ(g.v(i), -g.v(g.height() - i));
}

TEST(FrequencyGrid, RejectsBadInputs) {
  EXPECT_THROW(make_frequency_grid(1, 4, 1e-6), InvalidArgument);
  EXPECT_THROW(make_frequency_grid(4, 0, 1e-6), InvalidArgument);
  EXPECT_THROW(make_frequency_grid(4, 4, 0.0), InvalidArgument);
  EXPECT_THROW(make_frequency_grid(4, 4, -1e-6), InvalidArgument);
}

TEST(LensOtf, DcIsOne) {
  const auto g = make_frequency_grid(8, 8, 0.1e-6);
  const auto h = lens_otf(g, 50e-3, 632.8e-9);
  EXPECT_EQ(h(0, 0), Complex(1.0, 0.0));
}

TEST(LensOtf, PhaseAtOneMegacycle) {
  // u = 1e6 cycles/m: 10 cells with du = 1e5.
  const auto g = make_frequency_grid(20, 2, 0.5e-6);
  ASSERT_DOUBLE_EQ(g.u(10), -1e6);
  const auto h = lens_otf(g, 50e-3, 632.8e-9);
  const double expected = -std::numbers::pi * 1e12 * 632.8e-9 / 50e-3;
  EXPECT_NEAR(expected, -3.97599966e7, 1.0);
  // phase of ~4e7 rad: compare to a few ulps of its magnitude
  EXPECT_NEAR(wrapped(std::arg(h(10, 0)) - expected), 0.0, 1e-14 * std::abs(expected));
}

TEST(LensOtf, UnitMagnitude) {
  const auto g = make_frequency_grid(64, 48, 0.1e-6);
  const auto h = lens_otf(g, 20e-3, 632.8e-9);
  for (const auto& v : h.values.pixels()) EXPECT_NEAR(std::abs(v), 1.0, 1e-12);
}

TEST(LensOtf, RejectsNonPositive) {
  const auto g = make_frequency_grid(4, 4, 1e-6);
  EXPECT_THROW(lens_otf(g, 0.0, 1e-7), InvalidArgument);
  EXPECT_THROW(lens_otf(g, 1e-2, -1e-7), InvalidArgument);
}

TEST(SlabOtf, DcIsOne) {
  const auto g = make_frequency_grid(8, 8, 0.1e-6);
  EXPECT_EQ(slab_otf(g, 4.177e-7, +1)(0, 0), Complex(1.0, 0.0));
}

TEST(SlabOtf, PhaseAtUnitRadiusSquared) {
  // U^2 + V^2 = 1e12: u = 1e6 cycles/m.
  const auto g = make_frequency_grid(20, 2, 0.5e-6);
  const double lambda = 632.8e-9 / 1.515;
  const auto h = slab_otf(g, lambda, +1);
  const double expected = 2.0 * std::numbers::pi * lambda * 1e12;
  EXPECT_NEAR(expected, 2.625e6, 1e3);
  // Phase of order 1e6 rad: double rounding of the argument is ~1e-10 rad.
  EXPECT_NEAR(wrapped(std::arg(h(10, 0)) - expected), 0.0, 1e-8);
}

TEST(SlabOtf, SignsAreConjugate) {
  const auto g = make_frequency_grid(16, 12, 0.1e-6);
  const auto p = slab_otf(g, 4.2e-7, +1);
  const auto m = slab_otf(g, 4.2e-7, -1);
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    EXPECT_EQ(std::conj(p.values[i]), m.values[i]);
    EXPECT_NEAR(std::abs(p.values[i]), 1.0, 1e-12);
  }
}

TEST(SlabOtf, RejectsBadArguments) {
  const auto g = make_frequency_grid(4, 4, 1e-6);
  EXPECT_THROW(slab_otf(g, 0.0, 1), InvalidArgument);
  EXPECT_THROW(slab_otf(g, 1e-7, 0), InvalidArgument);
}

TEST(TotalOtf, SingleComponentUnchanged) {
  const auto g = make_frequency_grid(8, 6, 0.1e-6);
  const std::vector<SpectrumField> one{lens_otf(g, 50e-3, 4e-7)};
  EXPECT_EQ(total_otf(one).values, one[0].values);
}

TEST(TotalOtf, UnitMagnitudeProductAndDc) {
  const auto g = make_frequency_grid(16, 16, 0.1e-6);
  const std::vector<SpectrumField> two{lens_otf(g, 20e-3, 632.8e-9),
                                       lens_otf(g, 50e-3, 632.8e-9 / 1.515)};
  const auto t = total_otf(two);
  EXPECT_EQ(t(0, 0), Complex(1.0, 0.0));
  for (const auto& v : t.values.pixels()) EXPECT_NEAR(std::abs(v), 1.0, 1e-12);
}

TEST(TotalOtf, CommutativeAndAssociative) {
  const auto g = make_frequency_grid(12, 10, 0.1e-6);
  const auto a = lens_otf(g, 20e-3, 632.8e-9);
  const auto b = slab_otf(g, 4e-7, -1, 1e-5);
  const auto c = slab_otf(g, 5e-7, +1, 3e-5);
  const auto abc = total_otf(std::vector{a, b, c});
  const auto cab = total_otf(std::vector{c, a, b});
  const auto ab = total_otf(std::vector{a, b});
  const auto ab_c = total_otf(std::vector{ab, c});
  for (std::size_t i = 0; i < abc.values.size(); ++i) {
    EXPECT_NEAR(std::abs(abc.values[i] - cab.values[i]), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(abc.values[i] - ab_c.values[i]), 0.0, 1e-12);
  }
}

TEST(TotalOtf, Errors) {
  EXPECT_THROW(total_otf(std::vector<SpectrumField>{}), InvalidArgument);
  const auto a = lens_otf(make_frequency_grid(8, 8, 1e-7), 1e-2, 5e-7);
  const auto b = lens_otf(make_frequency_grid(8, 4, 1e-7), 1e-2, 5e-7);
  EXPECT_THROW(total_otf(std::vector{a, b}), DimensionError);
}

TEST(ElementTrain, FiveUnitElementsMatchingCoefficient) {
  const OpticalConfig cfg;
  const auto g = make_frequency_grid(16, 16, 0.1e-6);
  const auto train = element_train(g, cfg);
  ASSERT_EQ(train.size(), 5u);
  const auto t = total_otf(train);
  const double c = element_train_phase_coefficient(cfg);
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 16; ++x) {
      EXPECT_NEAR(std::abs(t(x, y)), 1.0, 1e-12);
      const auto expected = std::polar(1.0, c * g.radius2(x, y));
      // large phases: compare on the unit circle with a phase-scaled budget
      EXPECT_NEAR(std::abs(t(x, y) - expected), 0.0,
                  1e-12 + 1e-15 * std::abs(c * g.radius2(x, y)) * 8);
    }
}

TEST(NaCutoff, PaperConstants) {
  const OpticalConfig cfg;
  const double c = na_cutoff(cfg);
  EXPECT_NEAR(c / 3.4715e6 - 1.0, 0.0, 1e-3);
  EXPECT_DOUBLE_EQ(c, 1.45 * 1.515 / 632.8e-9);
}

TEST(NaCutoff, ZeroNaAndScaling) {
  OpticalConfig cfg;
  const double base = na_cutoff(cfg);
  cfg.na = 0.0;
  EXPECT_EQ(na_cutoff(cfg), 0.0);

  cfg = {};
  cfg.lambda_vac *= 2;
  EXPECT_NEAR(na_cutoff(cfg) / base, 0.5, 1e-15);
  cfg = {};
  cfg.na *= 0.5;
  EXPECT_NEAR(na_cutoff(cfg) / base, 0.5, 1e-15);
  cfg = {};
  cfg.n_oil *= 1.2;
  EXPECT_NEAR(na_cutoff(cfg) / base, 1.2, 1e-15);
}

TEST(NaCutoff, RejectsNegativeNa) {
  OpticalConfig cfg;
  cfg.na = -0.1;
  EXPECT_THROW(na_cutoff(cfg), InvalidArgument);
}

TEST(NaMask, CutoffAboveNyquistIsIdentity) {
  std::mt19937_64 rng(1);
  const auto g = make_frequency_grid(32, 24, 0.1e-6);
  SpectrumField f(g);
  f.values = oracle::random_field(32, 24, rng);
  const auto m = apply_na_mask(f, 10.0 * g.nyquist());
  EXPECT_EQ(m.values, f.values);
}

TEST(NaMask, TinyCutoffKeepsOnlyDc) {
  std::mt19937_64 rng(2);
  const auto g = make_frequency_grid(16, 16, 0.1e-6);
  SpectrumField f(g);
  f.values = oracle::random_field(16, 16, rng);
  const auto m = apply_na_mask(f, 1e-300);
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 16; ++x) {
      if (x == 0 && y == 0)
        EXPECT_EQ(m(x, y), f(x, y));
      else
        EXPECT_EQ(m(x, y), Complex(0.0, 0.0));
    }
}

TEST(NaMask, ZeroCountMatchesBruteForceRadiusCount) {
  std::mt19937_64 rng(3);
  const auto g = make_frequency_grid(40, 30, 0.1e-6);
  SpectrumField f(g);
  f.values = oracle::random_field(40, 30, rng);
  const double cutoff = 0.5 * g.nyquist();
  const auto m = apply_na_mask(f, cutoff);
  std::size_t expected_zero = 0, zero = 0;
  for (std::size_t y = 0; y < 30; ++y)
    for (std::size_t x = 0; x < 40; ++x) {
      // independent radius from the raw DFT indices
      const double fx = (2 * x < 40 ? double(x) : double(x) - 40.0) / (40 * 0.1e-6);
      const double fy = (2 * y < 30 ? double(y) : double(y) - 30.0) / (30 * 0.1e-6);
      const bool outside = std::sqrt(fx * fx + fy * fy) > cutoff;
      expected_zero += outside;
      zero += m(x, y) == Complex(0.0, 0.0);
      if (!outside) EXPECT_EQ(m(x, y), f(x, y));
    }
  EXPECT_EQ(zero, expected_zero);
  EXPECT_GT(expected_zero, 0u);
}

TEST(NaMask, Idempotent) {
  std::mt19937_64 rng(4);
  const auto g = make_frequency_grid(33, 17, 0.1e-6);
  SpectrumField f(g);
  f.values = oracle::random_field(33, 17, rng);
  const auto once = apply_na_mask(f, na_cutoff(OpticalConfig{}));
  const auto twice = apply_na_mask(once, na_cutoff(OpticalConfig{}));
  EXPECT_EQ(once.values, twice.values);
}

TEST(Zernike, AnchorPoints) {
  EXPECT_NEAR(zernike_spherical(0.0), -std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(zernike_spherical(1.0 / std::sqrt(2.0)), 0.0, 1e-12);
  EXPECT_NEAR(zernike_spherical(1.0), std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(zernike_spherical(-std::sqrt(3.0)), -std::sqrt(3.0), 0.0); // clamped to 0
  EXPECT_NEAR(zernike_spherical(2.0), std::sqrt(3.0), 1e-12);           // clamped to 1
}

TEST(Zernike, PhaseFieldAnchorsOnGrid) {
  const auto g = make_frequency_grid(64, 64, 0.1e-6);
  // cutoff = 4 cells: rho = 0 at DC, 1 at u = 4 du, clamped beyond.
  const double cutoff = 4.0 * g.du();
  const auto z4 = zernike_spherical_phase(g, cutoff);
  EXPECT_NEAR(z4(0, 0), -std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(z4(4, 0), std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(z4(20, 0), std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(z4(2, 2), 2.0 * std::sqrt(3.0) * (8.0 / 16.0) - std::sqrt(3.0), 1e-12);
}

TEST(Zernike, RadialSymmetry) {
  const auto g = make_frequency_grid(128, 128, 0.1e-6);
  const auto z4 = zernike_spherical_phase(g, na_cutoff(OpticalConfig{}));
  std::map<long long, double> by_radius;
  for (std::size_t y = 0; y < 128; ++y)
    for (std::size_t x = 0; x < 128; ++x) {
      const long long ix = 2 * x < 128 ? long(x) : long(x) - 128;
      const long long iy = 2 * y < 128 ? long(y) : long(y) - 128;
      const auto key = ix * ix + iy * iy;
      auto [it, fresh] = by_radius.emplace(key, z4(x, y));
      if (!fresh) EXPECT_NEAR(z4(x, y), it->second, 1e-12);
    }
}

TEST(Zernike, RejectsNonPositiveCutoff) {
  const auto g = make_frequency_grid(8, 8, 0.1e-6);
  EXPECT_THROW(zernike_spherical_phase(g, 0.0), InvalidArgument);
}

TEST(Aberration, ZeroPhaseIsIdentity) {
  std::mt19937_64 rng(5);
  const auto g = make_frequency_grid(16, 8, 0.1e-6);
  SpectrumField f(g);
  f.values = oracle::random_field(16, 8, rng);
  const auto out = apply_aberration(f, RealImage(16, 8, 0.0));
  EXPECT_EQ(out.values, f.values);
}

TEST(Aberration, PiPhaseNegatesUnitField) {
  const auto g = make_frequency_grid(8, 8, 0.1e-6);
  const auto out = apply_aberration(SpectrumField(g), RealImage(8, 8, std::numbers::pi));
  for (const auto& v : out.values.pixels()) EXPECT_NEAR(std::abs(v - Complex(-1.0, 0.0)), 0, 1e-15);
}

TEST(Aberration, MagnitudesPreservedAndShapeChecked) {
  std::mt19937_64 rng(6);
  const auto g = make_frequency_grid(20, 12, 0.1e-6);
  SpectrumField f(g);
  f.values = oracle::random_field(20, 12, rng);
  const auto z4 = zernike_spherical_phase(g, 0.3 * g.nyquist());
  const auto out = apply_aberration(f, z4);
  for (std::size_t i = 0; i < f.values.size(); ++i)
    EXPECT_NEAR(std::abs(out.values[i]), std::abs(f.values[i]), 1e-12);
  EXPECT_THROW(apply_aberration(f, RealImage(12, 20)), DimensionError);
}

TEST(OpticalConfigFile, ParsesKeysCommentsAndDefaults) {
  std::istringstream in("# microscope\nna = 1.4\nlambda_vac=500e-9  # green\n\n f_obj = 0.04\n");
  const auto cfg = parse_optical_config(in);
  EXPECT_DOUBLE_EQ(cfg.na, 1.4);
  EXPECT_DOUBLE_EQ(cfg.lambda_vac, 500e-9);
  EXPECT_DOUBLE_EQ(cfg.f_obj, 0.04);
  EXPECT_DOUBLE_EQ(cfg.f_eye, 20e-3);
  EXPECT_DOUBLE_EQ(cfg.n_sample, 1.33);
}

TEST(OpticalConfigFile, Errors) {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return parse_optical_config(in);
  };
  EXPECT_THROW(parse("focal = 1\n"), ParseError);
  EXPECT_THROW(parse("na = abc\n"), ParseError);
  EXPECT_THROW(parse("na 1.2\n"), ParseError);
  EXPECT_THROW(parse("na = 1\nna = 1.1\n"), ParseError);
  EXPECT_THROW(parse("na = 0\n"), InvalidArgument);
  EXPECT_THROW(parse("n_oil = 0.9\n"), InvalidArgument);
  EXPECT_THROW(parse("t_oil = -1e-6\n"), InvalidArgument);
  EXPECT_THROW(load_optical_config("/nonexistent/microscope.cfg"), IoError);
}

TEST(OpticalConfig, DefaultsAndEffectiveWavelengths) {
  const OpticalConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.f_obj, 50e-3);
  EXPECT_DOUBLE_EQ(cfg.f_eye, 20e-3);
  EXPECT_DOUBLE_EQ(cfg.na, 1.45);
  EXPECT_DOUBLE_EQ(cfg.lambda_vac, 632.8e-9);
  EXPECT_DOUBLE_EQ(cfg.n_oil, 1.515);
  EXPECT_DOUBLE_EQ(cfg.n_coverslip, 1.515);
  EXPECT_DOUBLE_EQ(cfg.n_sample, 1.33);
  EXPECT_DOUBLE_EQ(cfg.objective_lambda_eff(), 632.8e-9 / 1.515);
  EXPECT_DOUBLE_EQ(cfg.eyepiece_lambda_eff(), 632.8e-9);
  OpticalConfig o;
  o.lambda_eff_obj = 3e-7;
  EXPECT_DOUBLE_EQ(o.objective_lambda_eff(), 3e-7);
}
