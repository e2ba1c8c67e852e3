#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "microsim/optics.hpp"
#include "microsim/render.hpp"

namespace microsim::cli {

struct RunConfig {
  std::string subcommand;

  // inputs / outputs
  std::string image;         // file or directory
  std::string depth;         // file or directory
  std::string output;        // file or directory, per subcommand
  std::string config_path;   // optical config; empty -> defaults
  std::string rendered;      // directory
  std::string experimental;  // directory
  std::string manifest;
  std::string classes;       // class-set file; empty -> built-in default
  std::string pose;

  RenderOptions render;
  std::uint64_t seed = 42;
  std::size_t threads = 1;

  // align / metrics
  double sigma = 2.0;
  std::size_t bins = 40;
  double max_value = 1.0;
  bool grid = false;

  // dataset
  std::string dataset_action; // split | pose-split | classes
  std::vector<double> fractions{0.70, 0.15, 0.15};
  std::vector<std::string> set_a;

  // bench
  std::size_t reps = 20;
  std::size_t bench_width = 678;
  std::size_t bench_height = 488;

  void validate() const;
};

int cmd_render(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_segment(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_align(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_metrics(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_dataset(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_bench(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Dispatches on `cfg.subcommand`.
int run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

struct BenchReport {
  std::size_t reps = 0;
  double mean_s = 0;
  double median_s = 0;
  double min_s = 0;
  double max_s = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t layers = 0;
  std::size_t threads = 0;
};

/// Synthetic bench input: textured object whose depth ramps across the
/// full layer range, so every layer is occupied.
std::pair<RealImage, DepthMap> synthetic_frame(std::size_t width, std::size_t height,
                                               const RenderOptions& opts);

BenchReport run_bench(const RealImage& image, const DepthMap& depth, const OpticalConfig& optics,
                      const RenderOptions& opts, std::size_t reps);

/// Reads MICROSIM_LOG (trace, debug, info, warn, error, off) into the
/// default logger level.
void configure_logging();

} // namespace microsim::cli
