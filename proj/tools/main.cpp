#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cli.hpp"

namespace {

void add_render_flags(CLI::App* app, microsim::cli::RunConfig& c) {
  auto& r = c.render;
  app->add_option("--config", c.config_path, "Optical config file (key = value)");
  app->add_option("--layers", r.n_layers, "Number of depth layers")->check(CLI::PositiveNumber);
  app->add_option("--zmin", r.z_min, "Lower depth bound [m]");
  app->add_option("--zmax", r.z_max, "Upper depth bound [m]");
  app->add_option("--pixel-pitch", r.pixel_pitch, "Object-plane pixel pitch [m]");
  app->add_flag("--no-aberration", [&r](std::int64_t) { r.aberration = false; },
                "Disable the spherical-aberration phase");
  app->add_option("--aberration-coefficient", r.aberration_coefficient);
  app->add_flag("--coherent", r.coherent, "Sum layer fields coherently");
  app->add_flag("--literal-train", [&r](std::int64_t) {
    r.element_train = microsim::ElementTrain::Literal;
  }, "Use the literal element-train product");
  app->add_flag("--crop", r.crop, "Render only the segmented foreground window");
  app->add_option("--k", r.k, "k-means cluster count");
  app->add_option("--margin", r.margin, "Crop margin [px]");
}

} // namespace

int main(int argc, char** argv) {
  microsim::cli::configure_logging();
  microsim::cli::RunConfig c;

  CLI::App app{"microsim: wave-optics microscope image simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", c.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* render = app.add_subcommand("render", "Render image + depth into a simulated frame");
  render->add_option("--image", c.image, "PNG image or directory")->required();
  render->add_option("--depth", c.depth, "Depth map (TIFF / 16-bit PNG) or directory")->required();
  render->add_option("-o,--output", c.output, "Output directory")->required();
  add_render_flags(render, c);

  auto* segment = app.add_subcommand("segment", "k-means foreground crop of a depth map");
  segment->add_option("--depth", c.depth, "Depth map")->required();
  segment->add_option("--k", c.render.k, "Cluster count");
  segment->add_option("--margin", c.render.margin, "Crop margin [px]");
  segment->add_option("-o,--output", c.output, "JSON output file");

  auto* align = app.add_subcommand("align", "Depth-align rendered and experimental sweeps");
  align->add_option("--rendered", c.rendered, "Rendered frame directory")->required();
  align->add_option("--experimental", c.experimental, "Experimental frame directory")->required();
  align->add_option("--pose", c.pose, "Pose label, e.g. P0_R60")->required();
  align->add_option("--classes", c.classes, "Pose class-set file");
  align->add_option("--sigma", c.sigma, "LoG sigma [px]");
  align->add_option("--bins", c.bins, "Depth bins");
  align->add_option("-o,--output", c.output, "Manifest output (JSONL)");

  auto* metrics = app.add_subcommand("metrics", "MSE / PSNR / SSIM over image pairs");
  metrics->add_option("--manifest", c.manifest, "Pair manifest (JSONL)");
  metrics->add_option("--rendered", c.rendered, "First image directory");
  metrics->add_option("--experimental", c.experimental, "Second image directory");
  metrics->add_option("--pose", c.pose, "Pose label for directory mode");
  metrics->add_option("--bins", c.bins, "Depth bins for the grid (directory mode)");
  metrics->add_option("--max-value", c.max_value, "Peak value (1 or 255)");
  metrics->add_flag("--grid", c.grid, "Also write pose x depth-bin grids");
  metrics->add_option("-o,--output", c.output, "Report directory");

  auto* dataset = app.add_subcommand("dataset", "Dataset manifests and pose splits");
  dataset->add_option("action", c.dataset_action, "split | pose-split | classes")
      ->required()
      ->check(CLI::IsMember({"split", "pose-split", "classes"}));
  dataset->add_option("--manifest", c.manifest, "Pair or dataset manifest (JSONL)");
  dataset->add_option("--fractions", c.fractions, "train val test")->expected(3);
  dataset->add_option("--classes", c.classes, "Pose class-set file");
  dataset->add_option("--set-a", c.set_a, "Held-out poses")->delimiter(',');
  dataset->add_option("-o,--output", c.output, "Output file");

  auto* bench = app.add_subcommand("bench", "Time render_frame over repetitions");
  bench->add_option("--image", c.image, "PNG image (default: synthetic)");
  bench->add_option("--depth", c.depth, "Depth map (default: synthetic)");
  bench->add_option("--reps", c.reps, "Repetitions")->check(CLI::PositiveNumber);
  bench->add_option("--width", c.bench_width, "Synthetic width");
  bench->add_option("--height", c.bench_height, "Synthetic height");
  bench->add_option("-o,--output", c.output, "JSON report file");
  add_render_flags(bench, c);

  CLI11_PARSE(app, argc, argv);
  for (auto* sub : app.get_subcommands()) c.subcommand = sub->get_name();
  return microsim::cli::run(c, std::cout, std::cerr);
}
