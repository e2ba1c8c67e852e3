#include "cli.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "microsim/microsim.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace microsim::cli {

void RunConfig::validate() const {
  if (threads < 1) throw InvalidArgument("--threads must be >= 1");
  if (bins < 1) throw InvalidArgument("--bins must be >= 1");
  if (!(sigma > 0)) throw InvalidArgument("--sigma must be > 0");
  if (!(max_value > 0)) throw InvalidArgument("--max-value must be > 0");
  if (reps < 1) throw InvalidArgument("--reps must be >= 1");
  render.validate();
}

void configure_logging() {
  const char* env = std::getenv("MICROSIM_LOG");
  if (env == nullptr || *env == '\0') {
    spdlog::set_level(spdlog::level::warn);
    return;
  }
  spdlog::set_level(spdlog::level::from_str(env));
}

namespace {

OpticalConfig optics_for(const RunConfig& cfg) {
  return cfg.config_path.empty() ? OpticalConfig{} : load_optical_config(cfg.config_path);
}

RenderOptions render_options(const RunConfig& cfg) {
  auto opts = cfg.render;
  opts.threads = cfg.threads;
  return opts;
}

PoseClassSet class_set_for(const RunConfig& cfg) {
  return cfg.classes.empty() ? default_class_set() : load_class_set(cfg.classes);
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

ojson options_json(const RenderOptions& o, const RunConfig& cfg) {
  ojson j;
  j["layers"] = o.n_layers;
  j["z_min"] = o.z_min;
  j["z_max"] = o.z_max;
  j["pixel_pitch"] = o.pixel_pitch;
  j["aberration"] = o.aberration;
  j["coherent"] = o.coherent;
  j["element_train"] = o.element_train == ElementTrain::Literal ? "literal" : "focus-referenced";
  j["crop"] = o.crop;
  j["k"] = o.k;
  j["margin"] = o.margin;
  j["seed"] = cfg.seed;
  j["config"] = cfg.config_path;
  return j;
}

ojson bbox_json(const BoundingBox& b) {
  return ojson{{"x", b.x}, {"y", b.y}, {"width", b.width}, {"height", b.height}};
}

struct RenderJob {
  fs::path image;
  fs::path depth;
  std::string stem;
};

fs::path find_depth_for(const fs::path& depth_dir, const std::string& stem) {
  for (const char* ext : {".tif", ".tiff", ".png"}) {
    const auto p = depth_dir / (stem + ext);
    if (fs::exists(p)) return p;
  }
  return depth_dir / (stem + ".tif");
}

std::vector<RenderJob> render_jobs(const RunConfig& cfg) {
  if (cfg.image.empty() || cfg.depth.empty())
    throw InvalidArgument("render: --image and --depth are required");
  std::vector<RenderJob> jobs;
  if (fs::is_directory(cfg.image)) {
    if (!fs::is_directory(cfg.depth))
      throw InvalidArgument("render: --depth must be a directory when --image is one");
    for (const auto& p : io::list_files(cfg.image, {".png"})) {
      const auto stem = p.stem().string();
      jobs.push_back({p, find_depth_for(cfg.depth, stem), stem});
    }
    if (jobs.empty()) throw IoError("render: no PNG images in '" + cfg.image + "'");
  } else {
    jobs.push_back({cfg.image, cfg.depth, fs::path(cfg.image).stem().string()});
  }
  return jobs;
}

template <class Fn>
int guarded(const char* name, std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    err << name << ": error: " << e.what() << "\n";
    return 1;
  }
}

/// Manifest paths are used as written when they exist, otherwise relative to
/// the manifest's directory.
fs::path resolve(const std::string& p, const fs::path& base) {
  fs::path path(p);
  if (path.is_absolute() || fs::exists(path)) return path;
  return base / path;
}

RealImage scaled(RealImage img, double max_value) {
  if (max_value != 1.0)
    for (double& v : img.pixels()) v *= max_value;
  return img;
}

} // namespace

int cmd_render(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded("render", err, [&] {
    cfg.validate();
    if (cfg.output.empty()) throw InvalidArgument("render: --output directory is required");
    const auto optics = optics_for(cfg);
    const auto opts = render_options(cfg);
    const auto jobs = render_jobs(cfg);
    fs::create_directories(cfg.output);

    int failures = 0;
    for (const auto& job : jobs) {
      try {
        if (!fs::exists(job.depth))
          throw IoError("missing depth map '" + job.depth.string() + "' for image '" +
                        job.image.string() + "'");
        const auto image = io::load_image(job.image.string());
        const auto depth = io::load_depth(job.depth.string());
        const auto frame = render_frame(image, depth, optics, opts);
        const auto png = fs::path(cfg.output) / (job.stem + ".png");
        io::write_png(png.string(), frame.intensity);

        ojson meta;
        meta["image"] = job.image.string();
        meta["depth"] = job.depth.string();
        meta["output"] = png.string();
        meta["width"] = frame.intensity.width();
        meta["height"] = frame.intensity.height();
        meta["timing_s"] = frame.seconds;
        meta["timing_render_s"] = frame.seconds_render;
        meta["parseval_error"] = frame.parseval_error;
        meta["layers_rendered"] = frame.layers_rendered;
        meta["fft_size"] = {frame.fft_width, frame.fft_height};
        meta["options"] = options_json(opts, cfg);
        meta["bbox"] = frame.bbox ? bbox_json(*frame.bbox) : ojson(nullptr);
        write_text(fs::path(cfg.output) / (job.stem + ".json"), meta.dump(2) + "\n");
        spdlog::info("rendered {} in {:.3f} s", job.stem, frame.seconds);
        out << png.string() << "\n";
      } catch (const std::exception& e) {
        err << "render: " << job.image.string() << ": " << e.what() << "\n";
        ++failures;
      }
    }
    return failures == 0 ? 0 : 1;
  });
}

int cmd_segment(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded("segment", err, [&] {
    cfg.validate();
    if (cfg.depth.empty()) throw InvalidArgument("segment: --depth is required");
    const auto depth = io::load_depth(cfg.depth);
    const auto seg = segment_foreground(depth, cfg.render.k, cfg.render.margin, cfg.seed);
    ojson j;
    j["depth"] = cfg.depth;
    j["k"] = cfg.render.k;
    j["margin"] = cfg.render.margin;
    j["foreground_id"] = seg.foreground_id;
    j["centroids"] = seg.centroids;
    j["bbox"] = bbox_json(seg.bbox);
    const auto text = j.dump(2) + "\n";
    if (!cfg.output.empty()) write_text(cfg.output, text);
    out << text;
    return 0;
  });
}

int cmd_align(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded("align", err, [&] {
    cfg.validate();
    if (cfg.rendered.empty() || cfg.experimental.empty())
      throw InvalidArgument("align: --rendered and --experimental directories are required");
    if (cfg.pose.empty()) throw InvalidArgument("align: --pose is required");
    const auto pose = parse_pose(cfg.pose, class_set_for(cfg));

    auto load = [](const std::string& dir, std::vector<std::string>& names,
                   std::vector<RealImage>& imgs) {
      const auto files = io::list_files(dir, {".png"});
      if (files.empty()) throw IoError("align: no PNG frames in '" + dir + "'");
      for (const auto& f : files) {
        names.push_back(f.string());
        imgs.push_back(io::load_image(f.string()));
      }
    };
    std::vector<std::string> rn, en;
    std::vector<RealImage> ri, ei;
    load(cfg.rendered, rn, ri);
    load(cfg.experimental, en, ei);

    const auto manifest = align_series(rn, ri, en, ei, pose, cfg.bins, cfg.sigma, cfg.seed);
    const auto text = to_jsonl(manifest);
    if (cfg.output.empty()) {
      out << text;
    } else {
      write_text(cfg.output, text);
      out << "wrote " << manifest.pairs.size() << " pairs to " << cfg.output << "\n";
    }
    return 0;
  });
}

int cmd_metrics(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded("metrics", err, [&] {
    cfg.validate();
    struct Pair {
      fs::path a, b;
      std::string pose;
      std::size_t bin = 0;
    };
    std::vector<Pair> pairs;
    std::size_t n_bins = cfg.bins;
    if (!cfg.manifest.empty()) {
      std::ifstream in(cfg.manifest);
      if (!in) throw IoError("cannot open manifest '" + cfg.manifest + "'");
      const auto m = parse_pair_manifest(in);
      const auto base = fs::path(cfg.manifest).parent_path();
      n_bins = m.n_bins;
      for (const auto& p : m.pairs)
        pairs.push_back({resolve(p.rendered, base), resolve(p.experimental, base), p.pose, p.bin});
    } else if (!cfg.rendered.empty() && !cfg.experimental.empty()) {
      const auto a = io::list_files(cfg.rendered, {".png"});
      const auto b = io::list_files(cfg.experimental, {".png"});
      if (a.size() != b.size())
        throw DimensionError("metrics: directories hold " + std::to_string(a.size()) + " and " +
                             std::to_string(b.size()) + " frames");
      for (std::size_t i = 0; i < a.size(); ++i) pairs.push_back({a[i], b[i], cfg.pose, 0});
    } else {
      throw InvalidArgument("metrics: give --manifest or --rendered and --experimental");
    }
    if (pairs.empty()) throw InvalidArgument("metrics: no pairs to evaluate");

    SsimParams sp;
    sp.dynamic_range = cfg.max_value;
    std::ostringstream csv;
    csv << "pair_id,pose,bin,mse,psnr,ssim\n";
    double sum_mse = 0, sum_psnr = 0, sum_ssim = 0;
    std::size_t finite_psnr = 0;
    struct Cell {
      double mse = 0, psnr = 0, ssim = 0;
      std::size_t n = 0, n_psnr = 0;
    };
    std::map<std::string, std::map<std::size_t, Cell>> grid;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto a = scaled(io::load_image(pairs[i].a.string()), cfg.max_value);
      const auto b = scaled(io::load_image(pairs[i].b.string()), cfg.max_value);
      const double m = mse(a, b);
      const double p = psnr_from_mse(m, cfg.max_value);
      const double s = ssim(a, b, sp);
      csv << i << "," << pairs[i].pose << "," << pairs[i].bin << "," << format_double(m) << ","
          << format_double(p) << "," << format_double(s) << "\n";
      sum_mse += m;
      sum_ssim += s;
      if (std::isfinite(p)) {
        sum_psnr += p;
        ++finite_psnr;
      }
      auto& c = grid[pairs[i].pose][pairs[i].bin];
      c.mse += m;
      c.ssim += s;
      if (std::isfinite(p)) {
        c.psnr += p;
        ++c.n_psnr;
      }
      ++c.n;
    }
    const double n = static_cast<double>(pairs.size());
    const double mean_mse = sum_mse / n;
    const double mean_ssim = sum_ssim / n;
    // mean over finite PSNR values
    const double mean_psnr = finite_psnr ? sum_psnr / static_cast<double>(finite_psnr)
                                         : std::numeric_limits<double>::infinity();

    ojson summary;
    summary["pairs"] = pairs.size();
    summary["mean_mse"] = mean_mse;
    summary["mean_psnr"] = std::isfinite(mean_psnr) ? ojson(mean_psnr) : ojson("inf");
    summary["mean_ssim"] = mean_ssim;
    summary["infinite_psnr_pairs"] = pairs.size() - finite_psnr;
    summary["max_value"] = cfg.max_value;

    out << "pairs=" << pairs.size() << " mean_mse=" << format_double(mean_mse)
        << " mean_psnr=" << format_double(mean_psnr) << " mean_ssim=" << format_double(mean_ssim)
        << "\n";
    if (!cfg.output.empty()) {
      const fs::path dir(cfg.output);
      fs::create_directories(dir);
      write_text(dir / "metrics.csv", csv.str());
      write_text(dir / "summary.json", summary.dump(2) + "\n");
      if (cfg.grid) {
        auto emit = [&](const char* name, auto value) {
          std::ostringstream g;
          g << "pose";
          for (std::size_t b = 0; b < n_bins; ++b) g << ",bin" << b;
          g << "\n";
          for (const auto& [pose, row] : grid) {
            g << pose;
            for (std::size_t b = 0; b < n_bins; ++b) {
              g << ",";
              if (auto it = row.find(b); it != row.end()) {
                const auto v = value(it->second);
                if (v) g << format_double(*v);
              }
            }
            g << "\n";
          }
          write_text(dir / (std::string("grid_") + name + ".csv"), g.str());
        };
        using Opt = std::optional<double>;
        emit("mse", [](const Cell& c) -> Opt { return c.mse / static_cast<double>(c.n); });
        emit("ssim", [](const Cell& c) -> Opt { return c.ssim / static_cast<double>(c.n); });
        emit("psnr", [](const Cell& c) -> Opt {
          if (c.n_psnr == 0) return std::numeric_limits<double>::infinity();
          return c.psnr / static_cast<double>(c.n_psnr);
        });
      }
    } else {
      out << csv.str();
    }
    return 0;
  });
}

int cmd_dataset(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded("dataset", err, [&] {
    cfg.validate();
    if (cfg.dataset_action == "classes") {
      const auto classes = class_set_for(cfg);
      std::string text;
      for (const auto& p : classes.labels()) text += to_string(p) + "\n";
      if (cfg.output.empty())
        out << text;
      else
        write_text(cfg.output, text);
      return 0;
    }
    if (cfg.dataset_action == "pose-split") {
      std::vector<PoseLabel> a;
      if (cfg.set_a.empty())
        a = default_holdout_poses();
      else
        for (const auto& s : cfg.set_a) a.push_back(parse_pose_syntax(s));
      const auto spec = make_pose_split(class_set_for(cfg), a);
      ojson j;
      j["set_a"] = ojson::array();
      j["set_b"] = ojson::array();
      for (const auto& p : spec.set_a) j["set_a"].push_back(to_string(p));
      for (const auto& p : spec.set_b) j["set_b"].push_back(to_string(p));
      const auto text = j.dump(2) + "\n";
      if (cfg.output.empty())
        out << text;
      else
        write_text(cfg.output, text);
      return 0;
    }
    if (cfg.dataset_action == "split") {
      if (cfg.manifest.empty()) throw InvalidArgument("dataset split: --manifest is required");
      if (cfg.fractions.size() != 3)
        throw InvalidArgument("dataset split: --fractions takes three values");
      std::ifstream in(cfg.manifest);
      if (!in) throw IoError("cannot open manifest '" + cfg.manifest + "'");
      std::stringstream buf;
      buf << in.rdbuf();
      const auto text = buf.str();
      const auto first = nlohmann::json::parse(text.substr(0, text.find('\n')));
      DatasetManifest m = first.contains("n_bins") ? from_pair_manifest(parse_pair_manifest(text))
                                                   : parse_dataset_manifest(text);
      const auto classes = class_set_for(cfg);
      for (const auto& e : m.entries)
        if (!classes.contains(e.pose))
          throw ParseError("dataset split: pose " + to_string(e.pose) +
                           " is not in the class set");
      const SplitFractions f{cfg.fractions[0], cfg.fractions[1], cfg.fractions[2]};
      const auto split = split_manifest(std::move(m), f, cfg.seed);
      const auto jsonl = to_jsonl(split);
      if (cfg.output.empty()) {
        out << jsonl;
      } else {
        write_text(cfg.output, jsonl);
        out << "train=" << split.count(Split::Train) << " val=" << split.count(Split::Val)
            << " test=" << split.count(Split::Test) << "\n";
      }
      return 0;
    }
    throw InvalidArgument("dataset: action must be split, pose-split or classes");
  });
}

std::pair<RealImage, DepthMap> synthetic_frame(std::size_t width, std::size_t height,
                                               const RenderOptions& opts) {
  RealImage image(width, height);
  DepthMap depth(width, height);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = static_cast<double>(x) / static_cast<double>(width);
      const double fy = static_cast<double>(y) / static_cast<double>(height);
      image(x, y) = 0.5 + 0.25 * std::sin(40.0 * fx) * std::cos(27.0 * fy) +
                    0.2 * std::sin(9.0 * (fx + fy));
      depth(x, y) = opts.z_min + fx * (opts.z_max - opts.z_min);
    }
  return {std::move(image), std::move(depth)};
}

BenchReport run_bench(const RealImage& image, const DepthMap& depth, const OpticalConfig& optics,
                      const RenderOptions& opts, std::size_t reps) {
  if (reps < 1) throw InvalidArgument("bench: reps must be >= 1");
  (void)render_frame(image, depth, optics, opts); // plan creation and page-in
  std::vector<double> t;
  t.reserve(reps);
  for (std::size_t i = 0; i < reps; ++i)
    t.push_back(render_frame(image, depth, optics, opts).seconds);
  BenchReport r;
  r.reps = reps;
  r.mean_s = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(reps);
  std::sort(t.begin(), t.end());
  r.median_s = reps % 2 ? t[reps / 2] : 0.5 * (t[reps / 2 - 1] + t[reps / 2]);
  r.min_s = t.front();
  r.max_s = t.back();
  r.width = image.width();
  r.height = image.height();
  r.layers = opts.n_layers;
  r.threads = opts.threads;
  return r;
}

int cmd_bench(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded("bench", err, [&] {
    cfg.validate();
    const auto optics = optics_for(cfg);
    const auto opts = render_options(cfg);
    RealImage image;
    DepthMap depth;
    if (!cfg.image.empty() || !cfg.depth.empty()) {
      if (cfg.image.empty() || cfg.depth.empty())
        throw InvalidArgument("bench: give both --image and --depth, or neither");
      image = io::load_image(cfg.image);
      depth = io::load_depth(cfg.depth);
    } else {
      std::tie(image, depth) = synthetic_frame(cfg.bench_width, cfg.bench_height, opts);
    }
    const auto r = run_bench(image, depth, optics, opts, cfg.reps);
    ojson j;
    j["width"] = r.width;
    j["height"] = r.height;
    j["layers"] = r.layers;
    j["threads"] = r.threads;
    j["reps"] = r.reps;
    j["mean_s"] = r.mean_s;
    j["median_s"] = r.median_s;
    j["min_s"] = r.min_s;
    j["max_s"] = r.max_s;
    const auto text = j.dump(2) + "\n";
    if (!cfg.output.empty()) write_text(cfg.output, text);
    out << text;
    return 0;
  });
}

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.subcommand == "render") return cmd_render(cfg, out, err);
  if (cfg.subcommand == "segment") return cmd_segment(cfg, out, err);
  if (cfg.subcommand == "align") return cmd_align(cfg, out, err);
  if (cfg.subcommand == "metrics") return cmd_metrics(cfg, out, err);
  if (cfg.subcommand == "dataset") return cmd_dataset(cfg, out, err);
  if (cfg.subcommand == "bench") return cmd_bench(cfg, out, err);
  err << "unknown subcommand '" << cfg.subcommand << "'\n";
  return 2;
}

} // namespace microsim::cli
