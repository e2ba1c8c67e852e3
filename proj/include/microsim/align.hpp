#pragma once

// Focus-measure alignment of a rendered and an experimental focus sweep.
//
// Each frame gets a Laplacian-of-Gaussian focus measure. The sharpest frame
// of a sweep is its focal plane; frames are placed on a normalized depth axis
// around it, bucketed into depth bins, the two sweeps are balanced bin by bin
// with seeded subsampling, and the survivors are paired one-to-one.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "microsim/error.hpp"
#include "microsim/filters.hpp"
#include "microsim/image.hpp"
#include "microsim/pose.hpp"
#include "microsim/random.hpp"

namespace microsim {

/// Variance of the LoG-filtered image (valid positions only).
inline double log_response(const RealImage& image, double sigma = 2.0) {
  const auto kernel = log_kernel(sigma);
  if (image.width() < kernel.width() || image.height() < kernel.height())
    throw InvalidArgument("log_response: image smaller than the LoG kernel");
  const auto r = correlate_valid(image, kernel);
  double mean = 0;
  for (double v : r.pixels()) mean += v;
  mean /= static_cast<double>(r.size());
  double var = 0;
  for (double v : r.pixels()) var += (v - mean) * (v - mean);
  return var / static_cast<double>(r.size());
}

struct FocusSeries {
  std::vector<std::string> frames;
  std::vector<double> log_values;
  std::size_t peak_index = 0;
  std::vector<double> normalized_depth;
};

/// Argmax of the focus measure (lowest index on ties). Also fills
/// series.normalized_depth with (i - peak) / max(peak, n - 1 - peak).
inline std::size_t find_focal_peak(FocusSeries& series) {
  const auto& v = series.log_values;
  if (v.empty()) throw InvalidArgument("find_focal_peak: empty series");
  if (!series.frames.empty() && series.frames.size() != v.size())
    throw DimensionError("find_focal_peak: frames and focus values differ in length");
  std::size_t peak = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[peak]) peak = i;
  series.peak_index = peak;
  const double span = static_cast<double>(std::max(peak, v.size() - 1 - peak));
  series.normalized_depth.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    series.normalized_depth[i] =
        span > 0 ? (static_cast<double>(i) - static_cast<double>(peak)) / span : 0.0;
  return peak;
}

inline FocusSeries make_focus_series(std::vector<std::string> frames,
                                     std::vector<double> log_values) {
  FocusSeries s{std::move(frames), std::move(log_values), 0, {}};
  find_focal_peak(s);
  return s;
}

/// Local maxima (>= both neighbours, > the left one) whose focus value is at
/// least `ratio` times the global peak. Always contains the global peak.
inline std::vector<std::size_t> focus_peaks(const FocusSeries& s, double ratio = 0.8) {
  const auto& v = s.log_values;
  std::vector<std::size_t> peaks;
  const double global = v[s.peak_index];
  for (std::size_t i = 0; i < v.size(); ++i) {
    const bool left = i == 0 || v[i] > v[i - 1];
    const bool right = i + 1 == v.size() || v[i] >= v[i + 1];
    if (left && right && v[i] >= ratio * global) peaks.push_back(i);
  }
  if (std::find(peaks.begin(), peaks.end(), s.peak_index) == peaks.end()) {
    peaks.push_back(s.peak_index);
    std::sort(peaks.begin(), peaks.end());
  }
  return peaks;
}

/// Segment id and the depth coordinate used for binning, per frame.
struct FramePlacement {
  std::size_t segment = 0;
  double depth = 0;
};

/// One peak: segment 0 before it, segment 1 from it on, depth from
/// find_focal_peak. Several peaks: segment 0 before the first, segment j the
/// span [p_j, p_{j+1}), depth normalized within each span.
inline std::vector<FramePlacement> place_frames(const FocusSeries& s, double peak_ratio = 0.8) {
  const std::size_t n = s.log_values.size();
  std::vector<FramePlacement> out(n);
  const auto peaks = focus_peaks(s, peak_ratio);
  if (peaks.size() == 1) {
    for (std::size_t i = 0; i < n; ++i)
      out[i] = {i < s.peak_index ? 0u : 1u, s.normalized_depth[i]};
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = std::upper_bound(peaks.begin(), peaks.end(), i);
    const auto seg = static_cast<std::size_t>(it - peaks.begin());
    const double di = static_cast<double>(i);
    if (seg == 0) {
      const double p = static_cast<double>(peaks.front());
      out[i] = {0, (di - p) / p};
    } else {
      const double p = static_cast<double>(peaks[seg - 1]);
      const double end = seg < peaks.size() ? static_cast<double>(peaks[seg])
                                            : static_cast<double>(n - 1);
      out[i] = {seg, end > p ? (di - p) / (end - p) : 0.0};
    }
  }
  return out;
}

/// Bin of a normalized depth in [-1, 1] among n_bins equal bins.
inline std::size_t depth_bin(double d, std::size_t n_bins) {
  const double f = std::floor((d + 1.0) / 2.0 * static_cast<double>(n_bins));
  if (!(f > 0)) return 0;
  return std::min(static_cast<std::size_t>(f), n_bins - 1);
}

struct BalancedBin {
  std::size_t segment = 0;
  std::size_t bin = 0;
  std::vector<std::size_t> rendered;      // frame indices into the sim series
  std::vector<std::size_t> experimental;  // frame indices into the exp series
  std::vector<double> rendered_depth;     // placement depth, parallel to rendered
  std::vector<double> experimental_depth;
  std::size_t removed = 0;                // frames dropped by subsampling
};

/// Buckets both sweeps into (segment, bin) cells, drops cells missing either
/// side and subsamples the larger side of every remaining cell down to the
/// smaller one. A single RNG seeded with `seed` is consumed in cell order.
inline std::vector<BalancedBin> segment_and_balance(const FocusSeries& sim,
                                                    const FocusSeries& exp,
                                                    std::size_t n_bins = 40,
                                                    std::uint64_t seed = 42) {
  if (sim.log_values.empty() || exp.log_values.empty())
    throw InvalidArgument("segment_and_balance: empty series");
  if (n_bins < 1) throw InvalidArgument("segment_and_balance: n_bins must be >= 1");

  using Key = std::pair<std::size_t, std::size_t>;
  struct Members {
    std::vector<std::size_t> idx;
    std::vector<double> depth;
  };
  auto bucket = [&](const FocusSeries& s) {
    std::map<Key, Members> cells;
    const auto placed = place_frames(s);
    for (std::size_t i = 0; i < placed.size(); ++i) {
      auto& m = cells[{placed[i].segment, depth_bin(placed[i].depth, n_bins)}];
      m.idx.push_back(i);
      m.depth.push_back(placed[i].depth);
    }
    return cells;
  };
  const auto sim_cells = bucket(sim);
  const auto exp_cells = bucket(exp);

  Rng rng(seed);
  std::vector<BalancedBin> out;
  for (const auto& [key, r] : sim_cells) {
    const auto it = exp_cells.find(key);
    if (it == exp_cells.end()) continue;
    const auto& e = it->second;
    BalancedBin b;
    b.segment = key.first;
    b.bin = key.second;
    const std::size_t m = std::min(r.idx.size(), e.idx.size());
    auto take = [&](const Members& src, std::vector<std::size_t>& idx,
                    std::vector<double>& depth) {
      if (src.idx.size() == m) {
        idx = src.idx;
        depth = src.depth;
        return;
      }
      for (std::size_t k : sample_without_replacement(src.idx.size(), m, rng)) {
        idx.push_back(src.idx[k]);
        depth.push_back(src.depth[k]);
      }
    };
    take(r, b.rendered, b.rendered_depth);
    take(e, b.experimental, b.experimental_depth);
    b.removed = r.idx.size() + e.idx.size() - 2 * m;
    out.push_back(std::move(b));
  }
  if (out.empty())
    throw AlignmentFailure("segment_and_balance: no depth bin holds frames from both series");
  return out;
}

struct PairRecord {
  std::string rendered;
  std::string experimental;
  std::size_t bin = 0;
  std::string pose;
  double norm_depth = 0;      // rendered frame
  std::size_t segment = 0;
  double norm_depth_exp = 0;  // experimental frame

  friend bool operator==(const PairRecord&, const PairRecord&) = default;
};

struct PairManifest {
  std::uint64_t seed = 42;
  std::size_t n_bins = 40;
  double sigma = 2.0;
  std::vector<PairRecord> pairs;

  /// Pair count per segment id.
  std::map<std::size_t, std::size_t> segment_counts() const {
    std::map<std::size_t, std::size_t> c;
    for (const auto& p : pairs) ++c[p.segment];
    return c;
  }
  friend bool operator==(const PairManifest&, const PairManifest&) = default;
};

/// Zips each balanced cell after sorting both sides by depth (frame index
/// breaks ties).
inline PairManifest build_pairs(const std::vector<BalancedBin>& bins, const FocusSeries& sim,
                                const FocusSeries& exp, const PoseLabel& pose,
                                std::uint64_t seed, std::size_t n_bins, double sigma) {
  if (bins.empty()) throw InvalidArgument("build_pairs: no balanced bins");
  PairManifest m;
  m.seed = seed;
  m.n_bins = n_bins;
  m.sigma = sigma;
  const auto label = to_string(pose);
  auto frame_name = [](const FocusSeries& s, std::size_t i) {
    return s.frames.empty() ? std::to_string(i) : s.frames.at(i);
  };
  for (const auto& b : bins) {
    if (b.rendered.size() != b.experimental.size())
      throw InvalidArgument("build_pairs: bin is not balanced");
    auto order = [](const std::vector<std::size_t>& idx, const std::vector<double>& depth) {
      std::vector<std::size_t> o(idx.size());
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = i;
      std::sort(o.begin(), o.end(), [&](std::size_t a, std::size_t c) {
        return std::tie(depth[a], idx[a]) < std::tie(depth[c], idx[c]);
      });
      return o;
    };
    const auto ro = order(b.rendered, b.rendered_depth);
    const auto eo = order(b.experimental, b.experimental_depth);
    for (std::size_t i = 0; i < ro.size(); ++i) {
      PairRecord p;
      p.rendered = frame_name(sim, b.rendered[ro[i]]);
      p.experimental = frame_name(exp, b.experimental[eo[i]]);
      p.bin = b.bin;
      p.pose = label;
      p.norm_depth = b.rendered_depth[ro[i]];
      p.segment = b.segment;
      p.norm_depth_exp = b.experimental_depth[eo[i]];
      m.pairs.push_back(std::move(p));
    }
  }
  return m;
}

/// Header line with seed / n_bins / sigma / per-segment counts, then one
/// object per pair.
inline std::string to_jsonl(const PairManifest& m) {
  using ojson = nlohmann::ordered_json;
  std::string out;
  ojson header;
  header["seed"] = m.seed;
  header["n_bins"] = m.n_bins;
  header["sigma"] = m.sigma;
  header["pairs"] = m.pairs.size();
  ojson segments = ojson::array();
  for (const auto& [seg, count] : m.segment_counts())
    segments.push_back(ojson{{"segment", seg}, {"pairs", count}});
  header["segments"] = segments;
  out += header.dump() + "\n";
  for (const auto& p : m.pairs) {
    ojson j;
    j["rendered"] = p.rendered;
    j["experimental"] = p.experimental;
    j["bin"] = p.bin;
    j["pose"] = p.pose;
    j["norm_depth"] = p.norm_depth;
    j["segment"] = p.segment;
    j["norm_depth_exp"] = p.norm_depth_exp;
    out += j.dump() + "\n";
  }
  return out;
}

inline PairManifest parse_pair_manifest(std::istream& in) {
  PairManifest m;
  std::string line;
  bool header = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      if (header) {
        m.seed = j.at("seed").get<std::uint64_t>();
        m.n_bins = j.at("n_bins").get<std::size_t>();
        m.sigma = j.at("sigma").get<double>();
        header = false;
        continue;
      }
      PairRecord p;
      p.rendered = j.at("rendered").get<std::string>();
      p.experimental = j.at("experimental").get<std::string>();
      p.bin = j.at("bin").get<std::size_t>();
      p.pose = j.at("pose").get<std::string>();
      p.norm_depth = j.at("norm_depth").get<double>();
      p.segment = j.value("segment", std::size_t{0});
      p.norm_depth_exp = j.value("norm_depth_exp", p.norm_depth);
      m.pairs.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("pair manifest line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (header) throw ParseError("pair manifest: missing header line");
  return m;
}

inline PairManifest parse_pair_manifest(const std::string& text) {
  std::istringstream in(text);
  return parse_pair_manifest(in);
}

/// Focus measures -> balanced bins -> pairs, for two image sweeps already in
/// sweep order.
inline PairManifest align_series(const std::vector<std::string>& rendered_names,
                                 const std::vector<RealImage>& rendered,
                                 const std::vector<std::string>& experimental_names,
                                 const std::vector<RealImage>& experimental,
                                 const PoseLabel& pose, std::size_t n_bins = 40,
                                 double sigma = 2.0, std::uint64_t seed = 42) {
  auto series = [&](const std::vector<std::string>& names, const std::vector<RealImage>& imgs) {
    if (names.size() != imgs.size()) throw DimensionError("align: names and images differ");
    std::vector<double> values(imgs.size());
    for (std::size_t i = 0; i < imgs.size(); ++i) values[i] = log_response(imgs[i], sigma);
    if (values.empty()) throw InvalidArgument("align: empty series");
    return make_focus_series(names, std::move(values));
  };
  const auto sim = series(rendered_names, rendered);
  const auto exp = series(experimental_names, experimental);
  const auto bins = segment_and_balance(sim, exp, n_bins, seed);
  return build_pairs(bins, sim, exp, pose, seed, n_bins, sigma);
}

} // namespace microsim
