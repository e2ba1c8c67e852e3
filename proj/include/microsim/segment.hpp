#pragma once

// Foreground segmentation of a depth map with scalar k-means, and the crop
// window that encloses the segmented object.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "microsim/error.hpp"
#include "microsim/image.hpp"

namespace microsim {

struct KMeansResult {
  Image<std::uint8_t> labels;
  std::vector<double> centroids;      // mean depth per cluster, meters
  std::vector<std::size_t> counts;    // pixels per cluster
  std::vector<double> objective;      // within-cluster SSE after each iteration
  int iterations = 0;
};

struct SegmentationResult {
  Image<std::uint8_t> labels;
  std::vector<double> centroids;
  std::size_t foreground_id = 0;
  BoundingBox bbox;
};

namespace detail {

inline std::size_t nearest_centroid(double v, const std::vector<double>& c) {
  std::size_t best = 0;
  double best_d = std::abs(v - c[0]);
  for (std::size_t j = 1; j < c.size(); ++j) {
    const double d = std::abs(v - c[j]);
    if (d < best_d) { // ties stay with the lower index
      best = j;
      best_d = d;
    }
  }
  return best;
}

} // namespace detail

/// Initial centroids: the k evenly spaced quantiles j/(k-1), j = 0..k-1, of
/// the depth distribution (so k = 2 starts at the minimum and maximum).
inline std::vector<double> quantile_init(std::span<const double> values, std::size_t k) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> init(k);
  const auto n = sorted.size();
  for (std::size_t j = 0; j < k; ++j) {
    const double q = static_cast<double>(j) / static_cast<double>(k - 1);
    const auto idx = static_cast<std::size_t>(std::llround(q * static_cast<double>(n - 1)));
    init[j] = sorted[idx];
  }
  return init;
}

/// Lloyd iteration on scalar depths. Stops when no centroid moves by
/// 1e-12 m or more, or after 100 iterations. `seed` is accepted for a uniform
/// call signature with the rest of the pipeline; the initialization is
/// deterministic and does not consume it.
inline KMeansResult kmeans_depth(const DepthMap& depth, std::size_t k = 2,
                                 std::uint64_t seed = 42) {
  (void)seed;
  if (k < 2 || k > 255) throw InvalidArgument("kmeans_depth: k must be in [2, 255]");
  if (depth.empty()) throw DegenerateInput("kmeans_depth: empty depth map");
  if (!all_finite(depth)) throw InvalidArgument("kmeans_depth: non-finite depth");

  {
    std::vector<double> distinct(depth.pixels().begin(), depth.pixels().end());
    std::sort(distinct.begin(), distinct.end());
    const auto n_distinct = static_cast<std::size_t>(
        std::unique(distinct.begin(), distinct.end()) - distinct.begin());
    if (n_distinct < k)
      throw DegenerateInput("kmeans_depth: fewer than k distinct depth values");
  }

  constexpr double kTolerance = 1e-12;
  constexpr int kMaxIterations = 100;

  KMeansResult r;
  r.centroids = quantile_init(depth.pixels(), k);
  r.labels = Image<std::uint8_t>(depth.width(), depth.height());
  r.counts.assign(k, 0);

  for (int it = 0; it < kMaxIterations; ++it) {
    // Sums of deviations from each cluster's first member.
    std::vector<double> pivot(k, 0.0), sum(k, 0.0);
    std::fill(r.counts.begin(), r.counts.end(), 0);
    for (std::size_t i = 0; i < depth.size(); ++i) {
      const auto j = detail::nearest_centroid(depth[i], r.centroids);
      r.labels[i] = static_cast<std::uint8_t>(j);
      if (r.counts[j]++ == 0) pivot[j] = depth[i];
      sum[j] += depth[i] - pivot[j];
    }
    double movement = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (r.counts[j] == 0) continue; // empty cluster keeps its centroid
      const double next = pivot[j] + sum[j] / static_cast<double>(r.counts[j]);
      movement = std::max(movement, std::abs(next - r.centroids[j]));
      r.centroids[j] = next;
    }
    double sse = 0.0;
    for (std::size_t i = 0; i < depth.size(); ++i) {
      const double d = depth[i] - r.centroids[r.labels[i]];
      sse += d * d;
    }
    r.objective.push_back(sse);
    r.iterations = it + 1;
    if (movement < kTolerance) break;
  }
  // Labels must agree with the final centroids.
  std::fill(r.counts.begin(), r.counts.end(), 0);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const auto j = detail::nearest_centroid(depth[i], r.centroids);
    r.labels[i] = static_cast<std::uint8_t>(j);
    ++r.counts[j];
  }
  return r;
}

/// The minority-pixel cluster; ties go to the larger |mean depth|, then to
/// the lower id.
inline std::size_t select_foreground(const KMeansResult& km) {
  std::size_t best = km.counts.size();
  for (std::size_t j = 0; j < km.counts.size(); ++j) {
    if (km.counts[j] == 0) continue;
    if (best == km.counts.size() || km.counts[j] < km.counts[best] ||
        (km.counts[j] == km.counts[best] &&
         std::abs(km.centroids[j]) > std::abs(km.centroids[best])))
      best = j;
  }
  if (best == km.counts.size()) throw DegenerateInput("no non-empty cluster");
  return best;
}

/// Tight box around `foreground_id` pixels, grown by `margin` and clamped to
/// the image.
inline BoundingBox foreground_crop(const Image<std::uint8_t>& labels,
                                   std::size_t foreground_id, std::size_t margin = 8) {
  std::size_t x0 = labels.width(), y0 = labels.height(), x1 = 0, y1 = 0;
  bool any = false;
  for (std::size_t y = 0; y < labels.height(); ++y)
    for (std::size_t x = 0; x < labels.width(); ++x)
      if (labels(x, y) == foreground_id) {
        any = true;
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (!any) throw DegenerateInput("foreground_crop: empty foreground");
  const std::size_t bx0 = x0 > margin ? x0 - margin : 0;
  const std::size_t by0 = y0 > margin ? y0 - margin : 0;
  const std::size_t bx1 = std::min(labels.width() - 1, x1 + margin);
  const std::size_t by1 = std::min(labels.height() - 1, y1 + margin);
  return {bx0, by0, bx1 - bx0 + 1, by1 - by0 + 1};
}

inline SegmentationResult segment_foreground(const DepthMap& depth, std::size_t k = 2,
                                             std::size_t margin = 8,
                                             std::uint64_t seed = 42) {
  auto km = kmeans_depth(depth, k, seed);
  SegmentationResult out;
  out.foreground_id = select_foreground(km);
  out.bbox = foreground_crop(km.labels, out.foreground_id, margin);
  out.labels = std::move(km.labels);
  out.centroids = std::move(km.centroids);
  return out;
}

} // namespace microsim
