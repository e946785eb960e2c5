#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include "detkit/error.hpp"
#include "detkit/yolo_head.hpp"

namespace detkit {

struct DimensionSample {
  double width = 0.0;
  double height = 0.0;

  static DimensionSample make(double width, double height) {
    if (!(width > 0.0) || !(height > 0.0) || !std::isfinite(width) ||
        !std::isfinite(height)) {
      throw InvalidArgument("dimension sample must have positive size");
    }
    return {width, height};
  }
  friend bool operator==(const DimensionSample&, const DimensionSample&) =
      default;
};

enum class ClusterDistance {
  kIou,               // 1 - IOU of co-centered boxes
  kSquaredEuclidean,  // (w - w')^2 + (h - h')^2
};

/// IOU of two boxes sharing a center; depends only on their sizes.
inline double centered_iou(double w1, double h1, double w2, double h2) {
  const double inter = std::min(w1, w2) * std::min(h1, h2);
  return inter / (w1 * h1 + w2 * h2 - inter);
}

inline double cluster_distance(ClusterDistance kind, const DimensionSample& s,
                               const AnchorPrior& c) {
  if (kind == ClusterDistance::kIou) {
    return 1.0 - centered_iou(s.width, s.height, c.pw, c.ph);
  }
  const double dw = s.width - c.pw, dh = s.height - c.ph;
  return dw * dw + dh * dh;
}

struct ClusteringResult {
  std::vector<AnchorPrior> centroids;
  std::vector<std::size_t> assignments;
  // Mean sample-to-centroid distance of the final state.
  double objective = 0.0;
  // Objective after k-means++ seeding, before any centroid update.
  double initial_objective = 0.0;
  // Objective of every accepted Lloyd state, in order; non-increasing.
  std::vector<double> objective_history;
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

// Uniform double in [0, 1) from the top 53 bits of the engine output.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct LloydState {
  std::vector<AnchorPrior> centroids;
  std::vector<std::size_t> assignments;
  std::vector<double> distances;
  double objective = 0.0;
};

inline void assign_nearest(std::span<const DimensionSample> samples,
                           ClusterDistance kind, LloydState& st) {
  st.assignments.assign(samples.size(), 0);
  st.distances.assign(samples.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < st.centroids.size(); ++c) {
      const double d = cluster_distance(kind, samples[i], st.centroids[c]);
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    st.assignments[i] = arg;
    st.distances[i] = best;
    sum += best;
  }
  st.objective = sum / static_cast<double>(samples.size());
}

// Moves each memberless centroid onto the farthest sample of a multi-member
// cluster and reassigns, until no cluster is empty.
inline void repair_empty(std::span<const DimensionSample> samples,
                         ClusterDistance kind, LloydState& st) {
  for (;;) {
    std::vector<std::size_t> counts(st.centroids.size(), 0);
    for (std::size_t a : st.assignments) ++counts[a];
    const auto empty = std::find(counts.begin(), counts.end(), 0u);
    if (empty == counts.end()) return;
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (counts[st.assignments[i]] > 1 && st.distances[i] > far_d) {
        far_d = st.distances[i];
        far = i;
      }
    }
    st.centroids[static_cast<std::size_t>(empty - counts.begin())] = {
        samples[far].width, samples[far].height};
    assign_nearest(samples, kind, st);
  }
}

inline std::vector<AnchorPrior> kmeans_plus_plus(
    std::span<const DimensionSample> samples, std::size_t k,
    ClusterDistance kind, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<AnchorPrior> centroids;
  const auto first = static_cast<std::size_t>(
      unit_uniform(rng) * static_cast<double>(samples.size()));
  centroids.push_back({samples[first].width, samples[first].height});

  std::vector<double> weight(samples.size());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids) {
        best = std::min(best, cluster_distance(kind, samples[i], c));
      }
      weight[i] = best * best;
      total += weight[i];
    }
    std::size_t pick = samples.size();
    if (total > 0.0) {
      const double target = unit_uniform(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        if (weight[i] <= 0.0) continue;
        acc += weight[i];
        pick = i;
        if (acc > target) break;
      }
    }
    if (pick == samples.size()) {
      // All remaining weight vanished numerically: take the first sample not
      // already used as a centroid.
      for (std::size_t i = 0; i < samples.size() && pick == samples.size();
           ++i) {
        const AnchorPrior cand{samples[i].width, samples[i].height};
        if (std::find(centroids.begin(), centroids.end(), cand) ==
            centroids.end()) {
          pick = i;
        }
      }
    }
    centroids.push_back({samples[pick].width, samples[pick].height});
  }
  return centroids;
}

inline std::size_t count_distinct(std::span<const DimensionSample> samples) {
  std::vector<std::pair<double, double>> v;
  v.reserve(samples.size());
  for (const auto& s : samples) v.emplace_back(s.width, s.height);
  std::sort(v.begin(), v.end());
  return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

}  // namespace detail

/// Lloyd k-means over box dimensions with k-means++ seeding.
///
/// Centroids are the componentwise means of their members. The first update
/// after seeding is always taken; a later update that would raise the mean
/// distance is rejected and iteration stops, so `objective_history` never
/// increases. Deterministic for a fixed seed and sample order.
inline ClusteringResult kmeans_anchors(
    std::span<const DimensionSample> samples, std::size_t k,
    std::size_t max_iters, std::uint64_t seed,
    ClusterDistance kind = ClusterDistance::kIou) {
  if (samples.empty()) throw InsufficientSamples("no samples to cluster");
  if (k == 0) throw InvalidArgument("k must be positive");
  if (max_iters == 0) throw InvalidArgument("max_iters must be positive");
  const std::size_t distinct = detail::count_distinct(samples);
  if (k > distinct) {
    std::ostringstream os;
    os << "k = " << k << " exceeds the " << distinct
       << " distinct sample sizes";
    throw InsufficientSamples(os.str());
  }

  detail::LloydState state;
  state.centroids = detail::kmeans_plus_plus(samples, k, kind, seed);
  detail::assign_nearest(samples, kind, state);
  detail::repair_empty(samples, kind, state);

  ClusteringResult result;
  result.initial_objective = state.objective;

  for (std::size_t it = 0; it < max_iters; ++it) {
    detail::LloydState next;
    next.centroids.assign(k, AnchorPrior{});
    std::vector<double> sw(k, 0.0), sh(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const std::size_t a = state.assignments[i];
      sw[a] += samples[i].width;
      sh[a] += samples[i].height;
      ++count[a];
    }
    for (std::size_t c = 0; c < k; ++c) {
      next.centroids[c] =
          count[c] == 0 ? state.centroids[c]
                        : AnchorPrior{sw[c] / static_cast<double>(count[c]),
                                      sh[c] / static_cast<double>(count[c])};
    }
    detail::assign_nearest(samples, kind, next);
    detail::repair_empty(samples, kind, next);

    if (it > 0 && next.objective > state.objective) break;
    const bool unchanged = next.assignments == state.assignments;
    state = std::move(next);
    result.objective_history.push_back(state.objective);
    result.iterations = it + 1;
    if (unchanged) {
      result.converged = true;
      break;
    }
  }

  result.centroids = std::move(state.centroids);
  result.assignments = std::move(state.assignments);
  result.objective = state.objective;
  return result;
}

/// Sorts priors by area (ties by width) and splits them into `num_scales`
/// equal groups. Group 0 holds the smallest priors and belongs to the finest
/// grid.
inline std::vector<std::vector<AnchorPrior>> split_scales(
    std::span<const AnchorPrior> priors, std::size_t num_scales) {
  if (num_scales == 0) throw InvalidArgument("num_scales must be positive");
  if (priors.size() % num_scales != 0) {
    std::ostringstream os;
    os << priors.size() << " priors cannot be split evenly across "
       << num_scales << " scales";
    throw NotDivisible(os.str());
  }
  std::vector<AnchorPrior> sorted(priors.begin(), priors.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const AnchorPrior& a, const AnchorPrior& b) {
                     if (a.area() != b.area()) return a.area() < b.area();
                     return a.pw < b.pw;
                   });
  const std::size_t per = sorted.size() / num_scales;
  std::vector<std::vector<AnchorPrior>> groups(num_scales);
  for (std::size_t g = 0; g < num_scales; ++g) {
    groups[g].assign(sorted.begin() + static_cast<std::ptrdiff_t>(g * per),
                     sorted.begin() + static_cast<std::ptrdiff_t>((g + 1) * per));
  }
  return groups;
}

/// The nine dimension clusters reported for COCO at 416-pixel input.
inline std::vector<AnchorPrior> coco_anchors() {
  return {{10, 13}, {16, 30},  {33, 23},   {30, 61},  {62, 45},
          {59, 119}, {116, 90}, {156, 198}, {373, 326}};
}

}  // namespace detkit
