#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "detkit/error.hpp"
#include "detkit/geometry.hpp"

namespace detkit {

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

using ImageId = std::int64_t;

struct ImageInfo {
  ImageId id = 0;
  int width = 0;
  int height = 0;
};

struct Category {
  int id = 0;
  std::string name;
};

struct GroundTruth {
  Box box;
  int class_id;
};

/// Ground-truth boxes grouped by image, plus the image and category registry.
class GroundTruthSet {
 public:
  void add_category(int id, std::string name) {
    if (id < 0) throw InvalidArgument("category id must be non-negative");
    if (has_category(id)) {
      throw InvalidArgument("duplicate category id " + std::to_string(id));
    }
    categories_.push_back({id, std::move(name)});
  }

  void add_image(const ImageInfo& info) {
    if (index_.count(info.id) != 0) {
      throw InvalidArgument("duplicate image id " + std::to_string(info.id));
    }
    index_.emplace(info.id, images_.size());
    images_.push_back(info);
    boxes_.emplace_back();
  }

  void add(ImageId image_id, const GroundTruth& gt) {
    if (!has_category(gt.class_id)) {
      throw InvalidArgument("undeclared category " +
                            std::to_string(gt.class_id));
    }
    boxes_[image_index(image_id)].push_back(gt);
  }

  bool has_image(ImageId id) const { return index_.count(id) != 0; }

  bool has_category(int id) const {
    return std::any_of(categories_.begin(), categories_.end(),
                       [&](const Category& c) { return c.id == id; });
  }

  std::size_t image_index(ImageId id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) {
      throw UnknownImage("image id " + std::to_string(id) +
                         " is not registered");
    }
    return it->second;
  }

  const std::vector<ImageInfo>& images() const { return images_; }
  const std::vector<Category>& categories() const { return categories_; }

  std::span<const GroundTruth> for_image(ImageId id) const {
    return boxes_[image_index(id)];
  }
  std::span<const GroundTruth> at_index(std::size_t image_index) const {
    return boxes_[image_index];
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& b : boxes_) n += b.size();
    return n;
  }

 private:
  std::vector<ImageInfo> images_;
  std::vector<Category> categories_;
  std::vector<std::vector<GroundTruth>> boxes_;
  std::unordered_map<ImageId, std::size_t> index_;
};

struct Detection {
  ImageId image_id;
  ScoredBox det;
  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Detections in input order. Input position breaks score ties everywhere.
class DetectionResultSet {
 public:
  void add(ImageId image_id, const ScoredBox& det) {
    items_.push_back({image_id, det});
  }
  const std::vector<Detection>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

  friend bool operator==(const DetectionResultSet&,
                         const DetectionResultSet&) = default;

 private:
  std::vector<Detection> items_;
};

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

/// Result of greedy matching for one (image, class).
///
/// `det_order` lists indices into DetectionResultSet::items() in evaluation
/// order; `det_match[i]` is the ground truth matched by det_order[i], given
/// as an index into GroundTruthSet::for_image(). `gt_match` maps each of the
/// image's ground truths to the position in `det_order` that claimed it.
struct MatchTable {
  std::vector<std::size_t> det_order;
  std::vector<std::optional<std::size_t>> det_match;
  std::vector<std::optional<std::size_t>> gt_match;
};

enum class AreaBand { kSmall, kMedium, kLarge };

inline constexpr double kSmallAreaLimit = 32.0 * 32.0;
inline constexpr double kMediumAreaLimit = 96.0 * 96.0;

inline bool in_band(AreaBand band, double area) {
  switch (band) {
    case AreaBand::kSmall:
      return area < kSmallAreaLimit;
    case AreaBand::kMedium:
      return area >= kSmallAreaLimit && area < kMediumAreaLimit;
    case AreaBand::kLarge:
      return area >= kMediumAreaLimit;
  }
  return false;
}

// Overlap at which a detection is attributed to an out-of-band ground truth
// and dropped from a band's sweep.
inline constexpr double kBandDropIou = 0.5;

namespace detail {

inline std::vector<std::size_t> score_order(std::span<const Detection> items,
                                            std::vector<std::size_t> idx) {
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t l, std::size_t r) {
    return items[l].det.score > items[r].det.score;
  });
  return idx;
}

// Detections and ground truths of one class on one image, with their
// pairwise overlaps cached.
struct Block {
  std::size_t image_index = 0;
  int class_id = 0;
  std::vector<std::size_t> dets;  // score order
  std::vector<std::size_t> gts;   // index into the image's gt list
  std::vector<double> overlaps;   // dets.size() x gts.size()

  double overlap(std::size_t d, std::size_t g) const {
    return overlaps[d * gts.size() + g];
  }
};

enum class Outcome : std::uint8_t { kTruePositive, kFalsePositive, kDropped };

// Greedy matching inside one block. `eligible[g]` marks ground truths that
// may be matched; ineligible ones can only cause a detection to be dropped.
inline std::vector<std::optional<std::size_t>> greedy_match(
    const Block& b, double threshold, const std::vector<bool>& eligible,
    std::vector<Outcome>* outcomes) {
  std::vector<bool> taken(b.gts.size(), false);
  std::vector<std::optional<std::size_t>> match(b.dets.size());
  if (outcomes) outcomes->assign(b.dets.size(), Outcome::kFalsePositive);
  for (std::size_t d = 0; d < b.dets.size(); ++d) {
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < b.gts.size(); ++g) {
      if (taken[g] || !eligible[g]) continue;
      const double v = b.overlap(d, g);
      if (v >= threshold && v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    if (best) {
      taken[*best] = true;
      match[d] = best;
      if (outcomes) (*outcomes)[d] = Outcome::kTruePositive;
      continue;
    }
    if (outcomes) {
      for (std::size_t g = 0; g < b.gts.size(); ++g) {
        if (!eligible[g] && b.overlap(d, g) >= kBandDropIou) {
          (*outcomes)[d] = Outcome::kDropped;
          break;
        }
      }
    }
  }
  return match;
}

}  // namespace detail

/// Greedy matching of `class_id` detections on `image_id`: in descending
/// score order, each detection takes the highest-IOU unmatched ground truth
/// of its class with IOU >= `iou_threshold`.
inline MatchTable match(const DetectionResultSet& dets,
                        const GroundTruthSet& gts, double iou_threshold,
                        int class_id, ImageId image_id) {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
    throw InvalidArgument("iou threshold must lie in [0, 1]");
  }
  const auto image_gts = gts.for_image(image_id);
  const auto& items = dets.items();

  detail::Block block;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].image_id == image_id && items[i].det.class_id == class_id) {
      candidates.push_back(i);
    }
  }
  block.dets = detail::score_order(items, std::move(candidates));
  for (std::size_t g = 0; g < image_gts.size(); ++g) {
    if (image_gts[g].class_id == class_id) block.gts.push_back(g);
  }
  for (std::size_t d : block.dets) {
    for (std::size_t g : block.gts) {
      block.overlaps.push_back(iou(items[d].det.box, image_gts[g].box));
    }
  }

  const auto m = detail::greedy_match(
      block, iou_threshold, std::vector<bool>(block.gts.size(), true), nullptr);
  MatchTable table;
  table.det_order = block.dets;
  table.det_match.resize(m.size());
  table.gt_match.assign(image_gts.size(), std::nullopt);
  for (std::size_t d = 0; d < m.size(); ++d) {
    if (!m[d]) continue;
    const std::size_t g = block.gts[*m[d]];
    table.det_match[d] = g;
    table.gt_match[g] = d;
  }
  return table;
}

// ---------------------------------------------------------------------------
// Precision / recall
// ---------------------------------------------------------------------------

struct PrPoint {
  double recall;
  double precision;
};

enum class Interpolation { kContinuous, k101Point };

/// Precision at each point replaced by the maximum precision at that point
/// or any later (higher-recall) point.
inline std::vector<double> precision_envelope(std::span<const PrPoint> points) {
  std::vector<double> envelope(points.size());
  double running = 0.0;
  for (std::size_t i = points.size(); i-- > 0;) {
    running = std::max(running, points[i].precision);
    envelope[i] = running;
  }
  return envelope;
}

/// Area under the precision envelope of `points` (recall-ascending).
///
/// kContinuous integrates the envelope exactly over every recall step;
/// k101Point averages the envelope sampled at recall 0.00, 0.01, ..., 1.00,
/// taking the first point whose recall reaches each sample.
inline double average_precision(std::span<const PrPoint> points,
                                Interpolation mode) {
  if (points.empty()) return 0.0;
  const std::vector<double> envelope = precision_envelope(points);
  if (mode == Interpolation::kContinuous) {
    double ap = 0.0, prev_recall = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      ap += (points[i].recall - prev_recall) * envelope[i];
      prev_recall = points[i].recall;
    }
    return ap;
  }
  double sum = 0.0;
  std::size_t cursor = 0;
  for (int s = 0; s <= 100; ++s) {
    const double r = s / 100.0;
    while (cursor < points.size() && points[cursor].recall < r) ++cursor;
    if (cursor == points.size()) break;
    sum += envelope[cursor];
  }
  return sum / 101.0;
}

struct PrCurve {
  std::vector<PrPoint> points;
  double ap = 0.0;  // continuous interpolation
};

namespace detail {

struct SweepItem {
  double score;
  std::size_t input_index;
  bool true_positive;
};

struct Sweep {
  std::vector<SweepItem> items;
  std::size_t num_gt = 0;
};

inline std::vector<PrPoint> to_points(Sweep sweep) {
  std::stable_sort(sweep.items.begin(), sweep.items.end(),
                   [](const SweepItem& l, const SweepItem& r) {
                     if (l.score != r.score) return l.score > r.score;
                     return l.input_index < r.input_index;
                   });
  std::vector<PrPoint> pts;
  pts.reserve(sweep.items.size());
  std::size_t tp = 0, fp = 0;
  const auto n = static_cast<double>(sweep.num_gt);
  for (const auto& it : sweep.items) {
    it.true_positive ? ++tp : ++fp;
    pts.push_back({static_cast<double>(tp) / n,
                   static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  return pts;
}

/// Precomputes per-(image, class) blocks so many sweeps can share overlaps.
class Evaluator {
 public:
  Evaluator(const DetectionResultSet& dets, const GroundTruthSet& gts)
      : dets_(dets), gts_(gts) {
    const auto& items = dets.items();
    std::map<std::pair<std::size_t, int>, std::vector<std::size_t>> det_groups;
    for (std::size_t i = 0; i < items.size(); ++i) {
      det_groups[{gts.image_index(items[i].image_id), items[i].det.class_id}]
          .push_back(i);
    }
    std::map<std::pair<std::size_t, int>, std::vector<std::size_t>> gt_groups;
    for (std::size_t im = 0; im < gts.images().size(); ++im) {
      const auto boxes = gts.at_index(im);
      for (std::size_t g = 0; g < boxes.size(); ++g) {
        gt_groups[{im, boxes[g].class_id}].push_back(g);
      }
    }
    std::map<std::pair<std::size_t, int>, Block> blocks;
    for (auto& [key, idx] : det_groups) {
      blocks[key].dets = score_order(items, std::move(idx));
    }
    for (auto& [key, idx] : gt_groups) blocks[key].gts = std::move(idx);
    for (auto& [key, b] : blocks) {
      b.image_index = key.first;
      b.class_id = key.second;
      const auto boxes = gts.at_index(key.first);
      for (std::size_t d : b.dets) {
        for (std::size_t g : b.gts) {
          b.overlaps.push_back(iou(items[d].det.box, boxes[g].box));
        }
      }
      blocks_.push_back(std::move(b));
      if (!blocks_.back().gts.empty()) gt_classes_.push_back(key.second);
    }
    std::sort(gt_classes_.begin(), gt_classes_.end());
    gt_classes_.erase(std::unique(gt_classes_.begin(), gt_classes_.end()),
                      gt_classes_.end());
    for (std::size_t im = 0; im < gts.images().size(); ++im) {
      if (!gts.at_index(im).empty()) gt_images_.push_back(im);
    }
  }

  // Classes having at least one ground truth, ascending.
  const std::vector<int>& gt_classes() const { return gt_classes_; }
  // Image indices having at least one ground truth, registry order.
  const std::vector<std::size_t>& gt_images() const { return gt_images_; }

  /// Collects the TP/FP sequence for the blocks passing the filters.
  Sweep sweep(std::optional<int> class_id, std::optional<std::size_t> image,
              double threshold, std::optional<AreaBand> band) const {
    Sweep out;
    const auto& items = dets_.items();
    std::vector<Outcome> outcomes;
    for (const Block& b : blocks_) {
      if (class_id && b.class_id != *class_id) continue;
      if (image && b.image_index != *image) continue;
      const auto boxes = gts_.at_index(b.image_index);
      std::vector<bool> eligible(b.gts.size(), true);
      if (band) {
        for (std::size_t g = 0; g < b.gts.size(); ++g) {
          eligible[g] = in_band(*band, boxes[b.gts[g]].box.area());
        }
      }
      out.num_gt += static_cast<std::size_t>(
          std::count(eligible.begin(), eligible.end(), true));
      greedy_match(b, threshold, eligible, &outcomes);
      for (std::size_t d = 0; d < b.dets.size(); ++d) {
        if (outcomes[d] == Outcome::kDropped) continue;
        out.items.push_back({items[b.dets[d]].det.score, b.dets[d],
                             outcomes[d] == Outcome::kTruePositive});
      }
    }
    return out;
  }

  std::optional<double> ap(std::optional<int> class_id,
                           std::optional<std::size_t> image, double threshold,
                           std::optional<AreaBand> band,
                           Interpolation mode) const {
    Sweep s = sweep(class_id, image, threshold, band);
    if (s.num_gt == 0) return std::nullopt;
    const auto pts = to_points(std::move(s));
    return average_precision(pts, mode);
  }

 private:
  const DetectionResultSet& dets_;
  const GroundTruthSet& gts_;
  std::vector<Block> blocks_;
  std::vector<int> gt_classes_;
  std::vector<std::size_t> gt_images_;
};

inline void check_threshold(double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw InvalidArgument("iou threshold must lie in [0, 1]");
  }
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results land at their
/// own index, so callers reduce in a fixed order regardless of scheduling.
template <typename T>
std::vector<T> parallel_map(std::size_t n, std::size_t jobs,
                            const std::function<T(std::size_t)>& fn) {
  std::vector<T> out(n);
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) out[i] = fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

inline std::optional<double> mean_present(
    std::span<const std::optional<double>> values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace detail

/// Sweeps `class_id` detections across all images in descending score.
/// Absent when the class has no ground truth.
inline std::optional<PrCurve> pr_curve(const DetectionResultSet& dets,
                                       const GroundTruthSet& gts,
                                       double iou_threshold, int class_id) {
  detail::check_threshold(iou_threshold);
  detail::Evaluator ev(dets, gts);
  auto s = ev.sweep(class_id, std::nullopt, iou_threshold, std::nullopt);
  if (s.num_gt == 0) return std::nullopt;
  PrCurve c;
  c.points = detail::to_points(std::move(s));
  c.ap = average_precision(c.points, Interpolation::kContinuous);
  return c;
}

/// Mean over classes with ground truth of per-class AP at one threshold.
inline std::optional<double> mean_ap(const DetectionResultSet& dets,
                                     const GroundTruthSet& gts,
                                     double iou_threshold, Interpolation mode) {
  detail::check_threshold(iou_threshold);
  detail::Evaluator ev(dets, gts);
  std::vector<std::optional<double>> per_class;
  for (int c : ev.gt_classes()) {
    per_class.push_back(
        ev.ap(c, std::nullopt, iou_threshold, std::nullopt, mode));
  }
  return detail::mean_present(per_class);
}

/// VOC-style mAP at IOU 0.5 with continuous interpolation.
inline std::optional<double> map_voc(const DetectionResultSet& dets,
                                     const GroundTruthSet& gts) {
  return mean_ap(dets, gts, 0.5, Interpolation::kContinuous);
}

inline constexpr std::size_t kNumCocoThresholds = 10;

/// 0.50, 0.55, ..., 0.95.
inline double coco_threshold(std::size_t i) {
  return static_cast<double>(50 + 5 * i) / 100.0;
}

struct CocoScores {
  std::optional<double> ap;
  std::optional<double> ap50;
  std::optional<double> ap75;
  std::array<std::optional<double>, kNumCocoThresholds> per_threshold{};
};

namespace detail {

inline std::optional<double> mean_of_thresholds(
    const std::array<std::optional<double>, kNumCocoThresholds>& v) {
  if (!v[0]) return std::nullopt;
  double sum = 0.0;
  for (const auto& x : v) sum += *x;
  return sum / static_cast<double>(kNumCocoThresholds);
}

}  // namespace detail

/// COCO-style AP: per-threshold mAP with 101-point interpolation, averaged
/// over the ten thresholds.
inline CocoScores coco_ap(const DetectionResultSet& dets,
                          const GroundTruthSet& gts) {
  detail::Evaluator ev(dets, gts);
  CocoScores out;
  for (std::size_t t = 0; t < kNumCocoThresholds; ++t) {
    std::vector<std::optional<double>> per_class;
    for (int c : ev.gt_classes()) {
      per_class.push_back(ev.ap(c, std::nullopt, coco_threshold(t),
                                std::nullopt, Interpolation::k101Point));
    }
    out.per_threshold[t] = detail::mean_present(per_class);
  }
  out.ap50 = out.per_threshold[0];
  out.ap75 = out.per_threshold[5];
  out.ap = detail::mean_of_thresholds(out.per_threshold);
  return out;
}

/// COCO-style AP restricted to ground truths in one area band. Absent when
/// the band holds no ground truth.
inline std::optional<double> ap_by_area(const DetectionResultSet& dets,
                                        const GroundTruthSet& gts,
                                        AreaBand band) {
  detail::Evaluator ev(dets, gts);
  std::array<std::optional<double>, kNumCocoThresholds> per_threshold{};
  for (std::size_t t = 0; t < kNumCocoThresholds; ++t) {
    std::vector<std::optional<double>> per_class;
    for (int c : ev.gt_classes()) {
      per_class.push_back(ev.ap(c, std::nullopt, coco_threshold(t), band,
                                Interpolation::k101Point));
    }
    per_threshold[t] = detail::mean_present(per_class);
  }
  return detail::mean_of_thresholds(per_threshold);
}

/// Class-pooled AP: one ranking over every detection, matches restricted to
/// the detection's own class, recall over all ground truths.
inline std::optional<double> global_ap(const DetectionResultSet& dets,
                                       const GroundTruthSet& gts,
                                       double iou_threshold) {
  detail::check_threshold(iou_threshold);
  detail::Evaluator ev(dets, gts);
  return ev.ap(std::nullopt, std::nullopt, iou_threshold, std::nullopt,
               Interpolation::kContinuous);
}

/// Mean over images with ground truth of the class-pooled AP of that image.
inline std::optional<double> per_image_ap(const DetectionResultSet& dets,
                                          const GroundTruthSet& gts,
                                          double iou_threshold) {
  detail::check_threshold(iou_threshold);
  detail::Evaluator ev(dets, gts);
  std::vector<std::optional<double>> per_image;
  for (std::size_t im : ev.gt_images()) {
    per_image.push_back(ev.ap(std::nullopt, im, iou_threshold, std::nullopt,
                              Interpolation::kContinuous));
  }
  return detail::mean_present(per_image);
}

// ---------------------------------------------------------------------------
// Full report
// ---------------------------------------------------------------------------

struct ClassReport {
  int class_id = 0;
  std::optional<double> ap50;  // continuous, IOU 0.5
  std::optional<double> ap;    // COCO-style
};

struct MetricReport {
  std::optional<double> voc50;
  std::optional<double> ap;
  std::optional<double> ap50;
  std::optional<double> ap75;
  std::optional<double> ap_small;
  std::optional<double> ap_medium;
  std::optional<double> ap_large;
  std::optional<double> global_ap;
  std::optional<double> per_image_ap;
  std::vector<ClassReport> per_class;
};

struct EvalOptions {
  // Threshold for the class-pooled and per-image metrics.
  double iou_threshold = 0.5;
  // Worker threads; the report does not depend on this value.
  std::size_t jobs = 1;
};

/// Computes every metric in one pass, sharding (class, threshold, band)
/// evaluations and per-image evaluations across `options.jobs` threads.
inline MetricReport evaluate(const DetectionResultSet& dets,
                             const GroundTruthSet& gts,
                             const EvalOptions& options = {}) {
  detail::check_threshold(options.iou_threshold);
  const detail::Evaluator ev(dets, gts);
  const auto& classes = ev.gt_classes();
  const auto& images = ev.gt_images();

  // Shard layout: for each class, [voc50, then (band x threshold) for band in
  // {all, S, M, L}], followed by one shard per image, then one global shard.
  constexpr std::size_t kBands = 4;
  const std::size_t per_class = 1 + kBands * kNumCocoThresholds;
  const std::size_t class_shards = classes.size() * per_class;
  const std::size_t total = class_shards + images.size() + 1;

  const auto band_of = [](std::size_t b) -> std::optional<AreaBand> {
    switch (b) {
      case 1:
        return AreaBand::kSmall;
      case 2:
        return AreaBand::kMedium;
      case 3:
        return AreaBand::kLarge;
      default:
        return std::nullopt;
    }
  };

  const std::function<std::optional<double>(std::size_t)> shard =
      [&](std::size_t i) -> std::optional<double> {
    if (i < class_shards) {
      const int c = classes[i / per_class];
      const std::size_t r = i % per_class;
      if (r == 0) {
        return ev.ap(c, std::nullopt, 0.5, std::nullopt,
                     Interpolation::kContinuous);
      }
      const std::size_t b = (r - 1) / kNumCocoThresholds;
      const std::size_t t = (r - 1) % kNumCocoThresholds;
      return ev.ap(c, std::nullopt, coco_threshold(t), band_of(b),
                   Interpolation::k101Point);
    }
    if (i < class_shards + images.size()) {
      return ev.ap(std::nullopt, images[i - class_shards],
                   options.iou_threshold, std::nullopt,
                   Interpolation::kContinuous);
    }
    return ev.ap(std::nullopt, std::nullopt, options.iou_threshold,
                 std::nullopt, Interpolation::kContinuous);
  };
  const auto results =
      detail::parallel_map<std::optional<double>>(total, options.jobs, shard);

  MetricReport rep;
  std::vector<std::optional<double>> voc;
  for (std::size_t ci = 0; ci < classes.size(); ++ci) {
    voc.push_back(results[ci * per_class]);
  }
  rep.voc50 = detail::mean_present(voc);

  std::array<std::array<std::optional<double>, kNumCocoThresholds>, kBands>
      banded{};
  for (std::size_t b = 0; b < kBands; ++b) {
    for (std::size_t t = 0; t < kNumCocoThresholds; ++t) {
      std::vector<std::optional<double>> v;
      for (std::size_t ci = 0; ci < classes.size(); ++ci) {
        v.push_back(results[ci * per_class + 1 + b * kNumCocoThresholds + t]);
      }
      banded[b][t] = detail::mean_present(v);
    }
  }
  rep.ap = detail::mean_of_thresholds(banded[0]);
  rep.ap50 = banded[0][0];
  rep.ap75 = banded[0][5];
  rep.ap_small = detail::mean_of_thresholds(banded[1]);
  rep.ap_medium = detail::mean_of_thresholds(banded[2]);
  rep.ap_large = detail::mean_of_thresholds(banded[3]);

  for (std::size_t ci = 0; ci < classes.size(); ++ci) {
    std::array<std::optional<double>, kNumCocoThresholds> v{};
    for (std::size_t t = 0; t < kNumCocoThresholds; ++t) {
      v[t] = results[ci * per_class + 1 + t];
    }
    rep.per_class.push_back(
        {classes[ci], results[ci * per_class], detail::mean_of_thresholds(v)});
  }

  rep.per_image_ap = detail::mean_present(std::span(results).subspan(
      class_shards, images.size()));
  rep.global_ap = results.back();
  return rep;
}

}  // namespace detkit
