#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include "detkit/error.hpp"

namespace detkit {

/// Axis-aligned rectangle in image pixels.
///
/// Stored as left/top + size; center accessors are derived.
/// Construction rejects non-finite values and non-positive extents, so every
/// `Box` in circulation has a strictly positive area.
class Box {
 public:
  static Box from_center(double center_x, double center_y, double width,
                         double height) {
    check(center_x, center_y, width, height);
    return Box(center_x - width / 2.0, center_y - height / 2.0, width, height);
  }

  /// COCO-style [left, top, width, height].
  static Box from_ltwh(double left, double top, double width, double height) {
    check(left, top, width, height);
    return Box(left, top, width, height);
  }

  static Box from_corners(double left, double top, double right,
                          double bottom) {
    return from_ltwh(left, top, right - left, bottom - top);
  }

  double center_x() const noexcept { return l_ + w_ / 2.0; }
  double center_y() const noexcept { return t_ + h_ / 2.0; }
  double width() const noexcept { return w_; }
  double height() const noexcept { return h_; }

  double left() const noexcept { return l_; }
  double top() const noexcept { return t_; }
  double right() const noexcept { return l_ + w_; }
  double bottom() const noexcept { return t_ + h_; }
  double area() const noexcept { return w_ * h_; }

  friend bool operator==(const Box&, const Box&) = default;

 private:
  Box(double l, double t, double w, double h) : l_(l), t_(t), w_(w), h_(h) {}

  static void check(double a, double b, double width, double height) {
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(width) ||
        !std::isfinite(height)) {
      throw InvalidBox("box has non-finite coordinates");
    }
    if (!(width > 0.0) || !(height > 0.0)) {
      std::ostringstream os;
      os << "box extent must be positive, got " << width << "x" << height;
      throw InvalidBox(os.str());
    }
  }

  double l_;
  double t_;
  double w_;
  double h_;
};

/// A detection entering NMS or evaluation.
struct ScoredBox {
  Box box;
  double score;
  int class_id;

  static ScoredBox make(const Box& box, double score, int class_id) {
    if (!(score >= 0.0 && score <= 1.0)) {
      std::ostringstream os;
      os << "score " << score << " outside [0, 1]";
      throw InvalidArgument(os.str());
    }
    if (class_id < 0) throw InvalidArgument("class_id must be non-negative");
    return ScoredBox{box, score, class_id};
  }

  friend bool operator==(const ScoredBox&, const ScoredBox&) = default;
};

// Intersection over union, computed on corners. iou(b, b) == 1 exactly.
inline double iou(const Box& a, const Box& b) noexcept {
  const double al = a.left(), ar = a.right(), at = a.top(), ab = a.bottom();
  const double bl = b.left(), br = b.right(), bt = b.top(), bb = b.bottom();
  const double iw = std::min(ar, br) - std::max(al, bl);
  const double ih = std::min(ab, bb) - std::max(at, bt);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double area_a = (ar - al) * (ab - at);
  const double area_b = (br - bl) * (bb - bt);
  const double uni = area_a + area_b - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Indices of `items` ordered by descending score, ties by ascending index.
template <typename T, typename ScoreFn>
std::vector<std::size_t> order_by_score(std::span<const T> items,
                                        ScoreFn score) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) {
                     return score(items[l]) > score(items[r]);
                   });
  return order;
}

/// Greedy per-class non-maximum suppression.
///
/// A box survives iff its IOU with every previously kept box of the same
/// class is <= `iou_threshold`. Output is ordered by descending score with
/// ties in input order; field values are copied through untouched.
inline std::vector<ScoredBox> nms(std::span<const ScoredBox> dets,
                                  double iou_threshold) {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
    throw InvalidArgument("nms iou_threshold must lie in [0, 1]");
  }
  const auto order = order_by_score(
      dets, [](const ScoredBox& d) { return d.score; });
  std::vector<ScoredBox> kept;
  for (std::size_t idx : order) {
    const ScoredBox& cand = dets[idx];
    const bool suppressed =
        std::any_of(kept.begin(), kept.end(), [&](const ScoredBox& k) {
          return k.class_id == cand.class_id &&
                 iou(k.box, cand.box) > iou_threshold;
        });
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

}  // namespace detkit
