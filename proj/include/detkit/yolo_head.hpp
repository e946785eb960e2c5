#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <variant>
#include <vector>

#include "detkit/error.hpp"
#include "detkit/geometry.hpp"

namespace detkit {

/// Network-space box coordinates (t_x, t_y, t_w, t_h).
struct BoxCoords {
  double tx = 0.0;
  double ty = 0.0;
  double tw = 0.0;
  double th = 0.0;

  std::array<double, 4> as_array() const { return {tx, ty, tw, th}; }
  static BoxCoords from_array(const std::array<double, 4>& a) {
    return {a[0], a[1], a[2], a[3]};
  }
  friend bool operator==(const BoxCoords&, const BoxCoords&) = default;
};

/// One prior's slice of the prediction tensor.
struct RawPrediction {
  BoxCoords coords;
  double objectness_logit = 0.0;
  std::vector<double> class_logits;
};

struct GridSpec {
  int grid_size = 0;
  int anchors_per_cell = 0;
  int num_classes = 0;

  static GridSpec make(int grid_size, int anchors_per_cell, int num_classes) {
    if (grid_size <= 0 || anchors_per_cell <= 0 || num_classes <= 0) {
      throw InvalidArgument("grid size, anchors and classes must be positive");
    }
    return {grid_size, anchors_per_cell, num_classes};
  }

  // t_x, t_y, t_w, t_h, objectness, then one logit per class.
  std::size_t channels_per_anchor() const {
    return 4 + 1 + static_cast<std::size_t>(num_classes);
  }
  std::size_t cell_depth() const {
    return static_cast<std::size_t>(anchors_per_cell) * channels_per_anchor();
  }
  std::size_t element_count() const {
    const auto n = static_cast<std::size_t>(grid_size);
    return n * n * cell_depth();
  }
};

/// Channel offsets inside one anchor's slice.
namespace channel {
inline constexpr int kTx = 0;
inline constexpr int kTy = 1;
inline constexpr int kTw = 2;
inline constexpr int kTh = 3;
inline constexpr int kObjectness = 4;
inline constexpr int kFirstClass = 5;
}  // namespace channel

struct GridCell {
  int cx = 0;
  int cy = 0;
  double stride = 1.0;

  static GridCell make(int cx, int cy, double stride) {
    if (cx < 0 || cy < 0) throw InvalidArgument("cell index must be >= 0");
    if (!(stride > 0.0) || !std::isfinite(stride)) {
      throw InvalidArgument("cell stride must be positive");
    }
    return {cx, cy, stride};
  }

  bool within(const GridSpec& spec) const {
    return cx < spec.grid_size && cy < spec.grid_size;
  }
};

struct AnchorPrior {
  double pw = 0.0;
  double ph = 0.0;

  static AnchorPrior make(double pw, double ph) {
    if (!(pw > 0.0) || !(ph > 0.0) || !std::isfinite(pw) ||
        !std::isfinite(ph)) {
      throw InvalidArgument("anchor prior dimensions must be positive");
    }
    return {pw, ph};
  }

  double area() const { return pw * ph; }
  friend bool operator==(const AnchorPrior&, const AnchorPrior&) = default;
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline constexpr double kLogitClampEps = 1e-7;

inline double logit(double p) {
  p = std::clamp(p, kLogitClampEps, 1.0 - kLogitClampEps);
  return std::log(p) - std::log1p(-p);
}

/// Maps network coordinates to an image-pixel box:
/// center = (sigmoid(t) + cell) * stride, size = prior * exp(t).
inline Box decode(const BoxCoords& t, const GridCell& cell,
                  const AnchorPrior& prior) {
  const double bx = (sigmoid(t.tx) + cell.cx) * cell.stride;
  const double by = (sigmoid(t.ty) + cell.cy) * cell.stride;
  return Box::from_center(bx, by, prior.pw * std::exp(t.tw),
                          prior.ph * std::exp(t.th));
}

inline Box decode(const RawPrediction& t, const GridCell& cell,
                  const AnchorPrior& prior) {
  return decode(t.coords, cell, prior);
}

/// Inverse of `decode`. The center must fall inside `cell` (edges included);
/// offsets of exactly 0 or 1 are clamped by `kLogitClampEps` before the logit.
inline BoxCoords encode(const Box& b, const GridCell& cell,
                        const AnchorPrior& prior) {
  const double ox = b.center_x() / cell.stride - cell.cx;
  const double oy = b.center_y() / cell.stride - cell.cy;
  if (!(ox >= 0.0 && ox <= 1.0 && oy >= 0.0 && oy <= 1.0)) {
    std::ostringstream os;
    os << "box center (" << b.center_x() << ", " << b.center_y()
       << ") is not inside cell (" << cell.cx << ", " << cell.cy
       << ") at stride " << cell.stride;
    throw CellMismatch(os.str());
  }
  return {logit(ox), logit(oy), std::log(b.width() / prior.pw),
          std::log(b.height() / prior.ph)};
}

/// Negative gradient of 0.5 * ||target - predicted||^2 w.r.t. predicted.
inline BoxCoords coord_gradient(const BoxCoords& target,
                                const BoxCoords& predicted) {
  return {target.tx - predicted.tx, target.ty - predicted.ty,
          target.tw - predicted.tw, target.th - predicted.th};
}

inline double coord_loss(const BoxCoords& target, const BoxCoords& predicted) {
  const auto g = coord_gradient(target, predicted).as_array();
  double sum = 0.0;
  for (double v : g) sum += v * v;
  return 0.5 * sum;
}

inline constexpr double kProbClampEps = 1e-12;

/// Binary cross-entropy of probability `p` against a 0/1 target.
inline double bce_loss(double p, int y) {
  p = std::clamp(p, kProbClampEps, 1.0 - kProbClampEps);
  return y != 0 ? -std::log(p) : -std::log1p(-p);
}

/// d/dlogit of bce_loss(sigmoid(logit), y).
inline double bce_gradient_wrt_logit(double logit_value, int y) {
  return sigmoid(logit_value) - (y != 0 ? 1.0 : 0.0);
}

// ---------------------------------------------------------------------------
// Truth assignment
// ---------------------------------------------------------------------------

struct Positive {
  std::size_t gt_index;
  friend bool operator==(const Positive&, const Positive&) = default;
};
struct Ignored {
  friend bool operator==(const Ignored&, const Ignored&) = default;
};
struct Negative {
  friend bool operator==(const Negative&, const Negative&) = default;
};

using AssignmentLabel = std::variant<Positive, Ignored, Negative>;

inline bool is_positive(const AssignmentLabel& l) {
  return std::holds_alternative<Positive>(l);
}

/// An anchor prior placed at a grid cell; it covers the box of the prior's
/// size centered on that cell.
struct PlacedPrior {
  AnchorPrior prior;
  GridCell cell;

  Box box() const {
    return Box::from_center((cell.cx + 0.5) * cell.stride,
                            (cell.cy + 0.5) * cell.stride, prior.pw,
                            prior.ph);
  }
};

/// Row-major [prior][gt] overlap matrix.
class IouMatrix {
 public:
  IouMatrix(std::size_t num_priors, std::size_t num_gts)
      : priors_(num_priors), gts_(num_gts), v_(num_priors * num_gts, 0.0) {}

  static IouMatrix compute(std::span<const PlacedPrior> priors,
                           std::span<const Box> gts) {
    IouMatrix m(priors.size(), gts.size());
    for (std::size_t p = 0; p < priors.size(); ++p) {
      const Box pb = priors[p].box();
      for (std::size_t g = 0; g < gts.size(); ++g) m.at(p, g) = iou(pb, gts[g]);
    }
    return m;
  }

  std::size_t num_priors() const { return priors_; }
  std::size_t num_gts() const { return gts_; }
  double& at(std::size_t p, std::size_t g) { return v_[p * gts_ + g]; }
  double at(std::size_t p, std::size_t g) const { return v_[p * gts_ + g]; }

 private:
  std::size_t priors_;
  std::size_t gts_;
  std::vector<double> v_;
};

/// Best-prior assignment with an ignore band.
///
/// Each ground truth claims one prior. Ground truths are served in order of
/// their best available overlap (descending, ties by lower gt index); each
/// takes the highest-IOU prior not already claimed (ties by lower prior
/// index). Unclaimed priors overlapping any ground truth by more than
/// `ignore_threshold` are Ignored, the rest Negative. With more ground truths
/// than priors the surplus ground truths stay unassigned.
inline std::vector<AssignmentLabel> assign_yolo(const IouMatrix& m,
                                                double ignore_threshold = 0.5) {
  const std::size_t np = m.num_priors(), ng = m.num_gts();
  std::vector<std::optional<std::size_t>> owner(np);
  std::vector<bool> served(ng, false);

  for (std::size_t round = 0; round < std::min(np, ng); ++round) {
    std::optional<std::size_t> best_g, best_p;
    double best = -1.0;
    for (std::size_t g = 0; g < ng; ++g) {
      if (served[g]) continue;
      for (std::size_t p = 0; p < np; ++p) {
        if (owner[p]) continue;
        if (m.at(p, g) > best) {
          best = m.at(p, g);
          best_g = g;
          best_p = p;
        }
      }
    }
    if (!best_g) break;
    served[*best_g] = true;
    owner[*best_p] = *best_g;
  }

  std::vector<AssignmentLabel> labels(np, Negative{});
  for (std::size_t p = 0; p < np; ++p) {
    if (owner[p]) {
      labels[p] = Positive{*owner[p]};
      continue;
    }
    for (std::size_t g = 0; g < ng; ++g) {
      if (m.at(p, g) > ignore_threshold) {
        labels[p] = Ignored{};
        break;
      }
    }
  }
  return labels;
}

inline std::vector<AssignmentLabel> assign_yolo(
    std::span<const PlacedPrior> priors, std::span<const Box> gts,
    double ignore_threshold = 0.5) {
  if (priors.empty()) throw InvalidArgument("assignment needs >= 1 prior");
  return assign_yolo(IouMatrix::compute(priors, gts), ignore_threshold);
}

/// Two-threshold assignment: per prior, the max overlap m over ground truths
/// decides Positive (m >= pos), Ignored (neg <= m < pos) or Negative.
inline std::vector<AssignmentLabel> assign_dual_threshold(
    const IouMatrix& m, double pos_threshold = 0.7,
    double neg_threshold = 0.3) {
  if (!(0.0 <= neg_threshold && neg_threshold <= pos_threshold &&
        pos_threshold <= 1.0)) {
    throw InvalidArgument("need 0 <= neg_threshold <= pos_threshold <= 1");
  }
  std::vector<AssignmentLabel> labels(m.num_priors(), Negative{});
  for (std::size_t p = 0; p < m.num_priors(); ++p) {
    if (m.num_gts() == 0) continue;
    std::size_t arg = 0;
    for (std::size_t g = 1; g < m.num_gts(); ++g) {
      if (m.at(p, g) > m.at(p, arg)) arg = g;
    }
    const double best = m.at(p, arg);
    if (best >= pos_threshold) {
      labels[p] = Positive{arg};
    } else if (best >= neg_threshold) {
      labels[p] = Ignored{};
    }
  }
  return labels;
}

inline std::vector<AssignmentLabel> assign_dual_threshold(
    std::span<const PlacedPrior> priors, std::span<const Box> gts,
    double pos_threshold = 0.7, double neg_threshold = 0.3) {
  return assign_dual_threshold(IouMatrix::compute(priors, gts), pos_threshold,
                               neg_threshold);
}

// ---------------------------------------------------------------------------
// Loss aggregation
// ---------------------------------------------------------------------------

struct LabeledBox {
  Box box;
  int class_id;
};

struct LossBreakdown {
  double coord = 0.0;
  double objectness = 0.0;
  double classification = 0.0;

  double total() const { return coord + objectness + classification; }
};

/// Sums the head loss over a set of priors.
///
/// Positive priors pay SSE on coordinates, BCE on objectness (target 1) and
/// per-class BCE against a one-hot target. Negative priors pay objectness
/// BCE (target 0) only; Ignored priors contribute nothing. A Positive prior's
/// ground-truth center must lie in that prior's cell.
inline LossBreakdown head_loss(std::span<const RawPrediction> predictions,
                               std::span<const PlacedPrior> priors,
                               std::span<const AssignmentLabel> labels,
                               std::span<const LabeledBox> gts) {
  if (predictions.size() != priors.size() || labels.size() != priors.size()) {
    throw InvalidArgument("predictions, priors and labels differ in length");
  }
  LossBreakdown out;
  for (std::size_t i = 0; i < priors.size(); ++i) {
    const RawPrediction& pred = predictions[i];
    if (const auto* pos = std::get_if<Positive>(&labels[i])) {
      const LabeledBox& gt = gts[pos->gt_index];
      out.coord += coord_loss(encode(gt.box, priors[i].cell, priors[i].prior),
                              pred.coords);
      out.objectness += bce_loss(sigmoid(pred.objectness_logit), 1);
      for (std::size_t c = 0; c < pred.class_logits.size(); ++c) {
        const int y = static_cast<int>(c) == gt.class_id ? 1 : 0;
        out.classification += bce_loss(sigmoid(pred.class_logits[c]), y);
      }
    } else if (std::holds_alternative<Negative>(labels[i])) {
      out.objectness += bce_loss(sigmoid(pred.objectness_logit), 0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tensor layout
// ---------------------------------------------------------------------------

struct TensorPosition {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t anchor = 0;
  std::size_t channel = 0;
  friend bool operator==(const TensorPosition&, const TensorPosition&) =
      default;
};

/// Flat offset of (row, col, anchor, channel) in the row-major
/// N x N x [A * (4 + 1 + C)] prediction tensor.
inline std::size_t tensor_index(const GridSpec& spec,
                                const TensorPosition& pos) {
  const auto n = static_cast<std::size_t>(spec.grid_size);
  const auto a = static_cast<std::size_t>(spec.anchors_per_cell);
  const std::size_t depth = spec.channels_per_anchor();
  if (pos.row >= n || pos.col >= n || pos.anchor >= a || pos.channel >= depth) {
    std::ostringstream os;
    os << "position (" << pos.row << ", " << pos.col << ", " << pos.anchor
       << ", " << pos.channel << ") outside grid " << n << "x" << n << "x" << a
       << "x" << depth;
    throw OutOfBounds(os.str());
  }
  return ((pos.row * n + pos.col) * a + pos.anchor) * depth + pos.channel;
}

inline TensorPosition tensor_unindex(const GridSpec& spec,
                                     std::size_t offset) {
  if (offset >= spec.element_count()) {
    std::ostringstream os;
    os << "offset " << offset << " >= element count " << spec.element_count();
    throw OutOfBounds(os.str());
  }
  const auto n = static_cast<std::size_t>(spec.grid_size);
  const auto a = static_cast<std::size_t>(spec.anchors_per_cell);
  const std::size_t depth = spec.channels_per_anchor();
  TensorPosition pos;
  pos.channel = offset % depth;
  offset /= depth;
  pos.anchor = offset % a;
  offset /= a;
  pos.col = offset % n;
  pos.row = offset / n;
  return pos;
}

/// Reads one anchor's slice out of a flat tensor.
inline RawPrediction read_prediction(const GridSpec& spec,
                                     std::span<const double> tensor,
                                     std::size_t row, std::size_t col,
                                     std::size_t anchor) {
  if (tensor.size() != spec.element_count()) {
    throw InvalidArgument("tensor size does not match grid spec");
  }
  const std::size_t base = tensor_index(spec, {row, col, anchor, 0});
  RawPrediction p;
  p.coords = {tensor[base + channel::kTx], tensor[base + channel::kTy],
              tensor[base + channel::kTw], tensor[base + channel::kTh]};
  p.objectness_logit = tensor[base + channel::kObjectness];
  const auto first = tensor.begin() + static_cast<std::ptrdiff_t>(
                                          base + channel::kFirstClass);
  p.class_logits.assign(first, first + spec.num_classes);
  return p;
}

}  // namespace detkit
