#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mdcn/graph.hpp"
#include "mdcn/tensor.hpp"

namespace mdcn {

/// Axis-aligned box in normalized [0,1] image coordinates, center form.
struct Box {
  double cx = 0, cy = 0, w = 0, h = 0;

  double xmin() const { return cx - w / 2; }
  double ymin() const { return cy - h / 2; }
  double xmax() const { return cx + w / 2; }
  double ymax() const { return cy + h / 2; }
  double area() const { return w * h; }

  static Box from_corners(double x1, double y1, double x2, double y2);
};

/// Jaccard overlap: intersection area over union area, in [0,1].
double iou(const Box& a, const Box& b);

/// Per-tap default-box layout. Each cell gets one box per aspect ratio at
/// `scale` plus, when extra_scale_box, one ratio-1 box at
/// sqrt(scale * scale_next).
struct TapSpec {
  int map_size = 0;
  double scale = 0;
  double scale_next = 0;
  std::vector<double> ratios;  // always includes 1 first
  bool extra_scale_box = true;

  int boxes_per_cell() const {
    return static_cast<int>(ratios.size()) + (extra_scale_box ? 1 : 0);
  }
};

/// Default boxes in (tap, row, col, box) order; the per-cell box order is
/// ratio list order, extra scale-1 box last.
struct AnchorSet {
  std::vector<Box> boxes;
  std::vector<TapSpec> taps;

  std::size_t size() const { return boxes.size(); }
};

AnchorSet generate_anchors(const std::vector<TapSpec>& taps);

/// Tap specs for a graph's prediction sources with scales spaced linearly
/// over [scale_min, scale_max]; full taps use ratios {1,2,3,1/2,1/3}, reduced
/// taps (first tap and 1x1 taps, k=4) use {1,2,1/2}.
std::vector<TapSpec> tap_specs_for_graph(const NetworkGraph& g, int input_size,
                                         double scale_min = 0.2, double scale_max = 0.9);

/// Text dump, one box per line: "tap row col box cx cy w h".
std::string anchors_to_text(const AnchorSet& anchors);

/// Ground-truth box with class label in 1..num_classes (0 is background).
struct GtBox {
  Box box;
  int label = 1;
};

/// Per-anchor match state: gt index for positives, -1 for negatives.
struct MatchAssignment {
  std::vector<int> anchor_to_gt;
  std::size_t num_positives = 0;
};

/// Two-phase jaccard matching: (1) greedy bipartite best-match so every
/// ground truth owns at least one anchor, (2) any remaining anchor with
/// overlap > threshold joins its argmax ground truth.
MatchAssignment match(const std::vector<GtBox>& gts, const AnchorSet& anchors,
                      double threshold = 0.5);

// Offset encoding variances (SSD convention).
inline constexpr double kVarCenter = 0.1;
inline constexpr double kVarSize = 0.2;

/// Center-size offsets of gt relative to anchor; decode inverts exactly.
std::array<double, 4> encode_box(const Box& gt, const Box& anchor);
Box decode_box(const std::array<double, 4>& offsets, const Box& anchor);

struct LossReport {
  double total = 0;   // (conf + alpha * loc) / N
  double conf = 0;    // summed softmax cross-entropy over positives + mined negatives
  double loc = 0;     // summed smooth-L1 over positives
  std::size_t num_matched = 0;
  double alpha = 1.0;
};

struct MultiboxLossResult {
  LossReport report;
  Tensor conf_grad;  // [A, classes+1]
  Tensor loc_grad;   // [A, 4]
};

double smooth_l1(double x);
double smooth_l1_grad(double x);

/// Joint confidence + localization loss over one image's anchors.
/// conf_logits [A, classes+1], loc_preds [A, 4]. Negatives are mined at
/// neg_pos_ratio per positive by descending background cross-entropy.
/// N = 0 yields zero loss and zero gradients.
MultiboxLossResult multibox_loss(const Tensor& conf_logits, const Tensor& loc_preds,
                                 const MatchAssignment& assignment,
                                 const std::vector<GtBox>& gts, const AnchorSet& anchors,
                                 double neg_pos_ratio = 3.0, double alpha = 1.0);

}  // namespace mdcn
