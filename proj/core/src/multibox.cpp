#include "mdcn/multibox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace mdcn {

Box Box::from_corners(double x1, double y1, double x2, double y2) {
  if (!(x1 < x2) || !(y1 < y2)) {
    throw ShapeError("Box: corners must satisfy xmin < xmax, ymin < ymax");
  }
  return Box{(x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1};
}

double iou(const Box& a, const Box& b) {
  const double ix = std::min(a.xmax(), b.xmax()) - std::max(a.xmin(), b.xmin());
  const double iy = std::min(a.ymax(), b.ymax()) - std::max(a.ymin(), b.ymin());
  if (ix <= 0 || iy <= 0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

AnchorSet generate_anchors(const std::vector<TapSpec>& taps) {
  AnchorSet set;
  set.taps = taps;
  for (const auto& tap : taps) {
    if (tap.map_size < 1) throw ShapeError("generate_anchors: map_size must be >= 1");
    const double step = 1.0 / tap.map_size;
    for (int row = 0; row < tap.map_size; ++row) {
      for (int col = 0; col < tap.map_size; ++col) {
        const double cx = (col + 0.5) * step;
        const double cy = (row + 0.5) * step;
        auto push = [&](double s, double ratio) {
          const double sq = std::sqrt(ratio);
          Box b{cx, cy, s * sq, s / sq};
          // Clip the corner form to the image, keep center form.
          const double x1 = std::max(0.0, b.xmin());
          const double y1 = std::max(0.0, b.ymin());
          const double x2 = std::min(1.0, b.xmax());
          const double y2 = std::min(1.0, b.ymax());
          set.boxes.push_back(Box::from_corners(x1, y1, x2, y2));
        };
        for (double r : tap.ratios) push(tap.scale, r);
        if (tap.extra_scale_box) {
          push(std::sqrt(tap.scale * tap.scale_next), 1.0);
        }
      }
    }
  }
  return set;
}

std::vector<TapSpec> tap_specs_for_graph(const NetworkGraph& g, int input_size,
                                         double scale_min, double scale_max) {
  const auto shapes = infer_shapes(g, input_size);
  const std::size_t n = g.source_taps.size();
  if (n < 2) throw ShapeError("tap_specs_for_graph: need at least two taps");
  std::vector<TapSpec> specs;
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t map = shapes.at(g.source_taps[t]).h;
    TapSpec spec;
    spec.map_size = static_cast<int>(map);
    spec.scale = scale_min + (scale_max - scale_min) * static_cast<double>(t) /
                                 static_cast<double>(n - 1);
    const double next = scale_min + (scale_max - scale_min) * static_cast<double>(t + 1) /
                                        static_cast<double>(n - 1);
    spec.scale_next = (t + 1 < n) ? next : 1.0;
    const bool reduced = (t == 0 || map == 1);
    spec.ratios = reduced ? std::vector<double>{1.0, 2.0, 0.5}
                          : std::vector<double>{1.0, 2.0, 3.0, 0.5, 1.0 / 3.0};
    specs.push_back(std::move(spec));
  }
  return specs;
}

std::string anchors_to_text(const AnchorSet& anchors) {
  std::ostringstream os;
  std::size_t i = 0;
  char buf[160];
  for (std::size_t t = 0; t < anchors.taps.size(); ++t) {
    const TapSpec& tap = anchors.taps[t];
    const int k = tap.boxes_per_cell();
    for (int row = 0; row < tap.map_size; ++row) {
      for (int col = 0; col < tap.map_size; ++col) {
        for (int b = 0; b < k; ++b, ++i) {
          const Box& box = anchors.boxes[i];
          std::snprintf(buf, sizeof(buf), "%zu %d %d %d %.17g %.17g %.17g %.17g\n", t, row,
                        col, b, box.cx, box.cy, box.w, box.h);
          os << buf;
        }
      }
    }
  }
  return os.str();
}

MatchAssignment match(const std::vector<GtBox>& gts, const AnchorSet& anchors,
                      double threshold) {
  if (anchors.size() == 0) throw ShapeError("match: empty anchor set");
  if (threshold <= 0.0 || threshold >= 1.0) {
    throw ShapeError("match: threshold must lie in (0,1)");
  }
  const std::size_t A = anchors.size();
  const std::size_t G = gts.size();
  MatchAssignment m;
  m.anchor_to_gt.assign(A, -1);
  if (G == 0) return m;

  std::vector<double> overlaps(A * G);
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t g = 0; g < G; ++g) {
      overlaps[a * G + g] = iou(anchors.boxes[a], gts[g].box);
    }
  }

  // Phase 1: greedy bipartite best-match. Every gt gets its best remaining
  // anchor even when all overlaps sit below the threshold.
  std::vector<bool> gt_done(G, false);
  std::vector<bool> anchor_used(A, false);
  for (std::size_t round = 0; round < std::min(A, G); ++round) {
    double best = -1.0;
    std::size_t best_a = 0, best_g = 0;
    for (std::size_t g = 0; g < G; ++g) {
      if (gt_done[g]) continue;
      for (std::size_t a = 0; a < A; ++a) {
        if (anchor_used[a]) continue;
        if (overlaps[a * G + g] > best) {  // strict > : lowest (g,a) wins ties
          best = overlaps[a * G + g];
          best_a = a;
          best_g = g;
        }
      }
    }
    if (best < 0) break;
    gt_done[best_g] = true;
    anchor_used[best_a] = true;
    m.anchor_to_gt[best_a] = static_cast<int>(best_g);
  }

  // Phase 2: remaining anchors with overlap above threshold join their
  // argmax gt.
  for (std::size_t a = 0; a < A; ++a) {
    if (m.anchor_to_gt[a] >= 0) continue;
    double best = threshold;
    int best_g = -1;
    for (std::size_t g = 0; g < G; ++g) {
      if (overlaps[a * G + g] > best) {
        best = overlaps[a * G + g];
        best_g = static_cast<int>(g);
      }
    }
    m.anchor_to_gt[a] = best_g;
  }

  m.num_positives = static_cast<std::size_t>(
      std::count_if(m.anchor_to_gt.begin(), m.anchor_to_gt.end(),
                    [](int v) { return v >= 0; }));
  return m;
}

std::array<double, 4> encode_box(const Box& gt, const Box& anchor) {
  if (gt.w <= 0 || gt.h <= 0 || anchor.w <= 0 || anchor.h <= 0) {
    throw ShapeError("encode_box: boxes must have positive size");
  }
  return {(gt.cx - anchor.cx) / (anchor.w * kVarCenter),
          (gt.cy - anchor.cy) / (anchor.h * kVarCenter),
          std::log(gt.w / anchor.w) / kVarSize,
          std::log(gt.h / anchor.h) / kVarSize};
}

Box decode_box(const std::array<double, 4>& offsets, const Box& anchor) {
  if (anchor.w <= 0 || anchor.h <= 0) {
    throw ShapeError("decode_box: anchor must have positive size");
  }
  Box b;
  b.cx = offsets[0] * kVarCenter * anchor.w + anchor.cx;
  b.cy = offsets[1] * kVarCenter * anchor.h + anchor.cy;
  b.w = anchor.w * std::exp(offsets[2] * kVarSize);
  b.h = anchor.h * std::exp(offsets[3] * kVarSize);
  return b;
}

double smooth_l1(double x) {
  const double ax = std::fabs(x);
  return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

double smooth_l1_grad(double x) {
  if (x > 1.0) return 1.0;
  if (x < -1.0) return -1.0;
  return x;
}

namespace {

// log(sum(exp(logits))) with the usual max shift.
double log_sum_exp(const double* logits, std::size_t n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, logits[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(logits[i] - mx);
  return mx + std::log(s);
}

}  // namespace

MultiboxLossResult multibox_loss(const Tensor& conf_logits, const Tensor& loc_preds,
                                 const MatchAssignment& assignment,
                                 const std::vector<GtBox>& gts, const AnchorSet& anchors,
                                 double neg_pos_ratio, double alpha) {
  const std::size_t A = anchors.size();
  if (conf_logits.rank() != 2 || conf_logits.dim(0) != A) {
    throw ShapeError("multibox_loss: conf_logits must be [A, classes+1] with A=" +
                     std::to_string(A) + ", got " + shape_str(conf_logits.shape()));
  }
  if (loc_preds.rank() != 2 || loc_preds.dim(0) != A || loc_preds.dim(1) != 4) {
    throw ShapeError("multibox_loss: loc_preds must be [A, 4], got " +
                     shape_str(loc_preds.shape()));
  }
  if (assignment.anchor_to_gt.size() != A) {
    throw ShapeError("multibox_loss: assignment covers " +
                     std::to_string(assignment.anchor_to_gt.size()) + " anchors, want " +
                     std::to_string(A));
  }
  const std::size_t n_cls = conf_logits.dim(1);

  MultiboxLossResult r;
  r.conf_grad = Tensor({A, n_cls});
  r.loc_grad = Tensor({A, 4});
  r.report.alpha = alpha;

  const std::size_t N = assignment.num_positives;
  r.report.num_matched = N;
  if (N == 0) return r;

  for (int g : assignment.anchor_to_gt) {
    if (g >= static_cast<int>(gts.size())) {
      throw ShapeError("multibox_loss: assignment references gt " + std::to_string(g) +
                       " beyond " + std::to_string(gts.size()));
    }
  }

  // Mining pool: per-negative background cross-entropy.
  std::vector<std::pair<double, std::size_t>> neg_losses;
  neg_losses.reserve(A - N);

  double conf_sum = 0.0, loc_sum = 0.0;
  const double inv_n = 1.0 / static_cast<double>(N);

  for (std::size_t a = 0; a < A; ++a) {
    const double* logits = conf_logits.data() + a * n_cls;
    const double lse = log_sum_exp(logits, n_cls);
    const int g = assignment.anchor_to_gt[a];
    if (g >= 0) {
      const int label = gts[static_cast<std::size_t>(g)].label;
      if (label < 1 || static_cast<std::size_t>(label) >= n_cls) {
        throw ShapeError("multibox_loss: gt label " + std::to_string(label) +
                         " outside 1.." + std::to_string(n_cls - 1));
      }
      conf_sum += lse - logits[label];
      // Softmax-minus-onehot, scaled by the 1/N of the total.
      for (std::size_t c = 0; c < n_cls; ++c) {
        r.conf_grad.at2(a, c) = std::exp(logits[c] - lse) * inv_n;
      }
      r.conf_grad.at2(a, static_cast<std::size_t>(label)) -= inv_n;

      const auto target = encode_box(gts[static_cast<std::size_t>(g)].box,
                                     anchors.boxes[a]);
      for (std::size_t d = 0; d < 4; ++d) {
        const double diff = loc_preds.at2(a, d) - target[d];
        loc_sum += smooth_l1(diff);
        r.loc_grad.at2(a, d) = alpha * smooth_l1_grad(diff) * inv_n;
      }
    } else {
      neg_losses.emplace_back(lse - logits[0], a);
    }
  }

  // Hard negatives: top ratio*N by loss; ties resolved by anchor index so
  // the mined set is deterministic.
  const std::size_t want =
      std::min(neg_losses.size(),
               static_cast<std::size_t>(neg_pos_ratio * static_cast<double>(N)));
  std::partial_sort(neg_losses.begin(), neg_losses.begin() + want, neg_losses.end(),
                    [](const auto& x, const auto& y) {
                      if (x.first != y.first) return x.first > y.first;
                      return x.second < y.second;
                    });
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t a = neg_losses[i].second;
    const double* logits = conf_logits.data() + a * n_cls;
    const double lse = log_sum_exp(logits, n_cls);
    conf_sum += neg_losses[i].first;
    for (std::size_t c = 0; c < n_cls; ++c) {
      r.conf_grad.at2(a, c) = std::exp(logits[c] - lse) * inv_n;
    }
    r.conf_grad.at2(a, 0) -= inv_n;
  }

  r.report.conf = conf_sum;
  r.report.loc = loc_sum;
  r.report.total = (conf_sum + alpha * loc_sum) * inv_n;
  return r;
}

}  // namespace mdcn
