#include "mdcn/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "mdcn/errors.hpp"

namespace mdcn {

std::vector<DetectionRecord> nms(std::vector<DetectionRecord> dets, double iou_threshold) {
  if (iou_threshold <= 0.0 || iou_threshold >= 1.0) {
    throw ShapeError("nms: threshold must lie in (0,1)");
  }
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;  // stable: input order breaks ties
  });
  std::vector<bool> suppressed(dets.size(), false);
  std::vector<DetectionRecord> kept;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t a = order[i];
    if (suppressed[a]) continue;
    kept.push_back(dets[a]);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const std::size_t b = order[j];
      if (suppressed[b]) continue;
      if (iou_pixels(dets[a].x1, dets[a].y1, dets[a].x2, dets[a].y2, dets[b].x1,
                     dets[b].y1, dets[b].x2, dets[b].y2) > iou_threshold) {
        suppressed[b] = true;
      }
    }
  }
  return kept;
}

namespace {

double interpolated_ap(const std::vector<std::pair<double, double>>& pr, int n_points) {
  double ap = 0.0;
  for (int i = 0; i < n_points; ++i) {
    const double r = static_cast<double>(i) / (n_points - 1);
    double p_max = 0.0;
    for (const auto& [rec, prec] : pr) {
      if (rec >= r) p_max = std::max(p_max, prec);
    }
    ap += p_max;
  }
  return ap / n_points;
}

}  // namespace

APResult average_precision(const std::vector<std::vector<DetectionRecord>>& dets_per_image,
                           const std::vector<std::vector<GroundTruth>>& gts_per_image,
                           const std::string& cls, Difficulty difficulty,
                           double iou_threshold, bool forty_point) {
  if (dets_per_image.size() != gts_per_image.size()) {
    throw ShapeError("average_precision: detections for " +
                     std::to_string(dets_per_image.size()) + " images but labels for " +
                     std::to_string(gts_per_image.size()));
  }
  APResult res;
  res.cls = cls;
  res.difficulty = difficulty;
  res.iou_threshold = iou_threshold;

  const int level = static_cast<int>(difficulty);

  // Partition each image's ground truth into counted and ignore sets.
  struct ImageGts {
    std::vector<const GroundTruth*> counted;
    std::vector<const GroundTruth*> ignore;
  };
  std::vector<ImageGts> prepared(gts_per_image.size());
  std::size_t npos = 0;
  for (std::size_t i = 0; i < gts_per_image.size(); ++i) {
    for (const auto& gt : gts_per_image[i]) {
      const bool same_class = gt.cls == cls;
      const bool dontcare = gt.cls.empty();
      if (same_class && !gt.ignored() && static_cast<int>(gt.difficulty) <= level) {
        prepared[i].counted.push_back(&gt);
      } else if (dontcare || (same_class)) {
        // Harder-than-level or unlabeled regions: matching them is free.
        prepared[i].ignore.push_back(&gt);
      }
    }
    npos += prepared[i].counted.size();
  }

  struct Ranked {
    double conf;
    std::size_t image;
    const DetectionRecord* det;
    std::size_t order;
  };
  std::vector<Ranked> ranked;
  for (std::size_t i = 0; i < dets_per_image.size(); ++i) {
    std::size_t ord = 0;
    for (const auto& d : dets_per_image[i]) {
      if (d.cls == cls) ranked.push_back({d.confidence, i, &d, ord});
      ++ord;
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.conf != b.conf) return a.conf > b.conf;
    if (a.image != b.image) return a.image < b.image;
    return a.order < b.order;
  });

  std::vector<std::vector<bool>> matched(prepared.size());
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    matched[i].assign(prepared[i].counted.size(), false);
  }

  std::size_t tp = 0, fp = 0;
  for (const auto& rk : ranked) {
    const auto& img = prepared[rk.image];
    double best = iou_threshold;
    int best_g = -1;
    for (std::size_t g = 0; g < img.counted.size(); ++g) {
      if (matched[rk.image][g]) continue;
      const auto* gt = img.counted[g];
      const double ov = iou_pixels(rk.det->x1, rk.det->y1, rk.det->x2, rk.det->y2, gt->x1,
                                   gt->y1, gt->x2, gt->y2);
      if (ov >= best) {
        best = ov;
        best_g = static_cast<int>(g);
      }
    }
    if (best_g >= 0) {
      matched[rk.image][best_g] = true;
      ++tp;
    } else {
      // A detection that only overlaps ignored ground truth is discarded.
      bool on_ignored = false;
      for (const auto* gt : img.ignore) {
        if (iou_pixels(rk.det->x1, rk.det->y1, rk.det->x2, rk.det->y2, gt->x1, gt->y1,
                       gt->x2, gt->y2) >= iou_threshold) {
          on_ignored = true;
          break;
        }
      }
      if (!on_ignored) ++fp;
    }
    if (npos > 0 && (tp + fp) > 0) {
      res.pr.emplace_back(static_cast<double>(tp) / static_cast<double>(npos),
                          static_cast<double>(tp) / static_cast<double>(tp + fp));
    }
  }

  if (npos == 0) {
    res.ap = 0.0;  // nothing to recall
    return res;
  }
  res.ap = interpolated_ap(res.pr, forty_point ? 40 : 11);
  return res;
}

IoUSweepTable iou_sweep(const std::vector<std::vector<DetectionRecord>>& dets_per_image,
                        const std::vector<std::vector<GroundTruth>>& gts_per_image,
                        const std::vector<std::string>& classes, Difficulty difficulty,
                        std::vector<double> thresholds) {
  IoUSweepTable t;
  if (thresholds.empty()) {
    for (int i = 0; i <= 6; ++i) thresholds.push_back(0.5 + 0.05 * i);
  }
  t.thresholds = thresholds;
  for (const auto& cls : classes) {
    IoUSweepRow row;
    row.cls = cls;
    for (double th : thresholds) {
      row.ap.push_back(
          average_precision(dets_per_image, gts_per_image, cls, difficulty, th).ap);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string iou_sweep_text(const IoUSweepTable& t) {
  std::ostringstream os;
  char buf[64];
  os << "class     ";
  for (double th : t.thresholds) {
    std::snprintf(buf, sizeof(buf), " %6.2f", th);
    os << buf;
  }
  os << "\n";
  for (const auto& row : t.rows) {
    std::snprintf(buf, sizeof(buf), "%-10s", row.cls.c_str());
    os << buf;
    for (double ap : row.ap) {
      std::snprintf(buf, sizeof(buf), " %6.2f", 100.0 * ap);
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

EvalReport evaluate_detections(const std::vector<std::vector<DetectionRecord>>& dets,
                               const std::vector<std::vector<GroundTruth>>& labels,
                               const std::vector<std::string>& classes,
                               double iou_threshold) {
  EvalReport r;
  r.classes = classes;
  r.iou_threshold = iou_threshold;
  double sum = 0.0;
  for (const auto& cls : classes) {
    std::array<double, 3> row{};
    for (int d = 0; d < 3; ++d) {
      row[d] = average_precision(dets, labels, cls, static_cast<Difficulty>(d),
                                 iou_threshold)
                   .ap;
      sum += row[d];
    }
    r.ap.push_back(row);
  }
  r.map = sum / (3.0 * static_cast<double>(classes.size()));
  return r;
}

EvalReport evaluate_model(const DetectorFn& model, const std::vector<Tensor>& images,
                          const std::vector<std::vector<GroundTruth>>& labels,
                          const std::vector<std::string>& classes, double iou_threshold) {
  if (images.size() != labels.size()) {
    throw ShapeError("evaluate_model: " + std::to_string(images.size()) + " images vs " +
                     std::to_string(labels.size()) + " label sets");
  }
  std::vector<std::vector<DetectionRecord>> dets(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    dets[i] = model(images[i]);
  }
  return evaluate_detections(dets, labels, classes, iou_threshold);
}

std::string eval_report_text(const EvalReport& r) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-12s %8s %9s %8s\n", "class", "easy", "moderate",
                "hard");
  os << buf;
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    std::snprintf(buf, sizeof(buf), "%-12s %8.2f %9.2f %8.2f\n", r.classes[c].c_str(),
                  100.0 * r.ap[c][0], 100.0 * r.ap[c][1], 100.0 * r.ap[c][2]);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "mAP %.2f (IoU %.2f)\n", 100.0 * r.map,
                r.iou_threshold);
  os << buf;
  return os.str();
}

std::string eval_report_records(const EvalReport& r) {
  std::ostringstream os;
  char buf[64];
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    for (int d = 0; d < 3; ++d) {
      std::snprintf(buf, sizeof(buf), "%.17g", r.ap[c][d]);
      os << "record=ap class=" << r.classes[c]
         << " difficulty=" << difficulty_name(static_cast<Difficulty>(d)) << " ap=" << buf
         << "\n";
    }
  }
  std::snprintf(buf, sizeof(buf), "%.17g", r.map);
  os << "record=map map=" << buf << "\n";
  return os.str();
}

}  // namespace mdcn
