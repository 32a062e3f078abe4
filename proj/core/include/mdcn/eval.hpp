#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "mdcn/kitti.hpp"
#include "mdcn/tensor.hpp"

namespace mdcn {

/// Greedy non-maximum suppression by descending confidence; ties broken by
/// input order. Survivors have pairwise overlap <= threshold.
std::vector<DetectionRecord> nms(std::vector<DetectionRecord> dets, double iou_threshold);

struct APResult {
  std::vector<std::pair<double, double>> pr;  // (recall, precision) per detection rank
  double ap = 0;
  std::string cls;
  Difficulty difficulty = Difficulty::hard;
  double iou_threshold = 0.5;
};

/// Average precision for one class at one difficulty level. Detections match
/// greedily in descending confidence against unmatched ground truth of their
/// image; ignored ground truth (DontCare, harder-than-level objects) neither
/// scores nor penalizes. 11-point interpolated AP by default; forty_point
/// switches to the 40-recall-position variant.
APResult average_precision(const std::vector<std::vector<DetectionRecord>>& dets_per_image,
                           const std::vector<std::vector<GroundTruth>>& gts_per_image,
                           const std::string& cls, Difficulty difficulty,
                           double iou_threshold, bool forty_point = false);

struct IoUSweepRow {
  std::string cls;
  std::vector<double> ap;  // one per threshold
};

struct IoUSweepTable {
  std::vector<double> thresholds;
  std::vector<IoUSweepRow> rows;
};

/// AP per class across IoU thresholds (default 0.5..0.8 step 0.05),
/// evaluated at the given difficulty.
IoUSweepTable iou_sweep(const std::vector<std::vector<DetectionRecord>>& dets_per_image,
                        const std::vector<std::vector<GroundTruth>>& gts_per_image,
                        const std::vector<std::string>& classes,
                        Difficulty difficulty = Difficulty::hard,
                        std::vector<double> thresholds = {});

std::string iou_sweep_text(const IoUSweepTable& t);

/// Per-class x per-difficulty AP grid plus the mean over all cells.
struct EvalReport {
  std::vector<std::string> classes;
  // ap[class][difficulty: easy, moderate, hard]
  std::vector<std::array<double, 3>> ap;
  double map = 0;
  double iou_threshold = 0.5;
};

using DetectorFn =
    std::function<std::vector<DetectionRecord>(const Tensor& image)>;  // [3,H,W] in [0,1]

/// Runs the detector over every image and scores the grid at IoU 0.5.
EvalReport evaluate_model(const DetectorFn& model, const std::vector<Tensor>& images,
                          const std::vector<std::vector<GroundTruth>>& labels,
                          const std::vector<std::string>& classes,
                          double iou_threshold = 0.5);

EvalReport evaluate_detections(const std::vector<std::vector<DetectionRecord>>& dets,
                               const std::vector<std::vector<GroundTruth>>& labels,
                               const std::vector<std::string>& classes,
                               double iou_threshold = 0.5);

std::string eval_report_text(const EvalReport& r);
std::string eval_report_records(const EvalReport& r);

}  // namespace mdcn
