#pragma once

#include <string>
#include <vector>

namespace mdcn {

enum class Difficulty { easy = 0, moderate = 1, hard = 2, ignored = 3 };

const char* difficulty_name(Difficulty d);

// Official KITTI evaluability thresholds per level:
// min box height (px), max occlusion level, max truncation.
inline constexpr double kMinHeight[3] = {40.0, 25.0, 25.0};
inline constexpr int kMaxOcclusion[3] = {0, 1, 2};
inline constexpr double kMaxTruncation[3] = {0.15, 0.30, 0.50};

/// Easiest level the object qualifies for, or ignored when it fails all.
Difficulty classify_difficulty(double box_height, int occlusion, double truncation);

/// Labeled object in pixel coordinates.
struct GroundTruth {
  std::string cls;  // canonical lower-case class name, "" for DontCare
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  double truncation = 0;
  int occlusion = 0;
  Difficulty difficulty = Difficulty::ignored;

  bool ignored() const { return difficulty == Difficulty::ignored; }
  double height() const { return y2 - y1; }
};

/// Parses KITTI label lines (type truncated occluded alpha bbox4 dims3 loc3 ry).
/// DontCare regions come back ignored with an empty class; Van merges into
/// car; Truck/Tram/Misc/Person_sitting are kept as ignored regions.
std::vector<GroundTruth> parse_kitti_labels(const std::string& text);

/// Scored detection in pixel coordinates.
struct DetectionRecord {
  std::string cls;
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  double confidence = 0;
};

/// Detection output format: "class confidence xmin ymin xmax ymax" per line.
std::string detections_to_text(const std::vector<DetectionRecord>& dets);
std::vector<DetectionRecord> detections_from_text(const std::string& text);

double iou_pixels(double ax1, double ay1, double ax2, double ay2, double bx1, double by1,
                  double bx2, double by2);

}  // namespace mdcn
