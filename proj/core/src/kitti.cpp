#include "mdcn/kitti.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

#include "mdcn/errors.hpp"

namespace mdcn {

const char* difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "easy";
    case Difficulty::moderate: return "moderate";
    case Difficulty::hard: return "hard";
    case Difficulty::ignored: return "ignored";
  }
  return "?";
}

Difficulty classify_difficulty(double box_height, int occlusion, double truncation) {
  for (int level = 0; level < 3; ++level) {
    if (box_height >= kMinHeight[level] && occlusion <= kMaxOcclusion[level] &&
        truncation <= kMaxTruncation[level]) {
      return static_cast<Difficulty>(level);
    }
  }
  return Difficulty::ignored;
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

std::vector<GroundTruth> parse_kitti_labels(const std::string& text) {
  std::vector<GroundTruth> out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string type;
    double truncated, alpha, x1, y1, x2, y2;
    int occluded;
    if (!(ls >> type >> truncated >> occluded >> alpha >> x1 >> y1 >> x2 >> y2)) {
      throw ParseError("KITTI label line " + std::to_string(lineno) +
                       ": malformed (need type truncated occluded alpha bbox)");
    }
    // Remaining 3-d fields (dims, location, rotation) are present in real
    // labels but unused for 2-d evaluation; accept their absence.
    GroundTruth gt;
    gt.x1 = x1;
    gt.y1 = y1;
    gt.x2 = x2;
    gt.y2 = y2;
    gt.truncation = truncated;
    gt.occlusion = occluded;
    const std::string t = lower(type);
    if (t == "dontcare") {
      gt.cls = "";
      gt.difficulty = Difficulty::ignored;
    } else {
      if (t == "car" || t == "van") {
        gt.cls = "car";  // "car (merged with motors)" reading
      } else if (t == "pedestrian") {
        gt.cls = "pedestrian";
      } else if (t == "cyclist") {
        gt.cls = "cyclist";
      } else {
        // Truck, Tram, Misc, Person_sitting: kept as ignored regions so
        // detections overlapping them are not penalized.
        gt.cls = t;
        gt.difficulty = Difficulty::ignored;
        out.push_back(gt);
        continue;
      }
      gt.difficulty = classify_difficulty(gt.height(), gt.occlusion, gt.truncation);
    }
    out.push_back(gt);
  }
  return out;
}

std::string detections_to_text(const std::vector<DetectionRecord>& dets) {
  std::ostringstream os;
  char buf[200];
  for (const auto& d : dets) {
    std::snprintf(buf, sizeof(buf), "%s %.17g %.17g %.17g %.17g %.17g\n", d.cls.c_str(),
                  d.confidence, d.x1, d.y1, d.x2, d.y2);
    os << buf;
  }
  return os.str();
}

std::vector<DetectionRecord> detections_from_text(const std::string& text) {
  std::vector<DetectionRecord> out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    DetectionRecord d;
    if (!(ls >> d.cls >> d.confidence >> d.x1 >> d.y1 >> d.x2 >> d.y2)) {
      throw ParseError("detection line " + std::to_string(lineno) + ": malformed");
    }
    out.push_back(std::move(d));
  }
  return out;
}

double iou_pixels(double ax1, double ay1, double ax2, double ay2, double bx1, double by1,
                  double bx2, double by2) {
  const double ix = std::min(ax2, bx2) - std::max(ax1, bx1);
  const double iy = std::min(ay2, by2) - std::max(ay1, by1);
  if (ix <= 0 || iy <= 0) return 0.0;
  const double inter = ix * iy;
  const double a = (ax2 - ax1) * (ay2 - ay1);
  const double b = (bx2 - bx1) * (by2 - by1);
  return inter / (a + b - inter);
}

}  // namespace mdcn
