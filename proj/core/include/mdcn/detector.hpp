#pragma once

#include <string>
#include <vector>

#include "mdcn/eval.hpp"
#include "mdcn/executor.hpp"
#include "mdcn/multibox.hpp"

namespace mdcn {

struct DetectorOptions {
  double confidence_floor = 0.01;
  double nms_threshold = 0.45;
  std::size_t top_k = 200;
  std::vector<std::string> class_names = {"car", "pedestrian", "cyclist"};
};

/// Single-shot inference: forward, per-anchor softmax, offset decoding,
/// per-class NMS, global top-k. Detections come back in the coordinate frame
/// of the given image (its pixel size), whatever the network input size.
class Detector {
public:
  Detector(NetworkGraph graph, ParamStore params, AnchorSet anchors,
           DetectorOptions options = {});

  std::vector<DetectionRecord> detect(const Tensor& image) const;  // [3,H,W] in [0,1]

  const NetworkGraph& graph() const { return graph_; }
  const AnchorSet& anchors() const { return anchors_; }

private:
  NetworkGraph graph_;
  ParamStore params_;
  AnchorSet anchors_;
  DetectorOptions options_;
};

}  // namespace mdcn
