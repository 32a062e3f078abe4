#include "mdcn/detector.hpp"

#include <algorithm>

#include "mdcn/image.hpp"
#include "mdcn/kernels.hpp"

namespace mdcn {

Detector::Detector(NetworkGraph graph, ParamStore params, AnchorSet anchors,
                   DetectorOptions options)
    : graph_(std::move(graph)),
      params_(std::move(params)),
      anchors_(std::move(anchors)),
      options_(std::move(options)) {
  if (options_.class_names.size() != static_cast<std::size_t>(graph_.num_classes)) {
    throw ShapeError("Detector: " + std::to_string(options_.class_names.size()) +
                     " class names for " + std::to_string(graph_.num_classes) +
                     " classes");
  }
}

std::vector<DetectionRecord> Detector::detect(const Tensor& image) const {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("Detector::detect: image must be [3,H,W]");
  }
  const double out_h = static_cast<double>(image.dim(1));
  const double out_w = static_cast<double>(image.dim(2));
  const std::size_t S = static_cast<std::size_t>(graph_.input_size);

  const Tensor resized = resize_bilinear(image, S, S);
  const Tensor std_img = standardize(resized);
  Tensor input({1, 3, S, S});
  std::copy(std_img.data(), std_img.data() + std_img.numel(), input.data());

  const Activations acts = forward(graph_, params_, input);
  const FlatPredictions fp = flatten_predictions(graph_, acts);
  const Tensor scores = softmax(fp.conf, 1);
  const std::size_t A = anchors_.size();
  const std::size_t n_cls = scores.dim(1);

  std::vector<DetectionRecord> all;
  for (std::size_t cls = 1; cls < n_cls; ++cls) {
    std::vector<DetectionRecord> cand;
    for (std::size_t a = 0; a < A; ++a) {
      const double score = scores.at2(a, cls);
      if (score <= options_.confidence_floor) continue;
      const Box box = decode_box({fp.loc.at2(a, 0), fp.loc.at2(a, 1), fp.loc.at2(a, 2),
                                  fp.loc.at2(a, 3)},
                                 anchors_.boxes[a]);
      const double x1 = std::clamp(box.xmin(), 0.0, 1.0);
      const double y1 = std::clamp(box.ymin(), 0.0, 1.0);
      const double x2 = std::clamp(box.xmax(), 0.0, 1.0);
      const double y2 = std::clamp(box.ymax(), 0.0, 1.0);
      if (x2 <= x1 || y2 <= y1) continue;
      DetectionRecord d;
      d.cls = options_.class_names[cls - 1];
      d.confidence = score;
      d.x1 = x1 * out_w;
      d.y1 = y1 * out_h;
      d.x2 = x2 * out_w;
      d.y2 = y2 * out_h;
      cand.push_back(std::move(d));
    }
    auto kept = nms(std::move(cand), options_.nms_threshold);
    all.insert(all.end(), kept.begin(), kept.end());
  }

  std::stable_sort(all.begin(), all.end(), [](const DetectionRecord& a,
                                              const DetectionRecord& b) {
    return a.confidence > b.confidence;
  });
  if (all.size() > options_.top_k) all.resize(options_.top_k);
  return all;
}

}  // namespace mdcn
