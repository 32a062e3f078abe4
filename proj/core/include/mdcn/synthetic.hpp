#pragma once

#include <cstdint>
#include <vector>

#include "mdcn/kitti.hpp"
#include "mdcn/multibox.hpp"
#include "mdcn/tensor.hpp"

namespace mdcn {

// Synthetic 3-class scenes: rectangles, ellipses and triangles standing in
// for cars, pedestrians and cyclists. Scenes include small (< 10% of the
// image) and partially occluded shapes.

inline const std::vector<std::string> kSyntheticClasses = {"car", "pedestrian",
                                                           "cyclist"};

struct SyntheticScene {
  Tensor image;               // [3,S,S] in [0,1]
  std::vector<GtBox> boxes;   // normalized boxes, labels 1..3
};

/// Deterministic in (seed, n_images, size); every box lies inside the image.
std::vector<SyntheticScene> make_synthetic_dataset(std::uint64_t seed,
                                                   std::size_t n_images, int size);

/// Scene ground truth in pixel coordinates for the evaluation harness.
/// Synthetic objects carry no occlusion/truncation attributes, so every box
/// is evaluable at level easy.
std::vector<GroundTruth> scene_ground_truth(const SyntheticScene& scene);

/// Mirror image and boxes left-right.
SyntheticScene flip_horizontal(const SyntheticScene& scene);

}  // namespace mdcn
