#include "mdcn/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "mdcn/rng.hpp"

namespace mdcn {

namespace {

struct ShapeSpec {
  int label;  // 1 rect, 2 ellipse, 3 triangle
  double cx, cy, w, h;
  double color[3];
};

void draw_shape(Tensor& img, const ShapeSpec& s, Rng& noise) {
  const std::size_t S = img.dim(1);
  const double x1 = (s.cx - s.w / 2) * S, x2 = (s.cx + s.w / 2) * S;
  const double y1 = (s.cy - s.h / 2) * S, y2 = (s.cy + s.h / 2) * S;
  const int px1 = std::max(0, static_cast<int>(std::floor(x1)));
  const int px2 = std::min(static_cast<int>(S) - 1, static_cast<int>(std::ceil(x2)));
  const int py1 = std::max(0, static_cast<int>(std::floor(y1)));
  const int py2 = std::min(static_cast<int>(S) - 1, static_cast<int>(std::ceil(y2)));
  const double ax = (x2 - x1) / 2, ay = (y2 - y1) / 2;
  const double mx = (x1 + x2) / 2, my = (y1 + y2) / 2;
  for (int y = py1; y <= py2; ++y) {
    for (int x = px1; x <= px2; ++x) {
      const double fx = x + 0.5, fy = y + 0.5;
      bool inside = false;
      switch (s.label) {
        case 1:
          inside = fx >= x1 && fx <= x2 && fy >= y1 && fy <= y2;
          break;
        case 2: {
          const double dx = (fx - mx) / ax, dy = (fy - my) / ay;
          inside = dx * dx + dy * dy <= 1.0;
          break;
        }
        case 3: {
          // Apex at top center, base at the bottom edge.
          const double t = (fy - y1) / (y2 - y1);
          inside = t >= 0 && t <= 1 && std::fabs(fx - mx) <= t * ax;
          break;
        }
      }
      if (!inside) continue;
      const double jitter = 0.04 * (noise.uniform() - 0.5);
      for (std::size_t c = 0; c < 3; ++c) {
        img[(c * S + y) * S + x] = std::clamp(s.color[c] + jitter, 0.0, 1.0);
      }
    }
  }
}

}  // namespace

std::vector<SyntheticScene> make_synthetic_dataset(std::uint64_t seed,
                                                   std::size_t n_images, int size) {
  if (size < 75) throw ShapeError("make_synthetic_dataset: size must be >= 75");
  std::vector<SyntheticScene> scenes;
  scenes.reserve(n_images);
  Rng rng(seed);
  const std::size_t S = static_cast<std::size_t>(size);
  // Class base colors: reddish cars, greenish pedestrians, bluish cyclists.
  const double base_colors[3][3] = {{0.75, 0.2, 0.2}, {0.2, 0.7, 0.25}, {0.2, 0.3, 0.8}};
  std::size_t class_cursor = 0;  // cycled for class balance

  for (std::size_t i = 0; i < n_images; ++i) {
    SyntheticScene scene;
    scene.image = Tensor({3, S, S});
    // Smooth background gradient in a muted grey band.
    const double g0 = rng.uniform(0.35, 0.6);
    const double g1 = rng.uniform(0.35, 0.6);
    const double tint[3] = {rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                            rng.uniform(-0.05, 0.05)};
    for (std::size_t y = 0; y < S; ++y) {
      const double v = g0 + (g1 - g0) * static_cast<double>(y) / S;
      for (std::size_t x = 0; x < S; ++x) {
        for (std::size_t c = 0; c < 3; ++c) {
          scene.image[(c * S + y) * S + x] = std::clamp(v + tint[c], 0.0, 1.0);
        }
      }
    }

    const std::size_t n_obj = 1 + rng.uniform_int(4);
    const bool make_occluded_pair = rng.bernoulli(0.3) && n_obj >= 2;
    std::vector<ShapeSpec> shapes;
    for (std::size_t o = 0; o < n_obj; ++o) {
      ShapeSpec s;
      s.label = static_cast<int>(class_cursor % 3) + 1;
      ++class_cursor;
      const bool small = rng.bernoulli(0.12);
      double lo = small ? 0.06 : 0.14;
      double hi = small ? 0.095 : 0.45;
      s.w = rng.uniform(lo, hi);
      s.h = rng.uniform(lo, hi);
      if (s.label == 2) s.h = std::min(hi, s.h * 1.5);  // pedestrians run tall
      if (make_occluded_pair && o == 1) {
        // Overlap the previous shape by up to half its size.
        const ShapeSpec& prev = shapes.back();
        s.cx = std::clamp(prev.cx + rng.uniform(-0.5, 0.5) * prev.w, s.w / 2, 1 - s.w / 2);
        s.cy = std::clamp(prev.cy + rng.uniform(-0.5, 0.5) * prev.h, s.h / 2, 1 - s.h / 2);
      } else {
        s.cx = rng.uniform(s.w / 2, 1 - s.w / 2);
        s.cy = rng.uniform(s.h / 2, 1 - s.h / 2);
      }
      for (std::size_t c = 0; c < 3; ++c) {
        s.color[c] = std::clamp(
            base_colors[s.label - 1][c] + rng.uniform(-0.12, 0.12), 0.0, 1.0);
      }
      shapes.push_back(s);
    }
    for (const auto& s : shapes) {
      draw_shape(scene.image, s, rng);
      scene.boxes.push_back(GtBox{Box{s.cx, s.cy, s.w, s.h}, s.label});
    }
    // Mild sensor noise over the whole frame.
    for (auto& v : scene.image.values()) {
      v = std::clamp(v + 0.02 * (rng.uniform() - 0.5), 0.0, 1.0);
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

std::vector<GroundTruth> scene_ground_truth(const SyntheticScene& scene) {
  const double S = static_cast<double>(scene.image.dim(1));
  std::vector<GroundTruth> gts;
  for (const auto& b : scene.boxes) {
    GroundTruth gt;
    gt.cls = kSyntheticClasses[static_cast<std::size_t>(b.label - 1)];
    gt.x1 = b.box.xmin() * S;
    gt.y1 = b.box.ymin() * S;
    gt.x2 = b.box.xmax() * S;
    gt.y2 = b.box.ymax() * S;
    gt.difficulty = Difficulty::easy;
    gts.push_back(std::move(gt));
  }
  return gts;
}

SyntheticScene flip_horizontal(const SyntheticScene& scene) {
  SyntheticScene out;
  const std::size_t S = scene.image.dim(1);
  out.image = Tensor(scene.image.shape());
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < S; ++y) {
      for (std::size_t x = 0; x < S; ++x) {
        out.image[(c * S + y) * S + x] = scene.image[(c * S + y) * S + (S - 1 - x)];
      }
    }
  }
  out.boxes = scene.boxes;
  for (auto& b : out.boxes) b.box.cx = 1.0 - b.box.cx;
  return out;
}

}  // namespace mdcn
