#pragma once

#include <map>
#include <string>
#include <vector>

#include "mdcn/errors.hpp"

namespace mdcn {

enum class LayerKind { conv, pool, relu, l2norm, concat, predict_tap };

const char* kind_name(LayerKind k);
LayerKind kind_from_name(const std::string& name);

enum class HeadRole { none, conf, loc };

/// One node of the network DAG.
///
/// conv / predict_tap use out_channels, ksize, stride, pad, dilation;
/// pool uses ksize (window), stride, pad; l2norm uses scale_init.
/// predict_tap layers are ordinary convolutions feeding the prediction
/// collector, annotated with their tap index, role and boxes-per-cell.
struct LayerSpec {
  std::string id;
  LayerKind kind = LayerKind::conv;
  std::vector<std::string> inputs;

  int out_channels = 0;
  int ksize = 0;
  int stride = 1;
  int pad = 0;
  int dilation = 1;
  double scale_init = 20.0;

  HeadRole role = HeadRole::none;
  int tap_index = -1;
  int boxes_per_cell = 0;
};

/// Directed acyclic graph of layers, stored in topological order. The
/// pseudo-layer "input" is the image and may be referenced by any layer.
struct NetworkGraph {
  std::string variant;  // "ssd-300" | "mdcn-i1" | "mdcn-i2"
  int input_size = 300;
  int input_channels = 3;
  int num_classes = 3;  // foreground classes; background is class index 0
  std::vector<LayerSpec> layers;
  std::vector<std::string> source_taps;  // tap source ids, shallow to deep

  const LayerSpec* find(const std::string& id) const;
  bool has_layer(const std::string& id) const { return find(id) != nullptr; }

  /// Unique ids, inputs defined before use (acyclicity), taps present,
  /// per-kind parameter sanity. Throws ShapeError on violation.
  void validate() const;
};

struct ShapeInfo {
  std::size_t c = 0, h = 0, w = 0;
};

/// Static per-layer output shapes for a square input of the given size.
/// Checks concat spatial agreement along the way.
std::map<std::string, ShapeInfo> infer_shapes(const NetworkGraph& g, int input_size);

// Line-oriented text format, one layer per line; diff-friendly.
std::string graph_to_text(const NetworkGraph& g);
NetworkGraph graph_from_text(const std::string& text);

}  // namespace mdcn
