#pragma once

#include <string>

#include "mdcn/graph.hpp"

namespace mdcn {

enum class Variant { ssd300, mdcn_i1, mdcn_i2 };

Variant variant_from_name(const std::string& name);  // "ssd-300" | "mdcn-i1" | "mdcn-i2"
const char* variant_name(Variant v);

/// Widths of one wide-context inception unit. The unit is a 1x1 bottleneck,
/// a stride-2 3x3 entrance, then three filter families at ratio 1:1:1:
/// a 1x1 branch, a 3x3 branch, and a second 3x3 stacked on the first (the
/// 5x5-equivalent path). The 3x3 branch output is concatenated twice --
/// one weight set, two uses -- so the output is 4 * branch_channels.
struct InceptionUnitSpec {
  std::string prefix;
  int in_channels = 0;
  int bottleneck_channels = 0;  // the leading 1x1
  int entrance_channels = 0;    // the stride-2 3x3 at the unit entrance
  int branch_channels = 0;      // per-branch output width c; unit emits 4c
  int entrance_stride = 2;
  int entrance_pad = 1;
};

struct ModelConfig {
  Variant variant = Variant::mdcn_i2;
  int input_size = 300;
  int num_classes = 3;     // foreground classes (KITTI: car, pedestrian, cyclist)
  double width_mult = 1.0; // scales every channel count; toy runs use < 1
};

/// VGG-16 conv stack with fc6/fc7 realized as a dilated 3x3 and a 1x1
/// convolution. At input 300 the conv4_3 tap is 38x38 and fc7 is 19x19.
NetworkGraph build_backbone(int input_size, double width_mult = 1.0);

/// Appends the inception subgraph to g, rooted at input_id. Returns the id
/// of the unit's output (the concat layer).
std::string build_inception_unit(NetworkGraph& g, const InceptionUnitSpec& spec,
                                 const std::string& input_id);

/// Full detector graph for a variant: backbone, deep units, l2norm tap and
/// prediction heads. MDCN-I2 places inception units at the first three deep
/// units (Conv_6/7/8), MDCN-I1 at the first two, SSD-300 at none.
NetworkGraph assemble_model(const ModelConfig& cfg);

/// Boxes per cell for tap `tap_index` of `tap_count` taps with the given map
/// size: 4 on the first (38x38 at canonical size) and on 1x1 taps, 6 otherwise.
int boxes_per_cell(int tap_index, std::size_t map_size);

}  // namespace mdcn
