#include "mdcn/builder.hpp"

#include <algorithm>
#include <cmath>

namespace mdcn {

Variant variant_from_name(const std::string& name) {
  if (name == "ssd-300") return Variant::ssd300;
  if (name == "mdcn-i1") return Variant::mdcn_i1;
  if (name == "mdcn-i2") return Variant::mdcn_i2;
  throw ParseError("unknown variant '" + name + "' (want ssd-300, mdcn-i1 or mdcn-i2)");
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::ssd300: return "ssd-300";
    case Variant::mdcn_i1: return "mdcn-i1";
    case Variant::mdcn_i2: return "mdcn-i2";
  }
  return "?";
}

namespace {

int scaled(int channels, double mult) {
  if (mult == 1.0) return channels;
  const int c = static_cast<int>(std::lround(channels * mult));
  return std::max(4, c);
}

LayerSpec conv_spec(const std::string& id, const std::string& input, int out, int k,
                    int stride = 1, int pad = 0, int dilation = 1) {
  LayerSpec l;
  l.id = id;
  l.kind = LayerKind::conv;
  l.inputs = {input};
  l.out_channels = out;
  l.ksize = k;
  l.stride = stride;
  l.pad = pad;
  l.dilation = dilation;
  return l;
}

LayerSpec relu_spec(const std::string& id, const std::string& input) {
  LayerSpec l;
  l.id = id;
  l.kind = LayerKind::relu;
  l.inputs = {input};
  return l;
}

LayerSpec pool_spec(const std::string& id, const std::string& input, int window,
                    int stride, int pad = 0) {
  LayerSpec l;
  l.id = id;
  l.kind = LayerKind::pool;
  l.inputs = {input};
  l.ksize = window;
  l.stride = stride;
  l.pad = pad;
  return l;
}

// Appends conv+relu, returns the relu id.
std::string conv_relu(NetworkGraph& g, const std::string& id, const std::string& input,
                      int out, int k, int stride = 1, int pad = 0, int dilation = 1) {
  g.layers.push_back(conv_spec(id, input, out, k, stride, pad, dilation));
  g.layers.push_back(relu_spec(id + "_relu", id));
  return id + "_relu";
}

}  // namespace

NetworkGraph build_backbone(int input_size, double width_mult) {
  if (input_size < 64) {
    throw ShapeError("build_backbone: input size " + std::to_string(input_size) +
                     " too small to reach a 1x1 top map");
  }
  NetworkGraph g;
  g.input_size = input_size;
  const int c64 = scaled(64, width_mult);
  const int c128 = scaled(128, width_mult);
  const int c256 = scaled(256, width_mult);
  const int c512 = scaled(512, width_mult);
  const int c1024 = scaled(1024, width_mult);

  std::string x = "input";
  x = conv_relu(g, "conv1_1", x, c64, 3, 1, 1);
  x = conv_relu(g, "conv1_2", x, c64, 3, 1, 1);
  g.layers.push_back(pool_spec("pool1", x, 2, 2));
  x = conv_relu(g, "conv2_1", "pool1", c128, 3, 1, 1);
  x = conv_relu(g, "conv2_2", x, c128, 3, 1, 1);
  g.layers.push_back(pool_spec("pool2", x, 2, 2));
  x = conv_relu(g, "conv3_1", "pool2", c256, 3, 1, 1);
  x = conv_relu(g, "conv3_2", x, c256, 3, 1, 1);
  x = conv_relu(g, "conv3_3", x, c256, 3, 1, 1);
  g.layers.push_back(pool_spec("pool3", x, 2, 2));
  x = conv_relu(g, "conv4_1", "pool3", c512, 3, 1, 1);
  x = conv_relu(g, "conv4_2", x, c512, 3, 1, 1);
  x = conv_relu(g, "conv4_3", x, c512, 3, 1, 1);
  g.layers.push_back(pool_spec("pool4", x, 2, 2));
  x = conv_relu(g, "conv5_1", "pool4", c512, 3, 1, 1);
  x = conv_relu(g, "conv5_2", x, c512, 3, 1, 1);
  x = conv_relu(g, "conv5_3", x, c512, 3, 1, 1);
  // SSD keeps spatial size here: 3x3 stride-1 pool, then dilated fc6.
  g.layers.push_back(pool_spec("pool5", x, 3, 1, 1));
  x = conv_relu(g, "fc6", "pool5", c1024, 3, 1, 6, 6);
  x = conv_relu(g, "fc7", x, c1024, 1, 1, 0, 1);
  g.validate();
  return g;
}

std::string build_inception_unit(NetworkGraph& g, const InceptionUnitSpec& spec,
                                 const std::string& input_id) {
  if (spec.bottleneck_channels < 1 || spec.branch_channels < 1 ||
      spec.entrance_channels < 1) {
    throw ShapeError("build_inception_unit: channel widths must be positive");
  }
  const std::string& p = spec.prefix;
  std::string x = conv_relu(g, p + "_bneck", input_id, spec.bottleneck_channels, 1);
  x = conv_relu(g, p + "_down", x, spec.entrance_channels, 3, spec.entrance_stride,
                spec.entrance_pad);
  const std::string b1 = conv_relu(g, p + "_br1", x, spec.branch_channels, 1);
  const std::string b3 = conv_relu(g, p + "_br3", x, spec.branch_channels, 3, 1, 1);
  const std::string b3b = conv_relu(g, p + "_br3b", b3, spec.branch_channels, 3, 1, 1);
  LayerSpec cat;
  cat.id = p + "_cat";
  cat.kind = LayerKind::concat;
  // The 3x3 branch output is listed twice: one weight set, two uses.
  cat.inputs = {b1, b3, b3, b3b};
  g.layers.push_back(std::move(cat));
  return p + "_cat";
}

int boxes_per_cell(int tap_index, std::size_t map_size) {
  if (tap_index == 0 || map_size == 1) return 4;
  return 6;
}

NetworkGraph assemble_model(const ModelConfig& cfg) {
  NetworkGraph g = build_backbone(cfg.input_size, cfg.width_mult);
  g.variant = variant_name(cfg.variant);
  g.num_classes = cfg.num_classes;

  // conv4_3 feeds the head through a learned-scale L2 normalization.
  LayerSpec norm;
  norm.id = "conv4_3_norm";
  norm.kind = LayerKind::l2norm;
  norm.inputs = {"conv4_3_relu"};
  norm.scale_init = 20.0;
  g.layers.push_back(std::move(norm));

  std::vector<std::string> taps = {"conv4_3_norm", "fc7_relu"};

  const int n_inception = (cfg.variant == Variant::mdcn_i2)   ? 3
                          : (cfg.variant == Variant::mdcn_i1) ? 2
                                                              : 0;

  // Inception unit widths, first unit wider; calibrated against the
  // parameter budgets of the full-size models. Plain units follow the
  // SSD extra-layer pattern (1x1 then 3x3 at twice the width).
  const int inc_widths[3] = {scaled(256, cfg.width_mult), scaled(128, cfg.width_mult),
                             scaled(128, cfg.width_mult)};
  const int plain_first = scaled(256, cfg.width_mult);
  const int plain_rest = scaled(128, cfg.width_mult);

  // Track map size to pick strides; units are appended until the map hits 1x1.
  auto shapes = infer_shapes(g, cfg.input_size);
  std::size_t map = shapes.at("fc7_relu").h;
  std::size_t in_ch = shapes.at("fc7_relu").c;
  std::string x = "fc7_relu";
  int unit = 0;
  while (map > 1) {
    const std::string prefix = "conv" + std::to_string(6 + unit);
    int stride = 2, pad = 1;
    std::size_t next_map;
    if (map == 3) {
      stride = 1;
      pad = 0;
      next_map = 1;
    } else if (map == 2) {
      next_map = 1;
    } else {
      next_map = (map - 1) / 2 + 1;
    }
    if (unit < n_inception) {
      const int w = inc_widths[std::min(unit, 2)];
      InceptionUnitSpec spec;
      spec.prefix = prefix;
      spec.in_channels = static_cast<int>(in_ch);
      spec.bottleneck_channels = w;
      spec.entrance_channels = w;
      spec.branch_channels = w;
      spec.entrance_stride = stride;
      spec.entrance_pad = pad;
      x = build_inception_unit(g, spec, x);
      in_ch = static_cast<std::size_t>(4 * w);
    } else {
      const int narrow = (unit == 0) ? plain_first : plain_rest;
      std::string y = conv_relu(g, prefix + "_1", x, narrow, 1);
      x = conv_relu(g, prefix + "_2", y, 2 * narrow, 3, stride, pad);
      in_ch = static_cast<std::size_t>(2 * narrow);
    }
    taps.push_back(x);
    map = next_map;
    ++unit;
    if (unit > 8) {
      throw ShapeError("assemble_model: deep unit chain failed to terminate");
    }
  }

  g.source_taps = taps;

  // Prediction heads: for k boxes per cell, a conf head with k*(classes+1)
  // filters (background is class 0) and a loc head with 4k filters, both 3x3.
  shapes = infer_shapes(g, cfg.input_size);
  for (std::size_t t = 0; t < taps.size(); ++t) {
    const std::size_t map_size = shapes.at(taps[t]).h;
    const int k = boxes_per_cell(static_cast<int>(t), map_size);
    LayerSpec conf = conv_spec("head" + std::to_string(t) + "_conf", taps[t],
                               k * (cfg.num_classes + 1), 3, 1, 1);
    conf.kind = LayerKind::predict_tap;
    conf.role = HeadRole::conf;
    conf.tap_index = static_cast<int>(t);
    conf.boxes_per_cell = k;
    g.layers.push_back(std::move(conf));
    LayerSpec loc = conv_spec("head" + std::to_string(t) + "_loc", taps[t], 4 * k, 3, 1, 1);
    loc.kind = LayerKind::predict_tap;
    loc.role = HeadRole::loc;
    loc.tap_index = static_cast<int>(t);
    loc.boxes_per_cell = k;
    g.layers.push_back(std::move(loc));
  }

  g.validate();
  infer_shapes(g, cfg.input_size);  // surface collapses early
  return g;
}

}  // namespace mdcn
