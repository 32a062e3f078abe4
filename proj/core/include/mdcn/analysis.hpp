#pragma once

#include <map>
#include <string>
#include <vector>

#include "mdcn/graph.hpp"

namespace mdcn {

struct ParamCount {
  std::map<std::string, std::size_t> per_layer;
  std::size_t total = 0;
};

/// conv-like layers contribute kh*kw*in_ch*out_ch + out_ch, l2norm its scale
/// vector. Shared weights are shared structurally (one layer, referenced
/// twice), so per-layer counting never double counts.
ParamCount count_parameters(const NetworkGraph& g);

struct RFEntry {
  std::size_t rf = 1;                // receptive field side, in input pixels
  std::size_t effective_stride = 1;  // product of strides up to this layer
  double coverage = 0.0;             // min(1, rf / input_size)
};

struct RFReport {
  std::map<std::string, RFEntry> per_layer;
  int input_size = 0;
};

/// rf' = rf + (k-1) * dilation * stride_product; strides multiply along the
/// path; concat takes the max over branches.
RFReport receptive_field(const NetworkGraph& g);

struct LayerSummary {
  std::string id;
  std::string kind;
  std::size_t out_c = 0, out_h = 0, out_w = 0;
  std::size_t params = 0;
  std::size_t rf = 0;
  std::size_t effective_stride = 0;
  double coverage = 0.0;
};

struct ModelSummary {
  std::string variant;
  int input_size = 0;
  std::vector<LayerSummary> rows;  // graph order
  std::vector<std::string> taps;
  std::size_t total_params = 0;
};

ModelSummary summarize(const NetworkGraph& g, int input_size);

std::string summary_text(const ModelSummary& s);

/// Machine-readable record stream: one "key=value ..." line per layer plus
/// header/total records. Parses back losslessly.
std::string summary_records(const ModelSummary& s);
ModelSummary summary_from_records(const std::string& text);

bool operator==(const LayerSummary& a, const LayerSummary& b);
bool operator==(const ModelSummary& a, const ModelSummary& b);

}  // namespace mdcn
