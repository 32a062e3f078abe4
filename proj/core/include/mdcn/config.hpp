#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdcn/builder.hpp"

namespace mdcn {

/// Run configuration, loaded from line-based key=value files. Unknown keys
/// are rejected; every value is validated against its owning module's
/// preconditions. dump() -> parse() -> dump() is a fixed point.
struct Config {
  std::string variant = "mdcn-i2";
  int input_size = 300;
  int num_classes = 3;
  double width_mult = 1.0;
  std::uint64_t seed = 1;

  // anchors
  double anchor_scale_min = 0.2;
  double anchor_scale_max = 0.9;
  double match_threshold = 0.5;

  // loss
  double neg_pos_ratio = 3.0;
  double loss_alpha = 1.0;

  // schedule / optimizer
  std::uint64_t total_iterations = 120000;
  std::vector<std::uint64_t> milestones;  // empty: scaled from {80k,100k}
  double lr_decay = 0.1;
  double base_lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  std::size_t batch_size = 8;
  bool augment_flip = true;
  bool augment_crop = false;
  std::uint64_t checkpoint_every = 0;

  // synthetic dataset
  std::size_t images = 500;
  double val_fraction = 0.2;

  // detection
  double confidence_floor = 0.01;
  double nms_threshold = 0.45;
  std::size_t top_k = 200;

  std::string out_dir = "out";

  void validate() const;
  ModelConfig model_config() const;
};

Config parse_config(const std::string& text);
Config load_config_file(const std::string& path);
std::string dump_config(const Config& cfg);

}  // namespace mdcn
