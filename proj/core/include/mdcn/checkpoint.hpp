#pragma once

#include <cstdint>
#include <string>

#include "mdcn/executor.hpp"
#include "mdcn/graph.hpp"

namespace mdcn {

struct OptimizerState {
  ParamStore velocity;  // mirrors parameter shapes
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double base_lr = 0.001;
  std::uint64_t iteration = 0;
};

// Checkpoint directory layout:
//   graph.txt           network graph
//   manifest.txt        iteration + optimizer hyperparameters + tensor list
//   params/<key>.mdt    one MDT1 file per parameter
//   velocity/<key>.mdt  optimizer velocity per parameter
struct Checkpoint {
  NetworkGraph graph;
  ParamStore params;
  OptimizerState opt;
};

void save_checkpoint(const std::string& dir, const NetworkGraph& g,
                     const ParamStore& params, const OptimizerState& opt);
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace mdcn
