#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "mdcn/graph.hpp"
#include "mdcn/kernels.hpp"
#include "mdcn/rng.hpp"

namespace mdcn {

/// Named parameter tensors: "<layer>.w", "<layer>.b", "<layer>.scale".
/// std::map keeps iteration order stable for optimizers and checkpoints.
struct ParamStore {
  std::map<std::string, Tensor> tensors;

  Tensor& at(const std::string& key) { return tensors.at(key); }
  const Tensor& at(const std::string& key) const { return tensors.at(key); }
  bool has(const std::string& key) const { return tensors.count(key) > 0; }
  std::size_t total_elements() const;
};

/// He fan-in initialization for conv weights, zero biases, scale_init for
/// l2norm scales. Draw order is fixed by graph order, so one seed pins the
/// whole initialization.
ParamStore init_params(const NetworkGraph& g, Rng& rng);

/// Forward activations plus the caches backward needs.
struct Activations {
  std::unordered_map<std::string, Tensor> out;
  std::unordered_map<std::string, std::vector<std::size_t>> pool_argmax;
  std::unordered_map<std::string, Tensor> l2_inv_norm;
};

Activations forward(const NetworkGraph& g, const ParamStore& params, const Tensor& input);

using GradMap = std::map<std::string, Tensor>;  // layer id -> dLoss/d(output)

struct BackwardResult {
  ParamStore grads;   // same keys as the parameter store
  Tensor input_grad;  // dLoss/d(input image)
};

/// Reverse sweep seeded with gradients flowing into named layer outputs.
/// Layers that no seed reaches contribute zero gradients.
BackwardResult backward(const NetworkGraph& g, const ParamStore& params,
                        const Tensor& input, const Activations& acts,
                        const GradMap& seed_grads);

/// Per-anchor predictions gathered from the head layers in anchor order
/// (tap, row, col, box): conf [A, classes+1], loc [A, 4]. Batch dim must be 1.
struct FlatPredictions {
  Tensor conf;
  Tensor loc;
};

FlatPredictions flatten_predictions(const NetworkGraph& g, const Activations& acts);

/// Adjoint of flatten_predictions: scatters per-anchor gradients back to
/// per-head-output gradient tensors keyed by head layer id.
GradMap unflatten_prediction_grads(const NetworkGraph& g, const Activations& acts,
                                   const Tensor& conf_grad, const Tensor& loc_grad);

}  // namespace mdcn
