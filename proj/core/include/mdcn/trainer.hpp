#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mdcn/checkpoint.hpp"
#include "mdcn/executor.hpp"
#include "mdcn/multibox.hpp"
#include "mdcn/synthetic.hpp"

namespace mdcn {

/// Learning-rate schedule: the rate is multiplied by `decay` at each
/// milestone. Defaults follow the full-scale recipe (x0.1 at 80k and 100k of
/// 120k iterations); scaled_to shrinks the milestones proportionally for toy
/// budgets.
struct Schedule {
  std::vector<std::uint64_t> milestones{80000, 100000};
  double decay = 0.1;
  std::uint64_t total_iterations = 120000;

  static Schedule scaled_to(std::uint64_t toy_total);
  void validate() const;
};

double schedule_lr(const Schedule& s, double base_lr, std::uint64_t iteration);

/// v <- momentum * v - lr * (g + weight_decay * p); p <- p + v.
void sgd_step(ParamStore& params, const ParamStore& grads, OptimizerState& state,
              double lr);

struct GradCheckEntry {
  std::string key;
  std::size_t index;
  double analytic;
  double numeric;
  double rel_error;
};

struct GradCheckReport {
  double max_rel_error = 0;
  std::size_t checked = 0;
  bool pass = false;
  GradCheckEntry worst;
};

using LossFn = std::function<double(const ParamStore&)>;

/// Compares analytic gradients against central finite differences on a
/// random sample of parameter coordinates (step 1e-5 by default).
GradCheckReport grad_check(const LossFn& loss, const ParamStore& params,
                           const ParamStore& analytic_grads, Rng& rng,
                           std::size_t samples, double tolerance, double step = 1e-5);

struct TraceRow {
  std::uint64_t iteration;
  double lr;
  double loss;
  double conf;
  double loc;
  std::size_t matched;
};

std::string trace_to_text(const std::vector<TraceRow>& trace);

struct TrainOptions {
  std::size_t batch_size = 8;
  Schedule schedule;
  double neg_pos_ratio = 3.0;
  double loss_alpha = 1.0;
  double match_threshold = 0.5;
  bool augment_flip = true;
  bool augment_crop = false;
  std::uint64_t seed = 1;
  std::string out_dir;                 // empty: no checkpoints written
  std::uint64_t checkpoint_every = 0;  // 0: only final
};

struct TrainResult {
  std::vector<TraceRow> trace;
  ParamStore params;
  OptimizerState opt;
};

/// SGD fine-tuning loop over synthetic scenes. Aborts with NumericError when
/// the loss turns non-finite. Deterministic in (params, dataset, options).
TrainResult train(const NetworkGraph& g, ParamStore params,
                  const std::vector<SyntheticScene>& dataset, const AnchorSet& anchors,
                  const TrainOptions& options, OptimizerState opt);

}  // namespace mdcn
