#include "mdcn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mdcn/image.hpp"
#include "mdcn/parallel.hpp"

namespace mdcn {

Schedule Schedule::scaled_to(std::uint64_t toy_total) {
  Schedule s;
  s.total_iterations = toy_total;
  for (auto& m : s.milestones) {
    m = static_cast<std::uint64_t>(
        std::llround(static_cast<double>(m) * static_cast<double>(toy_total) / 120000.0));
  }
  s.milestones.erase(std::remove(s.milestones.begin(), s.milestones.end(), 0ULL),
                     s.milestones.end());
  return s;
}

void Schedule::validate() const {
  std::uint64_t prev = 0;
  for (std::uint64_t m : milestones) {
    if (m <= prev || m >= total_iterations) {
      throw ShapeError("Schedule: milestones must be strictly increasing and below total");
    }
    prev = m;
  }
}

double schedule_lr(const Schedule& s, double base_lr, std::uint64_t iteration) {
  double lr = base_lr;
  for (std::uint64_t m : s.milestones) {
    if (iteration >= m) lr *= s.decay;
  }
  return lr;
}

void sgd_step(ParamStore& params, const ParamStore& grads, OptimizerState& state,
              double lr) {
  for (auto& [key, p] : params.tensors) {
    const Tensor& g = grads.at(key);
    if (!g.same_shape(p)) {
      throw ShapeError("sgd_step: gradient shape " + shape_str(g.shape()) +
                       " != parameter shape " + shape_str(p.shape()) + " for " + key);
    }
    auto vit = state.velocity.tensors.find(key);
    if (vit == state.velocity.tensors.end()) {
      vit = state.velocity.tensors.emplace(key, Tensor(p.shape())).first;
    }
    Tensor& v = vit->second;
    const double mu = state.momentum, wd = state.weight_decay;
    for (std::size_t i = 0; i < p.numel(); ++i) {
      v[i] = mu * v[i] - lr * (g[i] + wd * p[i]);
      p[i] += v[i];
    }
  }
  ++state.iteration;
}

GradCheckReport grad_check(const LossFn& loss, const ParamStore& params,
                           const ParamStore& analytic_grads, Rng& rng,
                           std::size_t samples, double tolerance, double step) {
  GradCheckReport report;
  std::vector<std::string> keys;
  for (const auto& [key, _] : params.tensors) keys.push_back(key);
  if (keys.empty()) throw ShapeError("grad_check: empty parameter store");

  ParamStore work = params;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::string& key = keys[rng.uniform_int(keys.size())];
    Tensor& t = work.tensors.at(key);
    const std::size_t idx = rng.uniform_int(t.numel());
    const double saved = t[idx];
    t[idx] = saved + step;
    const double up = loss(work);
    t[idx] = saved - step;
    const double down = loss(work);
    t[idx] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("grad_check: non-finite loss at " + key);
    }
    const double numeric = (up - down) / (2 * step);
    const double analytic = analytic_grads.at(key)[idx];
    const double rel = std::fabs(analytic - numeric) /
                       std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst = GradCheckEntry{key, idx, analytic, numeric, rel};
    }
    ++report.checked;
  }
  report.pass = report.max_rel_error < tolerance;
  return report;
}

std::string trace_to_text(const std::vector<TraceRow>& trace) {
  std::ostringstream os;
  char buf[256];
  for (const auto& row : trace) {
    std::snprintf(buf, sizeof(buf), "iter %llu lr %.17g L %.17g L_conf %.17g L_loc %.17g N %zu\n",
                  static_cast<unsigned long long>(row.iteration), row.lr, row.loss,
                  row.conf, row.loc, row.matched);
    os << buf;
  }
  return os.str();
}

namespace {

struct SampleGrads {
  ParamStore grads;
  LossReport report;
};

SampleGrads image_pass(const NetworkGraph& g, const ParamStore& params,
                       const SyntheticScene& scene, const AnchorSet& anchors,
                       const TrainOptions& opts) {
  const std::size_t S = scene.image.dim(1);
  Tensor input({1, 3, S, S});
  const Tensor std_img = standardize(scene.image);
  std::copy(std_img.data(), std_img.data() + std_img.numel(), input.data());

  Activations acts = forward(g, params, input);
  FlatPredictions fp = flatten_predictions(g, acts);
  MatchAssignment assignment = match(scene.boxes, anchors, opts.match_threshold);
  MultiboxLossResult loss = multibox_loss(fp.conf, fp.loc, assignment, scene.boxes,
                                          anchors, opts.neg_pos_ratio, opts.loss_alpha);
  GradMap seeds = unflatten_prediction_grads(g, acts, loss.conf_grad, loss.loc_grad);
  BackwardResult back = backward(g, params, input, acts, seeds);
  return SampleGrads{std::move(back.grads), loss.report};
}

}  // namespace

TrainResult train(const NetworkGraph& g, ParamStore params,
                  const std::vector<SyntheticScene>& dataset, const AnchorSet& anchors,
                  const TrainOptions& options, OptimizerState opt) {
  if (dataset.empty()) throw ShapeError("train: dataset is empty");
  options.schedule.validate();

  TrainResult result;
  Rng order_rng(options.seed);
  Rng aug_rng(options.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();  // force an initial shuffle

  const std::size_t B = std::max<std::size_t>(1, options.batch_size);
  for (std::uint64_t it = opt.iteration; it < options.schedule.total_iterations; ++it) {
    const double lr = schedule_lr(options.schedule, opt.base_lr, it);

    // Assemble the batch: epoch-shuffled order, flip augmentation by coin.
    std::vector<SyntheticScene> batch;
    batch.reserve(B);
    for (std::size_t b = 0; b < B; ++b) {
      if (cursor >= order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[order_rng.uniform_int(i)]);
        }
        cursor = 0;
      }
      const SyntheticScene& s = dataset[order[cursor++]];
      if (options.augment_flip && aug_rng.bernoulli(0.5)) {
        batch.push_back(flip_horizontal(s));
      } else {
        batch.push_back(s);
      }
    }

    // Per-image passes are independent; the reduction below runs in batch
    // order, so worker count never changes the result.
    std::vector<SampleGrads> per_image(B);
    parallel_for(B, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t b = lo; b < hi; ++b) {
        per_image[b] = image_pass(g, params, batch[b], anchors, options);
      }
    });

    ParamStore batch_grads;
    LossReport batch_report;
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t b = 0; b < B; ++b) {
      batch_report.total += per_image[b].report.total * inv_b;
      batch_report.conf += per_image[b].report.conf * inv_b;
      batch_report.loc += per_image[b].report.loc * inv_b;
      batch_report.num_matched += per_image[b].report.num_matched;
      for (auto& [key, t] : per_image[b].grads.tensors) {
        auto it2 = batch_grads.tensors.find(key);
        if (it2 == batch_grads.tensors.end()) {
          Tensor scaled(t.shape());
          for (std::size_t i = 0; i < t.numel(); ++i) scaled[i] = t[i] * inv_b;
          batch_grads.tensors.emplace(key, std::move(scaled));
        } else {
          Tensor& dst = it2->second;
          for (std::size_t i = 0; i < t.numel(); ++i) dst[i] += t[i] * inv_b;
        }
      }
    }

    if (!std::isfinite(batch_report.total)) {
      throw NumericError("train: loss diverged (non-finite) at iteration " +
                         std::to_string(it));
    }

    sgd_step(params, batch_grads, opt, lr);
    result.trace.push_back(TraceRow{it, lr, batch_report.total, batch_report.conf,
                                    batch_report.loc, batch_report.num_matched});

    if (!options.out_dir.empty() && options.checkpoint_every > 0 &&
        (it + 1) % options.checkpoint_every == 0 &&
        (it + 1) < options.schedule.total_iterations) {
      save_checkpoint(options.out_dir + "/iter_" + std::to_string(it + 1), g, params, opt);
    }
  }

  if (!options.out_dir.empty()) {
    save_checkpoint(options.out_dir + "/final", g, params, opt);
    std::ofstream tf(std::filesystem::path(options.out_dir) / "trace.txt");
    if (!tf) throw IoError("train: cannot write trace.txt");
    tf << trace_to_text(result.trace);
  }
  result.params = std::move(params);
  result.opt = std::move(opt);
  return result;
}

}  // namespace mdcn
