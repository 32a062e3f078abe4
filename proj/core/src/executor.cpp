#include "mdcn/executor.hpp"

#include <algorithm>
#include <cmath>

namespace mdcn {

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors) n += t.numel();
  return n;
}

namespace {

ConvParams conv_params_for(const LayerSpec& l, const ParamStore& params) {
  ConvParams p;
  p.weights = params.at(l.id + ".w");
  p.bias = params.at(l.id + ".b");
  p.stride = l.stride;
  p.padding = l.pad;
  p.dilation = l.dilation;
  return p;
}

}  // namespace

ParamStore init_params(const NetworkGraph& g, Rng& rng) {
  ParamStore ps;
  std::map<std::string, std::size_t> channels;
  channels["input"] = static_cast<std::size_t>(g.input_channels);
  for (const auto& l : g.layers) {
    const std::size_t in_c = channels.at(l.inputs.front());
    std::size_t out_c = in_c;
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::predict_tap: {
        out_c = static_cast<std::size_t>(l.out_channels);
        const std::size_t k = static_cast<std::size_t>(l.ksize);
        Tensor w({out_c, in_c, k, k});
        const double stddev = std::sqrt(2.0 / static_cast<double>(in_c * k * k));
        for (auto& v : w.values()) v = stddev * rng.normal();
        ps.tensors[l.id + ".w"] = std::move(w);
        ps.tensors[l.id + ".b"] = Tensor({out_c});
        break;
      }
      case LayerKind::l2norm:
        ps.tensors[l.id + ".scale"] = Tensor::full({in_c}, l.scale_init);
        break;
      case LayerKind::concat: {
        out_c = 0;
        for (const auto& src : l.inputs) out_c += channels.at(src);
        break;
      }
      case LayerKind::pool:
      case LayerKind::relu:
        break;
    }
    channels[l.id] = out_c;
  }
  return ps;
}

Activations forward(const NetworkGraph& g, const ParamStore& params, const Tensor& input) {
  if (input.rank() != 4) {
    throw ShapeError("forward: input must be [N,C,H,W], got " + shape_str(input.shape()));
  }
  Activations acts;
  acts.out.reserve(g.layers.size() + 1);
  acts.out.emplace("input", input);
  for (const auto& l : g.layers) {
    const Tensor& in = acts.out.at(l.inputs.front());
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::predict_tap:
        acts.out[l.id] = conv2d_forward(in, conv_params_for(l, params));
        break;
      case LayerKind::pool: {
        PoolResult r = maxpool2d(in, l.ksize, l.stride, l.pad);
        acts.pool_argmax[l.id] = std::move(r.argmax);
        acts.out[l.id] = std::move(r.output);
        break;
      }
      case LayerKind::relu:
        acts.out[l.id] = relu(in);
        break;
      case LayerKind::l2norm: {
        L2NormResult r = l2_normalize_scale(in, params.at(l.id + ".scale"));
        acts.l2_inv_norm[l.id] = std::move(r.inv_norm);
        acts.out[l.id] = std::move(r.output);
        break;
      }
      case LayerKind::concat: {
        const std::size_t N = in.dim(0), H = in.dim(2), W = in.dim(3);
        std::size_t C = 0;
        for (const auto& src : l.inputs) C += acts.out.at(src).dim(1);
        Tensor out({N, C, H, W});
        std::size_t c_off = 0;
        for (const auto& src : l.inputs) {
          const Tensor& s = acts.out.at(src);
          if (s.dim(2) != H || s.dim(3) != W) {
            throw ShapeError("concat '" + l.id + "': input '" + src +
                             "' spatial dims disagree");
          }
          const std::size_t sc = s.dim(1);
          for (std::size_t n = 0; n < N; ++n) {
            std::copy(s.data() + n * sc * H * W, s.data() + (n + 1) * sc * H * W,
                      out.data() + (n * C + c_off) * H * W);
          }
          c_off += sc;
        }
        acts.out[l.id] = std::move(out);
        break;
      }
    }
  }
  return acts;
}

BackwardResult backward(const NetworkGraph& g, const ParamStore& params,
                        const Tensor& input, const Activations& acts,
                        const GradMap& seed_grads) {
  std::unordered_map<std::string, Tensor> grad;  // accumulated dL/d(output)
  for (const auto& [id, t] : seed_grads) {
    const Tensor& out = (id == "input") ? input : acts.out.at(id);
    require_shape(t, out.shape(), "backward: seed grad for '" + id + "'");
    auto it = grad.find(id);
    if (it == grad.end()) {
      grad.emplace(id, t);
    } else {
      for (std::size_t i = 0; i < t.numel(); ++i) it->second[i] += t[i];
    }
  }

  BackwardResult result;
  auto accumulate = [&grad](const std::string& id, Tensor&& t) {
    auto it = grad.find(id);
    if (it == grad.end()) {
      grad.emplace(id, std::move(t));
    } else {
      Tensor& dst = it->second;
      for (std::size_t i = 0; i < t.numel(); ++i) dst[i] += t[i];
    }
  };

  for (auto it = g.layers.rbegin(); it != g.layers.rend(); ++it) {
    const LayerSpec& l = *it;
    auto git = grad.find(l.id);
    if (git == grad.end()) {
      // No consumer needed this layer; parameters still get zero grads so
      // the optimizer sees a full store.
      if (l.kind == LayerKind::conv || l.kind == LayerKind::predict_tap) {
        result.grads.tensors[l.id + ".w"] = Tensor(params.at(l.id + ".w").shape());
        result.grads.tensors[l.id + ".b"] = Tensor(params.at(l.id + ".b").shape());
      } else if (l.kind == LayerKind::l2norm) {
        result.grads.tensors[l.id + ".scale"] = Tensor(params.at(l.id + ".scale").shape());
      }
      continue;
    }
    const Tensor go = std::move(git->second);
    grad.erase(git);
    const Tensor& in = acts.out.at(l.inputs.front());
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::predict_tap: {
        Conv2dGrads cg = conv2d_backward(in, conv_params_for(l, params), go);
        result.grads.tensors[l.id + ".w"] = std::move(cg.weights);
        result.grads.tensors[l.id + ".b"] = std::move(cg.bias);
        accumulate(l.inputs.front(), std::move(cg.input));
        break;
      }
      case LayerKind::pool: {
        PoolResult fake{Tensor(acts.out.at(l.id).shape()), acts.pool_argmax.at(l.id)};
        accumulate(l.inputs.front(), maxpool2d_backward(in, fake, go));
        break;
      }
      case LayerKind::relu:
        accumulate(l.inputs.front(), relu_backward(in, go));
        break;
      case LayerKind::l2norm: {
        L2NormResult fwd{Tensor(), acts.l2_inv_norm.at(l.id)};
        L2NormGrads lg =
            l2_normalize_scale_backward(in, params.at(l.id + ".scale"), fwd, go);
        result.grads.tensors[l.id + ".scale"] = std::move(lg.scale);
        accumulate(l.inputs.front(), std::move(lg.input));
        break;
      }
      case LayerKind::concat: {
        const std::size_t N = go.dim(0), C = go.dim(1), H = go.dim(2), W = go.dim(3);
        std::size_t c_off = 0;
        for (const auto& src : l.inputs) {
          const std::size_t sc = acts.out.at(src).dim(1);
          Tensor slice({N, sc, H, W});
          for (std::size_t n = 0; n < N; ++n) {
            std::copy(go.data() + (n * C + c_off) * H * W,
                      go.data() + (n * C + c_off + sc) * H * W,
                      slice.data() + n * sc * H * W);
          }
          // Duplicated inputs accumulate both slices; that realizes the
          // factor-2 term of the shared branch.
          accumulate(src, std::move(slice));
          c_off += sc;
        }
        break;
      }
    }
  }

  auto in_it = grad.find("input");
  result.input_grad = (in_it != grad.end()) ? std::move(in_it->second) : Tensor(input.shape());
  return result;
}

namespace {

struct HeadPair {
  const LayerSpec* conf = nullptr;
  const LayerSpec* loc = nullptr;
};

std::vector<HeadPair> head_pairs(const NetworkGraph& g) {
  std::vector<HeadPair> heads;
  for (const auto& l : g.layers) {
    if (l.kind != LayerKind::predict_tap) continue;
    if (l.tap_index < 0) throw ShapeError("predict-tap '" + l.id + "' missing tap index");
    if (heads.size() <= static_cast<std::size_t>(l.tap_index)) {
      heads.resize(l.tap_index + 1);
    }
    if (l.role == HeadRole::conf) {
      heads[l.tap_index].conf = &l;
    } else {
      heads[l.tap_index].loc = &l;
    }
  }
  for (const auto& h : heads) {
    if (!h.conf || !h.loc) throw ShapeError("incomplete prediction head pair");
  }
  return heads;
}

}  // namespace

FlatPredictions flatten_predictions(const NetworkGraph& g, const Activations& acts) {
  const auto heads = head_pairs(g);
  const std::size_t n_cls = static_cast<std::size_t>(g.num_classes) + 1;

  std::size_t total = 0;
  for (const auto& h : heads) {
    const Tensor& c = acts.out.at(h.conf->id);
    if (c.dim(0) != 1) throw ShapeError("flatten_predictions: batch dim must be 1");
    total += static_cast<std::size_t>(h.conf->boxes_per_cell) * c.dim(2) * c.dim(3);
  }

  FlatPredictions fp{Tensor({total, n_cls}), Tensor({total, 4})};
  std::size_t a = 0;
  for (const auto& h : heads) {
    const Tensor& c = acts.out.at(h.conf->id);
    const Tensor& o = acts.out.at(h.loc->id);
    const std::size_t H = c.dim(2), W = c.dim(3);
    const std::size_t k = static_cast<std::size_t>(h.conf->boxes_per_cell);
    if (c.dim(1) != k * n_cls) {
      throw ShapeError("conf head '" + h.conf->id + "' channel count " +
                       std::to_string(c.dim(1)) + " != k*(classes+1)");
    }
    if (o.dim(1) != k * 4 || o.dim(2) != H || o.dim(3) != W) {
      throw ShapeError("loc head '" + h.loc->id + "' shape mismatch");
    }
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        for (std::size_t b = 0; b < k; ++b, ++a) {
          for (std::size_t cl = 0; cl < n_cls; ++cl) {
            fp.conf.at2(a, cl) = c.at4(0, b * n_cls + cl, y, x);
          }
          for (std::size_t d = 0; d < 4; ++d) {
            fp.loc.at2(a, d) = o.at4(0, b * 4 + d, y, x);
          }
        }
      }
    }
  }
  return fp;
}

GradMap unflatten_prediction_grads(const NetworkGraph& g, const Activations& acts,
                                   const Tensor& conf_grad, const Tensor& loc_grad) {
  const auto heads = head_pairs(g);
  const std::size_t n_cls = static_cast<std::size_t>(g.num_classes) + 1;
  GradMap gm;
  std::size_t a = 0;
  for (const auto& h : heads) {
    const Tensor& c = acts.out.at(h.conf->id);
    const Tensor& o = acts.out.at(h.loc->id);
    const std::size_t H = c.dim(2), W = c.dim(3);
    const std::size_t k = static_cast<std::size_t>(h.conf->boxes_per_cell);
    Tensor gc(c.shape());
    Tensor gl(o.shape());
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        for (std::size_t b = 0; b < k; ++b, ++a) {
          for (std::size_t cl = 0; cl < n_cls; ++cl) {
            gc.at4(0, b * n_cls + cl, y, x) = conf_grad.at2(a, cl);
          }
          for (std::size_t d = 0; d < 4; ++d) {
            gl.at4(0, b * 4 + d, y, x) = loc_grad.at2(a, d);
          }
        }
      }
    }
    gm[h.conf->id] = std::move(gc);
    gm[h.loc->id] = std::move(gl);
  }
  if (a != conf_grad.dim(0)) {
    throw ShapeError("unflatten_prediction_grads: anchor count mismatch");
  }
  return gm;
}

}  // namespace mdcn
