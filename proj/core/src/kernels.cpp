#include "mdcn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mdcn/parallel.hpp"

namespace mdcn {

namespace {

void check_4d(const Tensor& t, const char* who) {
  if (t.rank() != 4) {
    throw ShapeError(std::string(who) + ": expected rank-4 [N,C,H,W], got " +
                     shape_str(t.shape()));
  }
}

}  // namespace

std::size_t conv_out_size(std::size_t in, int k, int stride, int pad, int dilation) {
  const long long eff = static_cast<long long>(dilation) * (k - 1) + 1;
  const long long num = static_cast<long long>(in) + 2LL * pad - eff;
  if (num < 0) return 0;
  return static_cast<std::size_t>(num / stride) + 1;
}

Tensor conv2d_forward(const Tensor& input, const ConvParams& p) {
  check_4d(input, "conv2d_forward");
  if (p.weights.rank() != 4) {
    throw ShapeError("conv2d_forward: weights must be [out_ch,in_ch,kh,kw], got " +
                     shape_str(p.weights.shape()));
  }
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t K = p.out_ch(), KH = p.kh(), KW = p.kw();
  if (C != p.in_ch()) {
    throw ShapeError("conv2d_forward: input channels C=" + std::to_string(C) +
                     " != weights in_ch=" + std::to_string(p.in_ch()));
  }
  if (p.bias.shape() != std::vector<std::size_t>{K}) {
    throw ShapeError("conv2d_forward: bias shape " + shape_str(p.bias.shape()) +
                     " != [out_ch=" + std::to_string(K) + "]");
  }
  if (p.stride < 1 || p.dilation < 1 || p.padding < 0) {
    throw ShapeError("conv2d_forward: stride/dilation must be positive, padding non-negative");
  }
  const std::size_t OH = conv_out_size(H, static_cast<int>(KH), p.stride, p.padding, p.dilation);
  const std::size_t OW = conv_out_size(W, static_cast<int>(KW), p.stride, p.padding, p.dilation);
  if (OH < 1 || OW < 1) {
    throw ShapeError("conv2d_forward: output spatial dims collapse to zero for input H=" +
                     std::to_string(H) + " W=" + std::to_string(W));
  }

  Tensor out({N, K, OH, OW});
  const double* in = input.data();
  const double* wt = p.weights.data();
  const double* bias = p.bias.data();
  double* o = out.data();
  const int s = p.stride, pd = p.padding, dl = p.dilation;

  // Tile over output channels so the accumulator rows stay hot while one
  // input row feeds several filters.
  constexpr std::size_t KT = 8;
  const std::size_t ktiles = (K + KT - 1) / KT;

  parallel_for(N * ktiles, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t job = lo; job < hi; ++job) {
      const std::size_t n = job / ktiles;
      const std::size_t k0 = (job % ktiles) * KT;
      const std::size_t k1 = std::min(K, k0 + KT);
      for (std::size_t oy = 0; oy < OH; ++oy) {
        for (std::size_t k = k0; k < k1; ++k) {
          double* row = o + ((n * K + k) * OH + oy) * OW;
          std::fill(row, row + OW, bias[k]);
        }
        for (std::size_t c = 0; c < C; ++c) {
          const double* in_c = in + (n * C + c) * H * W;
          for (std::size_t ky = 0; ky < KH; ++ky) {
            const long long iy = static_cast<long long>(oy) * s - pd +
                                 static_cast<long long>(ky) * dl;
            if (iy < 0 || iy >= static_cast<long long>(H)) continue;
            const double* in_row = in_c + static_cast<std::size_t>(iy) * W;
            for (std::size_t kx = 0; kx < KW; ++kx) {
              const long long off = static_cast<long long>(kx) * dl - pd;
              // Valid ox range: 0 <= ox*s + off < W.
              std::size_t ox_lo = 0;
              if (off < 0) {
                ox_lo = static_cast<std::size_t>((-off + s - 1) / s);
              }
              long long hi_num = static_cast<long long>(W) - 1 - off;
              if (hi_num < 0) continue;
              std::size_t ox_hi = std::min<std::size_t>(
                  OW, static_cast<std::size_t>(hi_num / s) + 1);
              if (ox_lo >= ox_hi) continue;
              const double* src = in_row + off;
              for (std::size_t k = k0; k < k1; ++k) {
                const double w = wt[((k * C + c) * KH + ky) * KW + kx];
                double* row = o + ((n * K + k) * OH + oy) * OW;
                if (s == 1) {
                  for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) {
                    row[ox] += w * src[ox];
                  }
                } else {
                  for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) {
                    row[ox] += w * src[ox * s];
                  }
                }
              }
            }
          }
        }
      }
    }
  });
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const ConvParams& p,
                            const Tensor& grad_out) {
  check_4d(input, "conv2d_backward");
  check_4d(grad_out, "conv2d_backward(grad_out)");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t K = p.out_ch(), KH = p.kh(), KW = p.kw();
  const std::size_t OH = conv_out_size(H, static_cast<int>(KH), p.stride, p.padding, p.dilation);
  const std::size_t OW = conv_out_size(W, static_cast<int>(KW), p.stride, p.padding, p.dilation);
  require_shape(grad_out, {N, K, OH, OW}, "conv2d_backward: grad_out");
  if (C != p.in_ch()) {
    throw ShapeError("conv2d_backward: input channels C=" + std::to_string(C) +
                     " != weights in_ch=" + std::to_string(p.in_ch()));
  }

  Conv2dGrads g{Tensor({N, C, H, W}), Tensor({K, C, KH, KW}), Tensor({K})};
  const double* in = input.data();
  const double* wt = p.weights.data();
  const double* go = grad_out.data();
  const int s = p.stride, pd = p.padding, dl = p.dilation;

  // grad_bias and grad_weights: one worker owns one output channel, so the
  // accumulation order per element is fixed regardless of worker count.
  parallel_for(K, [&](std::size_t klo, std::size_t khi) {
    for (std::size_t k = klo; k < khi; ++k) {
      double gb = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double* go_nk = go + (n * K + k) * OH * OW;
        for (std::size_t i = 0; i < OH * OW; ++i) gb += go_nk[i];
      }
      g.bias[k] = gb;
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t ky = 0; ky < KH; ++ky) {
          for (std::size_t kx = 0; kx < KW; ++kx) {
            double acc = 0.0;
            const long long off = static_cast<long long>(kx) * dl - pd;
            std::size_t ox_lo = 0;
            if (off < 0) ox_lo = static_cast<std::size_t>((-off + s - 1) / s);
            const long long hi_num = static_cast<long long>(W) - 1 - off;
            const std::size_t ox_hi =
                hi_num < 0 ? 0
                           : std::min<std::size_t>(OW, static_cast<std::size_t>(hi_num / s) + 1);
            for (std::size_t n = 0; n < N; ++n) {
              const double* go_nk = go + (n * K + k) * OH * OW;
              const double* in_nc = in + (n * C + c) * H * W;
              for (std::size_t oy = 0; oy < OH; ++oy) {
                const long long iy = static_cast<long long>(oy) * s - pd +
                                     static_cast<long long>(ky) * dl;
                if (iy < 0 || iy >= static_cast<long long>(H)) continue;
                const double* in_row = in_nc + static_cast<std::size_t>(iy) * W + off;
                const double* go_row = go_nk + oy * OW;
                if (s == 1) {
                  for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) {
                    acc += go_row[ox] * in_row[ox];
                  }
                } else {
                  for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) {
                    acc += go_row[ox] * in_row[ox * s];
                  }
                }
              }
            }
            g.weights[((k * C + c) * KH + ky) * KW + kx] = acc;
          }
        }
      }
    }
  });

  // grad_input: one worker owns one (n, c) input slice.
  double* gi = g.input.data();
  parallel_for(N * C, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t job = lo; job < hi; ++job) {
      const std::size_t n = job / C;
      const std::size_t c = job % C;
      double* gi_nc = gi + (n * C + c) * H * W;
      for (std::size_t k = 0; k < K; ++k) {
        const double* go_nk = go + (n * K + k) * OH * OW;
        for (std::size_t ky = 0; ky < KH; ++ky) {
          for (std::size_t kx = 0; kx < KW; ++kx) {
            const double w = wt[((k * C + c) * KH + ky) * KW + kx];
            const long long off = static_cast<long long>(kx) * dl - pd;
            std::size_t ox_lo = 0;
            if (off < 0) ox_lo = static_cast<std::size_t>((-off + s - 1) / s);
            const long long hi_num = static_cast<long long>(W) - 1 - off;
            const std::size_t ox_hi =
                hi_num < 0 ? 0
                           : std::min<std::size_t>(OW, static_cast<std::size_t>(hi_num / s) + 1);
            if (ox_lo >= ox_hi) continue;
            for (std::size_t oy = 0; oy < OH; ++oy) {
              const long long iy = static_cast<long long>(oy) * s - pd +
                                   static_cast<long long>(ky) * dl;
              if (iy < 0 || iy >= static_cast<long long>(H)) continue;
              double* gi_row = gi_nc + static_cast<std::size_t>(iy) * W + off;
              const double* go_row = go_nk + oy * OW;
              if (s == 1) {
                for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) {
                  gi_row[ox] += w * go_row[ox];
                }
              } else {
                for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) {
                  gi_row[ox * s] += w * go_row[ox];
                }
              }
            }
          }
        }
      }
    }
  });

  return g;
}

std::size_t pool_out_size(std::size_t in, int window, int stride, int pad) {
  // Ceil mode, with the last window forced to start inside the padded input.
  const long long num = static_cast<long long>(in) + 2LL * pad - window;
  if (num < 0) return 0;
  std::size_t out = static_cast<std::size_t>((num + stride - 1) / stride) + 1;
  if ((out - 1) * static_cast<std::size_t>(stride) >= in + static_cast<std::size_t>(pad)) {
    --out;
  }
  return out;
}

PoolResult maxpool2d(const Tensor& input, int window, int stride, int pad) {
  check_4d(input, "maxpool2d");
  if (window < 1 || stride < 1 || pad < 0) {
    throw ShapeError("maxpool2d: window/stride must be positive, pad non-negative");
  }
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (static_cast<std::size_t>(window) > H + 2 * static_cast<std::size_t>(pad) ||
      static_cast<std::size_t>(window) > W + 2 * static_cast<std::size_t>(pad)) {
    throw ShapeError("maxpool2d: window " + std::to_string(window) +
                     " larger than padded input " + shape_str(input.shape()));
  }
  const std::size_t OH = pool_out_size(H, window, stride, pad);
  const std::size_t OW = pool_out_size(W, window, stride, pad);

  PoolResult r{Tensor({N, C, OH, OW}), std::vector<std::size_t>(N * C * OH * OW)};
  const double* in = input.data();
  double* o = r.output.data();

  parallel_for(N * C, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t job = lo; job < hi; ++job) {
      const double* in_nc = in + job * H * W;
      double* o_nc = o + job * OH * OW;
      std::size_t* am = r.argmax.data() + job * OH * OW;
      for (std::size_t oy = 0; oy < OH; ++oy) {
        const long long y0 = static_cast<long long>(oy) * stride - pad;
        const std::size_t ylo = static_cast<std::size_t>(std::max(0LL, y0));
        const std::size_t yhi = static_cast<std::size_t>(
            std::min<long long>(H, y0 + window));
        for (std::size_t ox = 0; ox < OW; ++ox) {
          const long long x0 = static_cast<long long>(ox) * stride - pad;
          const std::size_t xlo = static_cast<std::size_t>(std::max(0LL, x0));
          const std::size_t xhi = static_cast<std::size_t>(
              std::min<long long>(W, x0 + window));
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_idx = 0;
          for (std::size_t y = ylo; y < yhi; ++y) {
            for (std::size_t x = xlo; x < xhi; ++x) {
              const std::size_t idx = y * W + x;
              if (in_nc[idx] > best) {  // strict > keeps the lowest flat index
                best = in_nc[idx];
                best_idx = idx;
              }
            }
          }
          o_nc[oy * OW + ox] = best;
          am[oy * OW + ox] = job * H * W + best_idx;
        }
      }
    }
  });
  return r;
}

Tensor maxpool2d_backward(const Tensor& input, const PoolResult& fwd,
                          const Tensor& grad_out) {
  require_shape(grad_out, fwd.output.shape(), "maxpool2d_backward: grad_out");
  Tensor gi(input.shape());
  // Windows may overlap (e.g. 3x3 stride-1 pool), so route sequentially.
  const double* go = grad_out.data();
  double* g = gi.data();
  for (std::size_t i = 0; i < fwd.argmax.size(); ++i) {
    g[fwd.argmax[i]] += go[i];
  }
  return gi;
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape());
  const double* x = input.data();
  double* y = out.data();
  const std::size_t n = input.numel();
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  require_shape(grad_out, input.shape(), "relu_backward: grad_out");
  Tensor gi(input.shape());
  const double* x = input.data();
  const double* go = grad_out.data();
  double* g = gi.data();
  const std::size_t n = input.numel();
  for (std::size_t i = 0; i < n; ++i) g[i] = x[i] > 0.0 ? go[i] : 0.0;
  return gi;
}

namespace {

// Iterates all (outer, inner) slices of `t` along `axis`, calling
// fn(base_offset, axis_len, stride).
template <typename Fn>
void for_each_lane(const Tensor& t, int axis, Fn&& fn) {
  const auto& shape = t.shape();
  const std::size_t rank = shape.size();
  const std::size_t ax = static_cast<std::size_t>(axis);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= shape[i];
  for (std::size_t i = ax + 1; i < rank; ++i) inner *= shape[i];
  const std::size_t len = shape[ax];
  for (std::size_t ou = 0; ou < outer; ++ou) {
    for (std::size_t in = 0; in < inner; ++in) {
      fn(ou * len * inner + in, len, inner);
    }
  }
}

void check_axis(const Tensor& t, int axis, const char* who) {
  if (axis < 0 || static_cast<std::size_t>(axis) >= t.rank()) {
    throw ShapeError(std::string(who) + ": axis " + std::to_string(axis) +
                     " invalid for rank " + std::to_string(t.rank()));
  }
}

}  // namespace

Tensor softmax(const Tensor& input, int axis) {
  check_axis(input, axis, "softmax");
  Tensor out(input.shape());
  const double* x = input.data();
  double* y = out.data();
  for_each_lane(input, axis, [&](std::size_t base, std::size_t len, std::size_t stride) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, x[base + i * stride]);
    double sum = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double e = std::exp(x[base + i * stride] - mx);
      y[base + i * stride] = e;
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (std::size_t i = 0; i < len; ++i) y[base + i * stride] *= inv;
  });
  return out;
}

Tensor softmax_backward(const Tensor& softmax_out, int axis, const Tensor& grad_out) {
  check_axis(softmax_out, axis, "softmax_backward");
  require_shape(grad_out, softmax_out.shape(), "softmax_backward: grad_out");
  Tensor gi(softmax_out.shape());
  const double* y = softmax_out.data();
  const double* go = grad_out.data();
  double* g = gi.data();
  for_each_lane(softmax_out, axis, [&](std::size_t base, std::size_t len, std::size_t stride) {
    double dot = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      dot += go[base + i * stride] * y[base + i * stride];
    }
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t idx = base + i * stride;
      g[idx] = y[idx] * (go[idx] - dot);
    }
  });
  return gi;
}

namespace {
constexpr double kL2Eps = 1e-12;
}

L2NormResult l2_normalize_scale(const Tensor& input, const Tensor& scale) {
  check_4d(input, "l2_normalize_scale");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (scale.shape() != std::vector<std::size_t>{C}) {
    throw ShapeError("l2_normalize_scale: scale shape " + shape_str(scale.shape()) +
                     " != channel count [" + std::to_string(C) + "]");
  }
  L2NormResult r{Tensor({N, C, H, W}), Tensor({N, std::size_t(1), H, W})};
  const double* x = input.data();
  const double* sc = scale.data();
  double* y = r.output.data();
  double* inv = r.inv_norm.data();
  const std::size_t HW = H * W;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t i = 0; i < HW; ++i) {
      double ss = kL2Eps;
      for (std::size_t c = 0; c < C; ++c) {
        const double v = x[(n * C + c) * HW + i];
        ss += v * v;
      }
      const double r_inv = 1.0 / std::sqrt(ss);
      inv[n * HW + i] = r_inv;
      for (std::size_t c = 0; c < C; ++c) {
        y[(n * C + c) * HW + i] = sc[c] * x[(n * C + c) * HW + i] * r_inv;
      }
    }
  }
  return r;
}

L2NormGrads l2_normalize_scale_backward(const Tensor& input, const Tensor& scale,
                                        const L2NormResult& fwd,
                                        const Tensor& grad_out) {
  require_shape(grad_out, input.shape(), "l2_normalize_scale_backward: grad_out");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  L2NormGrads g{Tensor({N, C, H, W}), Tensor({C})};
  const double* x = input.data();
  const double* sc = scale.data();
  const double* go = grad_out.data();
  const double* inv = fwd.inv_norm.data();
  double* gx = g.input.data();
  double* gs = g.scale.data();
  const std::size_t HW = H * W;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t i = 0; i < HW; ++i) {
      const double r_inv = inv[n * HW + i];
      // dot = sum_c gamma_c * g_c * x_c
      double dot = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t idx = (n * C + c) * HW + i;
        dot += sc[c] * go[idx] * x[idx];
        gs[c] += go[idx] * x[idx] * r_inv;
      }
      const double r3dot = r_inv * r_inv * r_inv * dot;
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t idx = (n * C + c) * HW + i;
        gx[idx] = sc[c] * r_inv * go[idx] - x[idx] * r3dot;
      }
    }
  }
  return g;
}

}  // namespace mdcn
