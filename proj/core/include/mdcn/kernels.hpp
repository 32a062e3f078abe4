#pragma once

#include <cstddef>
#include <vector>

#include "mdcn/tensor.hpp"

namespace mdcn {

/// Convolution weights, bias and geometry.
///
/// weights are [out_ch, in_ch, kh, kw]; bias is [out_ch]. All MDCN
/// configurations use 1x1 and 3x3 kernels only (wider receptive fields are
/// built from stacked 3x3), but the kernel itself accepts any odd size.
struct ConvParams {
  Tensor weights;
  Tensor bias;
  int stride = 1;
  int padding = 0;
  int dilation = 1;

  std::size_t out_ch() const { return weights.dim(0); }
  std::size_t in_ch() const { return weights.dim(1); }
  std::size_t kh() const { return weights.dim(2); }
  std::size_t kw() const { return weights.dim(3); }
};

struct Conv2dGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

/// Output spatial size: floor((in + 2*pad - dilation*(k-1) - 1) / stride) + 1.
std::size_t conv_out_size(std::size_t in, int k, int stride, int pad, int dilation);

Tensor conv2d_forward(const Tensor& input, const ConvParams& p);
Conv2dGrads conv2d_backward(const Tensor& input, const ConvParams& p,
                            const Tensor& grad_out);

struct PoolResult {
  Tensor output;
  // Flat input index of each output's max; lowest index wins ties so the
  // backward routing is deterministic.
  std::vector<std::size_t> argmax;
};

/// Max pooling with ceil-mode output size (caffe convention): windows may
/// extend past the padded edge and are clipped to valid cells.
PoolResult maxpool2d(const Tensor& input, int window, int stride, int pad = 0);
std::size_t pool_out_size(std::size_t in, int window, int stride, int pad);
Tensor maxpool2d_backward(const Tensor& input, const PoolResult& fwd,
                          const Tensor& grad_out);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

Tensor softmax(const Tensor& input, int axis);
/// Backward through softmax given its forward output.
Tensor softmax_backward(const Tensor& softmax_out, int axis, const Tensor& grad_out);

struct L2NormResult {
  Tensor output;
  Tensor inv_norm;  // [N,1,H,W]: 1/sqrt(sum_c x^2 + eps), cached for backward
};
struct L2NormGrads {
  Tensor input;
  Tensor scale;
};

/// Channel-wise L2 normalization with a learned per-channel scale, applied to
/// the conv4_3 prediction tap. input [N,C,H,W], scale [C].
L2NormResult l2_normalize_scale(const Tensor& input, const Tensor& scale);
L2NormGrads l2_normalize_scale_backward(const Tensor& input, const Tensor& scale,
                                        const L2NormResult& fwd,
                                        const Tensor& grad_out);

}  // namespace mdcn
