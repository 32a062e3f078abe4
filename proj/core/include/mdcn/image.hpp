#pragma once

#include <string>

#include "mdcn/tensor.hpp"

namespace mdcn {

// Images are [3,H,W] tensors with values in [0,1].

Tensor read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Tensor& image);

/// Reads .ppm (P6) or raw .mdt tensors, by extension.
Tensor read_image(const std::string& path);

/// Bilinear resample to out_h x out_w.
Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);

/// Shift [0,1] pixels to the symmetric [-1,1] range the networks consume.
Tensor standardize(const Tensor& image);

}  // namespace mdcn
