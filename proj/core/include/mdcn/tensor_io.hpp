#pragma once

#include <iosfwd>
#include <string>

#include "mdcn/tensor.hpp"

namespace mdcn {

// Binary tensor format, used for fixtures and checkpoints:
//   magic "MDT1", u32 rank, rank x u64 dims, float64 payload.
// All integers and doubles little-endian, payload row-major.

void write_tensor(std::ostream& os, const Tensor& t);
void write_tensor_file(const std::string& path, const Tensor& t);

Tensor read_tensor(std::istream& is);
Tensor read_tensor_file(const std::string& path);

}  // namespace mdcn
