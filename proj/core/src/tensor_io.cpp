#include "mdcn/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "mdcn/errors.hpp"

namespace mdcn {

namespace {

constexpr char kMagic[4] = {'M', 'D', 'T', '1'};

template <typename T>
void write_le(std::ostream& os, T value) {
  unsigned char buf[sizeof(T)];
  std::uint64_t bits;
  if constexpr (std::is_same_v<T, double>) {
    bits = std::bit_cast<std::uint64_t>(value);
  } else {
    bits = static_cast<std::uint64_t>(value);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  }
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!is) throw IoError("MDT1: truncated stream");
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  }
  if constexpr (std::is_same_v<T, double>) {
    return std::bit_cast<double>(bits);
  } else {
    return static_cast<T>(bits);
  }
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write(kMagic, 4);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) write_le<std::uint64_t>(os, d);
  for (double v : t.values()) write_le<double>(os, v);
  if (!os) throw IoError("MDT1: write failed");
}

void write_tensor_file(const std::string& path, const Tensor& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("MDT1: cannot open " + path + " for writing");
  write_tensor(f, t);
}

Tensor read_tensor(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("MDT1: bad magic");
  }
  const auto rank = read_le<std::uint32_t>(is);
  if (rank > 8) throw IoError("MDT1: implausible rank " + std::to_string(rank));
  std::vector<std::size_t> shape(rank);
  for (auto& d : shape) {
    d = static_cast<std::size_t>(read_le<std::uint64_t>(is));
    if (d == 0) throw IoError("MDT1: zero dimension");
  }
  std::vector<double> data(shape_numel(shape));
  for (auto& v : data) v = read_le<double>(is);
  return Tensor(std::move(shape), std::move(data));
}

Tensor read_tensor_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("MDT1: cannot open " + path);
  return read_tensor(f);
}

}  // namespace mdcn
