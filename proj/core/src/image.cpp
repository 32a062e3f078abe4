#include "mdcn/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mdcn/tensor_io.hpp"

namespace mdcn {

namespace {

void check_image(const Tensor& t, const char* who) {
  if (t.rank() != 3 || t.dim(0) != 3) {
    throw ShapeError(std::string(who) + ": expected [3,H,W], got " + shape_str(t.shape()));
  }
}

// Skips whitespace and '#' comments between PPM header tokens.
void skip_ppm_space(std::istream& is) {
  for (;;) {
    int c = is.peek();
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      is.get();
    } else {
      return;
    }
  }
}

}  // namespace

Tensor read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_ppm: cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw IoError("read_ppm: " + path + " is not a binary PPM (P6)");
  skip_ppm_space(f);
  std::size_t w, h;
  int maxval;
  f >> w;
  skip_ppm_space(f);
  f >> h;
  skip_ppm_space(f);
  f >> maxval;
  if (!f || maxval != 255) throw IoError("read_ppm: only maxval 255 supported");
  f.get();  // single whitespace after header
  std::vector<unsigned char> raw(w * h * 3);
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!f) throw IoError("read_ppm: truncated pixel data in " + path);
  Tensor img({3, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        img[(c * h + y) * w + x] = raw[(y * w + x) * 3 + c] / 255.0;
      }
    }
  }
  return img;
}

void write_ppm(const std::string& path, const Tensor& image) {
  check_image(image, "write_ppm");
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_ppm: cannot open " + path);
  f << "P6\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> raw(w * h * 3);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(image[(c * h + y) * w + x], 0.0, 1.0);
        raw[(y * w + x) * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  }
  f.write(reinterpret_cast<const char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (!f) throw IoError("write_ppm: write failed for " + path);
}

Tensor read_image(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".mdt") {
    Tensor t = read_tensor_file(path);
    check_image(t, "read_image");
    return t;
  }
  return read_ppm(path);
}

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  check_image(image, "resize_bilinear");
  const std::size_t h = image.dim(1), w = image.dim(2);
  if (out_h < 1 || out_w < 1) throw ShapeError("resize_bilinear: output dims must be >= 1");
  if (h == out_h && w == out_w) return image;
  Tensor out({3, out_h, out_w});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
    const std::size_t y0 = std::min(h - 1, static_cast<std::size_t>(fy));
    const std::size_t y1 = std::min(h - 1, y0 + 1);
    const double wy = fy - y0;
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
      const std::size_t x0 = std::min(w - 1, static_cast<std::size_t>(fx));
      const std::size_t x1 = std::min(w - 1, x0 + 1);
      const double wx = fx - x0;
      for (std::size_t c = 0; c < 3; ++c) {
        const double v00 = image[(c * h + y0) * w + x0];
        const double v01 = image[(c * h + y0) * w + x1];
        const double v10 = image[(c * h + y1) * w + x0];
        const double v11 = image[(c * h + y1) * w + x1];
        out[(c * out_h + y) * out_w + x] = (1 - wy) * ((1 - wx) * v00 + wx * v01) +
                                           wy * ((1 - wx) * v10 + wx * v11);
      }
    }
  }
  return out;
}

Tensor standardize(const Tensor& image) {
  check_image(image, "standardize");
  Tensor out(image.shape());
  for (std::size_t i = 0; i < image.numel(); ++i) out[i] = image[i] * 2.0 - 1.0;
  return out;
}

}  // namespace mdcn
