#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "scenegen/common.hpp"

namespace scenegen {

// Dense (channels, height, width) array of doubles, row-major within a
// channel. The latent substrate for every backend.
struct Latent {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> v;

  Latent() = default;
  Latent(int c, int h, int w) : channels(c), height(h), width(w), v(static_cast<std::size_t>(c) * h * w, 0.0) {}

  std::size_t size() const { return v.size(); }
  int cells() const { return height * width; }

  double& at(int c, int y, int x) { return v[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const { return v[(static_cast<std::size_t>(c) * height + y) * width + x]; }

  // Channel value at flattened spatial index u = y * width + x.
  double& atc(int c, int u) { return v[static_cast<std::size_t>(c) * cells() + u]; }
  double atc(int c, int u) const { return v[static_cast<std::size_t>(c) * cells() + u]; }

  bool same_shape(const Latent& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  bool all_finite() const {
    for (double x : v) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }
};

struct ImageU8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;  // H*W*3, row-major

  ImageU8() = default;
  ImageU8(int h, int w) : height(h), width(w), rgb(static_cast<std::size_t>(h) * w * 3, 0) {}
};

}  // namespace scenegen
