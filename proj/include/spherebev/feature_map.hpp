#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace spherebev {

/// Dense C x H x W image-plane feature tensor (channel-major).
class FeatureMap {
 public:
  FeatureMap() = default;

  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, float fill = 0.0f)
      : channels_(channels), height_(height), width_(width),
        data_(channels * height * width, fill) {
    if (channels == 0 || height == 0 || width == 0) {
      throw std::invalid_argument("FeatureMap: dimensions must be positive");
    }
  }

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }

  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * height_ + y) * width_ + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * height_ + y) * width_ + x];
  }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<float> data_;
};

/// Bilinear blend of the four texels around (u, v) for every channel, written
/// to out (size = channels). Coordinates are clamped to [0, W-1] x [0, H-1]
/// before the neighbor lookup, so out-of-range samples read the edge.
///
/// Evaluated as two nested lerps, which reproduces constant maps exactly and
/// texel values exactly at integer coordinates.
inline void bilinear_sample_into(const FeatureMap& fm, double u, double v,
                                 std::span<double> out) {
  const auto w = static_cast<double>(fm.width() - 1);
  const auto h = static_cast<double>(fm.height() - 1);
  u = std::clamp(u, 0.0, w);
  v = std::clamp(v, 0.0, h);
  const auto x0 = static_cast<std::size_t>(std::floor(u));
  const auto y0 = static_cast<std::size_t>(std::floor(v));
  const std::size_t x1 = std::min(x0 + 1, fm.width() - 1);
  const std::size_t y1 = std::min(y0 + 1, fm.height() - 1);
  const double fx = u - static_cast<double>(x0);
  const double fy = v - static_cast<double>(y0);
  for (std::size_t c = 0; c < fm.channels(); ++c) {
    const double v00 = fm.at(c, y0, x0);
    const double v10 = fm.at(c, y0, x1);
    const double v01 = fm.at(c, y1, x0);
    const double v11 = fm.at(c, y1, x1);
    const double top = v00 + fx * (v10 - v00);
    const double bottom = v01 + fx * (v11 - v01);
    out[c] = top + fy * (bottom - top);
  }
}

inline std::vector<double> bilinear_sample(const FeatureMap& fm, double u, double v) {
  std::vector<double> out(fm.channels());
  bilinear_sample_into(fm, u, v, out);
  return out;
}

}  // namespace spherebev
