#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <vector>

#include "aquaseg/types.hpp"

namespace aquaseg {

/// 8-bit RGB raster stored as three row-major planes.
struct RgbImage {
  std::array<Plane, 3> channels;

  RgbImage() = default;
  RgbImage(int height, int width) {
    for (auto& c : channels) c = Plane::Zero(height, width);
  }

  [[nodiscard]] int height() const { return static_cast<int>(channels[0].rows()); }
  [[nodiscard]] int width() const { return static_cast<int>(channels[0].cols()); }
  [[nodiscard]] Size2 size() const { return {height(), width()}; }

  friend bool operator==(const RgbImage& a, const RgbImage& b) {
    if (a.size() != b.size()) return false;
    for (int c = 0; c < 3; ++c)
      if ((a.channels[c] != b.channels[c]).any()) return false;
    return true;
  }
};

/// Reads binary PPM (P6, maxval 255), uncompressed 24/32-bit BMP, or baseline/progressive JPEG, chosen by extension.
RgbImage read_image(const std::filesystem::path& path);

/// Writes PPM (P6) or 24-bit BMP depending on extension.
void write_image(const std::filesystem::path& path, const RgbImage& image);

[[nodiscard]] bool is_supported_image(const std::filesystem::path& path);

/// Source coordinate for half-pixel-centred resampling.
inline double source_coordinate(int dst, int dst_len, int src_len) {
  return (dst + 0.5) * static_cast<double>(src_len) / dst_len - 0.5;
}

/// Bilinear resize with half-pixel centres and edge clamping. Same-size input is returned unchanged.
template <typename Derived>
Grid<typename Derived::Scalar> resize_bilinear(const Eigen::ArrayBase<Derived>& src, int out_h, int out_w) {
  using Scalar = typename Derived::Scalar;
  const int in_h = static_cast<int>(src.rows());
  const int in_w = static_cast<int>(src.cols());
  if (in_h == out_h && in_w == out_w) return src;

  struct Tap {
    int i0, i1;
    double w1;
  };
  auto taps = [](int out_len, int in_len) {
    std::vector<Tap> t(out_len);
    for (int d = 0; d < out_len; ++d) {
      const double s = std::clamp(source_coordinate(d, out_len, in_len), 0.0, in_len - 1.0);
      const int i0 = static_cast<int>(std::floor(s));
      const int i1 = std::min(i0 + 1, in_len - 1);
      t[d] = {i0, i1, s - i0};
    }
    return t;
  };
  const auto ty = taps(out_h, in_h);
  const auto tx = taps(out_w, in_w);

  Grid<Scalar> out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const auto& a = ty[y];
    for (int x = 0; x < out_w; ++x) {
      const auto& b = tx[x];
      const double top = (1.0 - b.w1) * src(a.i0, b.i0) + b.w1 * src(a.i0, b.i1);
      const double bot = (1.0 - b.w1) * src(a.i1, b.i0) + b.w1 * src(a.i1, b.i1);
      out(y, x) = static_cast<Scalar>((1.0 - a.w1) * top + a.w1 * bot);
    }
  }
  return out;
}

/// Nearest-neighbour resize; preserves the value set of the input.
template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> resize_nearest(
    const Eigen::ArrayBase<Derived>& src, int out_h, int out_w) {
  const int in_h = static_cast<int>(src.rows());
  const int in_w = static_cast<int>(src.cols());
  auto index = [](int d, int out_len, int in_len) {
    const auto s = static_cast<int>(std::floor((d + 0.5) * in_len / out_len));
    return std::min(s, in_len - 1);
  };
  Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const int sy = index(y, out_h, in_h);
    for (int x = 0; x < out_w; ++x) out(y, x) = src(sy, index(x, out_w, in_w));
  }
  return out;
}

/// Bilinear resize of an 8-bit image, rounding back to 8 bits.
RgbImage resize_image(const RgbImage& image, int out_h, int out_w);

}  // namespace aquaseg
