#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "aquaseg/suim.hpp"

namespace aquaseg {

struct SynthOptions {
  int n_images = 10;
  std::uint64_t seed = 0;
  int image_size = 256;  ///< square, multiple of 16, >= 160; shapes are snapped to a size/16 cell grid
  bool force = false;    ///< allow a non-empty output directory (images/ and masks/ are replaced)
};

struct SynthImage {
  std::string image_id;
  RgbImage image;
  std::map<std::string, Mask> masks;  ///< every class, possibly empty
};

/// In-memory rendering. The first class of the map is the background; image i carries the
/// foreground classes i mod F and (i + 3) mod F (F = number of foreground classes), so with
/// at least F images every class appears at least once. Shapes never touch and each covers
/// at least one grid cell, so every foreground target has at least (size/16)^2 >= 100 pixels.
std::vector<SynthImage> render_synthetic_dataset(const ClassMap& classes, const SynthOptions& opts);

/// Writes `<out>/images/<id>.ppm` and `<out>/masks/<id>.bmp`. Throws ValidationError if `out`
/// is non-empty and opts.force is false.
std::vector<SynthImage> generate_synthetic_dataset(const std::filesystem::path& out_dir, const ClassMap& classes,
                                                   const SynthOptions& opts);

}  // namespace aquaseg
