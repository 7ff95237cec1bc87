#include "aquaseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "aquaseg/random.hpp"

namespace aquaseg {
namespace fs = std::filesystem;

namespace {

struct CellRect {
  int r0, c0, rows, cols;
  [[nodiscard]] bool separated_from(const CellRect& o) const {
    // at least one empty cell between the two rectangles
    return r0 + rows < o.r0 || o.r0 + o.rows < r0 || c0 + cols < o.c0 || o.c0 + o.cols < c0;
  }
};

enum class ShapeKind { rectangle, ell, cross, disc };

/// Cell-level occupancy of one shape inside its rectangle; never empty.
std::vector<std::vector<bool>> shape_cells(ShapeKind kind, int rows, int cols) {
  std::vector<std::vector<bool>> cells(rows, std::vector<bool>(cols, false));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      bool on = true;
      switch (kind) {
        case ShapeKind::rectangle:
          break;
        case ShapeKind::ell:
          on = !(r < rows / 2 && c >= (cols + 1) / 2);
          break;
        case ShapeKind::cross:
          on = (r >= rows / 3 && r < rows - rows / 3) || (c >= cols / 3 && c < cols - cols / 3);
          break;
        case ShapeKind::disc: {
          const double y = (r + 0.5) / rows - 0.5, x = (c + 0.5) / cols - 0.5;
          on = x * x + y * y <= 0.25;
          break;
        }
      }
      cells[r][c] = on;
    }
  return cells;
}

/// Distinct appearance per class: evenly spaced hues, kept away from the water palette's blue-green.
std::array<double, 3> appearance(std::size_t fg_index, std::size_t fg_count) {
  const double hue = std::fmod(0.05 + static_cast<double>(fg_index) / static_cast<double>(fg_count), 1.0);
  std::array<double, 3> rgb{};
  for (int k = 0; k < 3; ++k) {
    const double phase = 2 * std::numbers::pi * (hue - k / 3.0);
    rgb[k] = 128 + 110 * std::cos(phase);
  }
  if (fg_index % 2 == 1)
    for (double& v : rgb) v = 0.6 * v + 0.4 * 235;  // lighter variant separates neighbouring hues
  return rgb;
}

std::uint8_t clamp_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

std::vector<SynthImage> render_synthetic_dataset(const ClassMap& classes, const SynthOptions& opts) {
  if (opts.n_images < 2) throw ValidationError("synthetic dataset needs at least 2 images");
  if (opts.image_size < 160 || opts.image_size % 16 != 0)
    throw ValidationError("synthetic image_size must be a multiple of 16 and at least 160");
  if (classes.size() < 2) throw ValidationError("synthetic dataset needs a background and at least one foreground class");
  const std::size_t fg_count = classes.size() - 1;
  const int grid = 16;
  const int cell = opts.image_size / grid;
  const int side = opts.image_size;

  std::vector<SynthImage> out;
  for (int i = 0; i < opts.n_images; ++i) {
    Rng rng = make_rng(opts.seed, 0x5C0000 + static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 6.0);

    std::vector<std::size_t> fg{static_cast<std::size_t>(i) % fg_count};
    if (fg_count > 1) {
      std::size_t second = (static_cast<std::size_t>(i) + 3) % fg_count;
      if (second == fg[0]) second = (second + 1) % fg_count;
      fg.push_back(second);
    }

    // Place one shape per foreground class on the cell grid.
    std::vector<CellRect> rects;
    for (std::size_t k = 0; k < fg.size(); ++k) {
      std::uniform_int_distribution<int> extent(3, 6);
      bool placed = false;
      for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        const int rows = extent(rng), cols = extent(rng);
        std::uniform_int_distribution<int> r0(1, grid - 1 - rows), c0(1, grid - 1 - cols);
        const CellRect cand{r0(rng), c0(rng), rows, cols};
        if (std::all_of(rects.begin(), rects.end(), [&](const CellRect& o) { return cand.separated_from(o); })) {
          rects.push_back(cand);
          placed = true;
        }
      }
      if (!placed) throw ValidationError("synthetic layout failed; use a larger image_size");
    }

    SynthImage img;
    char id[32];
    std::snprintf(id, sizeof id, "synth_%03d", i);
    img.image_id = id;
    img.image = RgbImage(side, side);
    for (const auto& cls : classes) img.masks[cls.code] = Mask::Zero(side, side);
    Mask& background = img.masks[classes.front().code];
    background.setOnes();

    // Water: vertical blue-green gradient with a slow ripple.
    const double ripple_phase = 2 * std::numbers::pi * unit(rng);
    const double depth = 0.7 + 0.3 * unit(rng);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        const double t = static_cast<double>(y) / side;
        const double ripple = 8 * std::sin(2 * std::numbers::pi * (x + 0.5 * y) / 48.0 + ripple_phase);
        img.image.channels[0](y, x) = clamp_u8(20 + 15 * t + noise(rng));
        img.image.channels[1](y, x) = clamp_u8(depth * (110 - 40 * t) + ripple + noise(rng));
        img.image.channels[2](y, x) = clamp_u8(depth * (150 - 50 * t) + ripple + noise(rng));
      }

    for (std::size_t k = 0; k < fg.size(); ++k) {
      const auto& cls = classes[fg[k] + 1];
      const auto base = appearance(fg[k], fg_count);
      const auto kind = static_cast<ShapeKind>(std::uniform_int_distribution<int>(0, 3)(rng));
      const auto& rect = rects[k];
      const auto cells = shape_cells(kind, rect.rows, rect.cols);
      const int stripe = 4 + static_cast<int>(fg[k] % 4) * 2;
      Mask& mask = img.masks[cls.code];
      for (int r = 0; r < rect.rows; ++r)
        for (int c = 0; c < rect.cols; ++c) {
          if (!cells[r][c]) continue;
          for (int y = (rect.r0 + r) * cell; y < (rect.r0 + r + 1) * cell; ++y)
            for (int x = (rect.c0 + c) * cell; x < (rect.c0 + c + 1) * cell; ++x) {
              mask(y, x) = 1;
              background(y, x) = 0;
              const double shade = ((x + y) / stripe) % 2 == 0 ? 1.0 : 0.82;
              for (int ch = 0; ch < 3; ++ch) img.image.channels[ch](y, x) = clamp_u8(base[ch] * shade + noise(rng));
            }
        }
    }
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<SynthImage> generate_synthetic_dataset(const fs::path& out_dir, const ClassMap& classes,
                                                   const SynthOptions& opts) {
  if (fs::exists(out_dir) && !fs::is_directory(out_dir))
    throw ValidationError(out_dir.string() + " exists and is not a directory");
  if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    if (!opts.force) throw ValidationError("output directory " + out_dir.string() + " is not empty (use --force)");
    fs::remove_all(out_dir / "images");
    fs::remove_all(out_dir / "masks");
  }
  auto images = render_synthetic_dataset(classes, opts);
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "masks");
  for (const auto& img : images) {
    write_image(out_dir / "images" / (img.image_id + ".ppm"), img.image);
    write_image(out_dir / "masks" / (img.image_id + ".bmp"), paint_color_mask(img.masks, classes));
  }
  return images;
}

}  // namespace aquaseg
