#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "aquaseg/image.hpp"
#include "aquaseg/types.hpp"

namespace aquaseg {

struct ClassSpec {
  std::string code;
  std::string name;
  std::array<int, 3> color{};
  friend bool operator==(const ClassSpec&, const ClassSpec&) = default;
};

using ClassMap = std::vector<ClassSpec>;

/// Eight SUIM classes with their 3-bit RGB mask colours.
ClassMap default_suim_classes();

/// Throws ValidationError on duplicate codes, out-of-range colours, or colours that collide after binarization.
void validate_class_map(const ClassMap& classes, int channel_threshold);

struct ImageRecord {
  std::string image_id;
  RgbImage image;
  RgbImage color_mask;
  Size2 original_size;
};

struct BinaryTarget {
  std::string image_id;
  std::string class_code;
  Mask mask;
  std::int64_t pixel_count = 0;
};

struct TargetKey {
  std::string image_id;
  std::string class_code;
  auto operator<=>(const TargetKey&) const = default;
};

enum class ExclusionMode {
  whole_mask,  ///< drop a class target if its whole mask has fewer than min_pixels
  component,   ///< drop 4-connected components smaller than min_pixels, then drop empty targets
};

/// Splits a colour-coded mask into one binary mask per class.
///
/// Each channel is binarized with `value > channel_threshold` and the resulting 3-bit
/// code is looked up among the binarized class colours. Every class in the map gets an
/// entry, possibly empty. A pixel code that matches no class raises ValidationError with
/// the code and the (row, col) location.
std::map<std::string, Mask> parse_color_mask(const RgbImage& color_mask, const ClassMap& classes,
                                             int channel_threshold = 127);

/// Paints masks back into a colour image; inverse of parse_color_mask for binary colours.
RgbImage paint_color_mask(const std::map<std::string, Mask>& masks, const ClassMap& classes);

std::vector<BinaryTarget> extract_targets(const ImageRecord& record, const ClassMap& classes,
                                          std::int64_t min_pixels = 100, int channel_threshold = 127,
                                          ExclusionMode mode = ExclusionMode::whole_mask);

/// Removes 4-connected components with fewer than min_pixels pixels.
Mask drop_small_components(const Mask& mask, std::int64_t min_pixels);

struct TaskSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
  friend bool operator==(const TaskSplit&, const TaskSplit&) = default;
};

/// Per-task train/test partition keyed by class code; ids inside each list are image ids.
using DatasetSplit = std::map<std::string, TaskSplit>;

/// Number of training items for a task of n items: round(ratio * n) clamped to [1, n - 1].
std::size_t train_count(std::size_t n, double ratio);

/// Seeded per-task shuffle split. Throws ValidationError if any task has fewer than 2 targets.
DatasetSplit split_dataset(const std::vector<TargetKey>& targets, double ratio = 0.8, std::uint64_t seed = 0);

struct EncoderInput {
  RgbImage image;                      ///< side x side
  std::vector<Mask> masks;             ///< one per input target, side x side
  Size2 original_size;
};

/// Bilinear for the image, nearest for masks. side must be a positive multiple of 16.
EncoderInput resize_for_encoder(const ImageRecord& record, const std::vector<BinaryTarget>& targets, int side);

struct PixelNormalization {
  std::array<float, 3> mean{123.675f, 116.28f, 103.53f};
  std::array<float, 3> std{58.395f, 57.12f, 57.375f};
  friend bool operator==(const PixelNormalization&, const PixelNormalization&) = default;
};

/// 3 x (side*side) row-major channel planes of (pixel - mean) / std.
using NormalizedImage = Eigen::Matrix<float, 3, Eigen::Dynamic, Eigen::RowMajor>;

NormalizedImage normalize_image(const RgbImage& image, const PixelNormalization& norm = {});

inline std::int64_t count_foreground(const Mask& mask) { return mask.cast<std::int64_t>().sum(); }

}  // namespace aquaseg
