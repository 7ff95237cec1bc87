#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "aquaseg/suim.hpp"

namespace aquaseg {

struct DatasetConfig;

struct ManifestImage {
  std::string image_id;
  std::string image_file;  ///< relative to the dataset root
  std::string mask_file;
  Size2 size;
  friend bool operator==(const ManifestImage&, const ManifestImage&) = default;
};

struct ManifestTarget {
  TargetKey key;
  std::int64_t pixel_count = 0;
  friend bool operator==(const ManifestTarget&, const ManifestTarget&) = default;
};

struct Manifest {
  std::string dataset_root;
  std::vector<ManifestImage> images;   ///< sorted by id
  std::vector<ManifestTarget> targets; ///< sorted by (image, class)
  double split_ratio = 0.8;
  std::uint64_t split_seed = 0;
  DatasetSplit split;
  std::vector<std::string> excluded_tasks;   ///< tasks with fewer than 2 admitted targets
  std::int64_t excluded_targets = 0;         ///< nonempty class masks (or components) below min_pixels
  std::map<std::string, std::int64_t> targets_per_class;

  friend bool operator==(const Manifest&, const Manifest&) = default;

  [[nodiscard]] const ManifestImage& image(const std::string& id) const;
};

/// Scans `<root>/images` and `<root>/masks` (matching stems), parses every mask and applies
/// the exclusion and split rules. Throws ValidationError when no images are found, a mask is
/// missing or unparseable, or an image and its mask differ in size. Human-readable warnings
/// (e.g. excluded tasks) are appended to *warnings.
Manifest build_manifest(const DatasetConfig& dataset, const ClassMap& classes, std::vector<std::string>* warnings);

std::string manifest_json(const Manifest& m);
Manifest parse_manifest(const std::string& text, const std::string& source);

/// Targets per class and exclusion counts.
std::string manifest_summary_json(const Manifest& m);

}  // namespace aquaseg
