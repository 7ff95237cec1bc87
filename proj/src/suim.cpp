#include "aquaseg/suim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

namespace aquaseg {
namespace {

int binarized_code(int r, int g, int b, int threshold) {
  return ((r > threshold) << 2) | ((g > threshold) << 1) | (b > threshold);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

ClassMap default_suim_classes() {
  return {
      {"BW", "Background (waterbody)", {0, 0, 0}},
      {"HD", "Human divers", {0, 0, 255}},
      {"PF", "Aquatic plants and sea-grass", {0, 255, 0}},
      {"WR", "Wrecks and ruins", {0, 255, 255}},
      {"RO", "Robots", {255, 0, 0}},
      {"RI", "Reefs and invertebrates", {255, 0, 255}},
      {"FV", "Fish and vertebrates", {255, 255, 0}},
      {"SR", "Sea-floor and rocks", {255, 255, 255}},
  };
}

void validate_class_map(const ClassMap& classes, int channel_threshold) {
  if (classes.empty()) throw ValidationError("class map is empty");
  if (channel_threshold < 0 || channel_threshold > 255)
    throw ValidationError("channel_threshold must lie in [0, 255]");
  std::set<std::string> codes;
  std::map<int, std::string> seen;
  for (const auto& c : classes) {
    if (c.code.empty()) throw ValidationError("class with empty code");
    if (!codes.insert(c.code).second) throw ValidationError("duplicate class code " + c.code);
    for (int v : c.color)
      if (v < 0 || v > 255) throw ValidationError("class " + c.code + " has a colour component outside [0, 255]");
    const int code = binarized_code(c.color[0], c.color[1], c.color[2], channel_threshold);
    if (auto [it, inserted] = seen.emplace(code, c.code); !inserted)
      throw ValidationError("classes " + it->second + " and " + c.code + " share a binarized colour");
  }
}

std::map<std::string, Mask> parse_color_mask(const RgbImage& color_mask, const ClassMap& classes,
                                             int channel_threshold) {
  validate_class_map(classes, channel_threshold);
  std::array<int, 8> lookup;
  lookup.fill(-1);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const auto& col = classes[i].color;
    lookup[binarized_code(col[0], col[1], col[2], channel_threshold)] = static_cast<int>(i);
  }

  const int h = color_mask.height(), w = color_mask.width();
  std::vector<Mask> masks(classes.size(), Mask::Zero(h, w));
  const auto& [r, g, b] = color_mask.channels;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int code = binarized_code(r(y, x), g(y, x), b(y, x), channel_threshold);
      const int cls = lookup[code];
      if (cls < 0) {
        std::ostringstream msg;
        msg << "mask pixel (" << int{r(y, x)} << "," << int{g(y, x)} << "," << int{b(y, x)} << ") with binarized code ("
            << ((code >> 2) & 1) << "," << ((code >> 1) & 1) << "," << (code & 1) << ") at row " << y << ", col " << x
            << " matches no class";
        throw ValidationError(msg.str());
      }
      masks[cls](y, x) = 1;
    }
  }
  std::map<std::string, Mask> out;
  for (std::size_t i = 0; i < classes.size(); ++i) out.emplace(classes[i].code, std::move(masks[i]));
  return out;
}

RgbImage paint_color_mask(const std::map<std::string, Mask>& masks, const ClassMap& classes) {
  if (masks.empty()) throw ValidationError("no masks to paint");
  const auto& first = masks.begin()->second;
  RgbImage out(static_cast<int>(first.rows()), static_cast<int>(first.cols()));
  for (const auto& cls : classes) {
    const auto it = masks.find(cls.code);
    if (it == masks.end()) continue;
    for (int c = 0; c < 3; ++c)
      out.channels[c] = (it->second != 0).select(Plane::Constant(out.height(), out.width(), cls.color[c]),
                                                 out.channels[c]);
  }
  return out;
}

Mask drop_small_components(const Mask& mask, std::int64_t min_pixels) {
  const int h = static_cast<int>(mask.rows()), w = static_cast<int>(mask.cols());
  Mask out = Mask::Zero(h, w);
  Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> visited = Mask::Zero(h, w);
  std::vector<std::pair<int, int>> stack, component;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      if (!mask(y0, x0) || visited(y0, x0)) continue;
      component.clear();
      stack.assign(1, {y0, x0});
      visited(y0, x0) = 1;
      while (!stack.empty()) {
        const auto [y, x] = stack.back();
        stack.pop_back();
        component.emplace_back(y, x);
        constexpr int dy[] = {-1, 1, 0, 0};
        constexpr int dx[] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int ny = y + dy[k], nx = x + dx[k];
          if (ny < 0 || nx < 0 || ny >= h || nx >= w || !mask(ny, nx) || visited(ny, nx)) continue;
          visited(ny, nx) = 1;
          stack.emplace_back(ny, nx);
        }
      }
      if (static_cast<std::int64_t>(component.size()) >= min_pixels)
        for (const auto& [y, x] : component) out(y, x) = 1;
    }
  }
  return out;
}

std::vector<BinaryTarget> extract_targets(const ImageRecord& record, const ClassMap& classes,
                                          std::int64_t min_pixels, int channel_threshold, ExclusionMode mode) {
  if (min_pixels < 0) throw ValidationError("min_pixels must be non-negative");
  auto masks = parse_color_mask(record.color_mask, classes, channel_threshold);
  std::vector<BinaryTarget> targets;
  for (const auto& cls : classes) {
    Mask& m = masks.at(cls.code);
    if (mode == ExclusionMode::component) m = drop_small_components(m, min_pixels);
    const auto n = count_foreground(m);
    if (n == 0 || n < min_pixels) continue;
    targets.push_back({record.image_id, cls.code, std::move(m), n});
  }
  return targets;
}

std::size_t train_count(std::size_t n, double ratio) {
  const auto k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  return std::clamp<std::size_t>(k, 1, n - 1);
}

DatasetSplit split_dataset(const std::vector<TargetKey>& targets, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("split ratio must lie strictly between 0 and 1");
  std::map<std::string, std::set<std::string>> by_task;
  for (const auto& t : targets) by_task[t.class_code].insert(t.image_id);

  DatasetSplit split;
  for (const auto& [task, id_set] : by_task) {
    if (id_set.size() < 2)
      throw ValidationError("task " + task + " has " + std::to_string(id_set.size()) +
                            " target(s); at least 2 are needed for a train/test split");
    std::vector<std::string> ids(id_set.begin(), id_set.end());
    const std::uint64_t task_hash = fnv1a(task);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(task_hash), static_cast<std::uint32_t>(task_hash >> 32)};
    std::mt19937_64 rng(seq);
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto k = train_count(ids.size(), ratio);
    TaskSplit ts;
    ts.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
    ts.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end());
    std::sort(ts.train.begin(), ts.train.end());
    std::sort(ts.test.begin(), ts.test.end());
    split.emplace(task, std::move(ts));
  }
  return split;
}

EncoderInput resize_for_encoder(const ImageRecord& record, const std::vector<BinaryTarget>& targets, int side) {
  if (side < 16 || side % 16 != 0)
    throw ValidationError("encoder side " + std::to_string(side) + " must be a positive multiple of 16");
  EncoderInput out;
  out.original_size = record.original_size;
  out.image = resize_image(record.image, side, side);
  out.masks.reserve(targets.size());
  for (const auto& t : targets) out.masks.push_back(resize_nearest(t.mask, side, side));
  return out;
}

NormalizedImage normalize_image(const RgbImage& image, const PixelNormalization& norm) {
  const Eigen::Index n = static_cast<Eigen::Index>(image.height()) * image.width();
  NormalizedImage out(3, n);
  for (int c = 0; c < 3; ++c) {
    const Eigen::Map<const Eigen::Array<std::uint8_t, 1, Eigen::Dynamic>> flat(image.channels[c].data(), n);
    out.row(c) = ((flat.cast<float>() - norm.mean[c]) / norm.std[c]).matrix();
  }
  return out;
}

}  // namespace aquaseg
