#include "aquaseg/manifest.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "aquaseg/config.hpp"

namespace aquaseg {

using nlohmann::json;
namespace fs = std::filesystem;

const ManifestImage& Manifest::image(const std::string& id) const {
  const auto it = std::lower_bound(images.begin(), images.end(), id,
                                   [](const ManifestImage& m, const std::string& v) { return m.image_id < v; });
  if (it == images.end() || it->image_id != id) throw ValidationError("image " + id + " is not in the manifest");
  return *it;
}

namespace {

std::map<std::string, fs::path> list_by_stem(const fs::path& dir, const std::string& what) {
  std::map<std::string, fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || !is_supported_image(e.path())) continue;
    const std::string stem = e.path().stem().string();
    if (!out.emplace(stem, e.path()).second)
      throw ValidationError("two " + what + " files share the stem '" + stem + "' in " + dir.string());
  }
  return out;
}

}  // namespace

Manifest build_manifest(const DatasetConfig& dataset, const ClassMap& classes, std::vector<std::string>* warnings) {
  const fs::path root(dataset.root);
  if (!fs::is_directory(root)) throw ValidationError("dataset root does not exist: " + root.string());
  const auto images = list_by_stem(root / "images", "image");
  if (images.empty()) throw ValidationError("no images found in " + (root / "images").string());
  const auto masks = list_by_stem(root / "masks", "mask");

  Manifest m;
  m.dataset_root = dataset.root;
  m.split_ratio = dataset.split_ratio;
  m.split_seed = dataset.split_seed;
  for (const auto& cls : classes) m.targets_per_class[cls.code] = 0;

  for (const auto& [id, image_path] : images) {
    const auto mit = masks.find(id);
    if (mit == masks.end()) throw ValidationError("image " + image_path.string() + " has no mask in " + (root / "masks").string());
    ImageRecord rec;
    rec.image_id = id;
    rec.image = read_image(image_path);
    rec.color_mask = read_image(mit->second);
    rec.original_size = rec.image.size();
    if (rec.image.size() != rec.color_mask.size())
      throw ValidationError(mit->second.string() + ": mask size differs from its image");

    std::map<std::string, Mask> parsed;
    try {
      parsed = parse_color_mask(rec.color_mask, classes, dataset.channel_threshold);
    } catch (const ValidationError& e) {
      throw ValidationError(mit->second.string() + ": " + e.what());
    }
    for (const auto& cls : classes) {
      const Mask& mask = parsed.at(cls.code);
      const std::int64_t n = count_foreground(mask);
      if (n == 0) continue;
      if (dataset.exclusion == ExclusionMode::whole_mask) {
        if (n < dataset.min_pixels) {
          ++m.excluded_targets;
          continue;
        }
        m.targets.push_back({{id, cls.code}, n});
      } else {
        const Mask kept = drop_small_components(mask, dataset.min_pixels);
        const std::int64_t k = count_foreground(kept);
        if (k < n) ++m.excluded_targets;
        if (k > 0) m.targets.push_back({{id, cls.code}, k});
      }
    }
    m.images.push_back({id, fs::relative(image_path, root).generic_string(),
                        fs::relative(mit->second, root).generic_string(), rec.original_size});
  }

  std::map<std::string, std::vector<TargetKey>> by_task;
  for (const auto& t : m.targets) by_task[t.key.class_code].push_back(t.key);
  std::vector<TargetKey> splittable;
  for (const auto& cls : classes) {
    const auto& keys = by_task[cls.code];
    m.targets_per_class[cls.code] = static_cast<std::int64_t>(keys.size());
    if (keys.size() < 2) {
      m.excluded_tasks.push_back(cls.code);
      if (warnings)
        warnings->push_back("task " + cls.code + " has " + std::to_string(keys.size()) +
                            " admitted target(s); excluded from the split");
      continue;
    }
    splittable.insert(splittable.end(), keys.begin(), keys.end());
  }
  if (!splittable.empty()) m.split = split_dataset(splittable, dataset.split_ratio, dataset.split_seed);
  return m;
}

std::string manifest_json(const Manifest& m) {
  json images = json::array();
  for (const auto& im : m.images)
    images.push_back({{"id", im.image_id},
                      {"image", im.image_file},
                      {"mask", im.mask_file},
                      {"height", im.size.height},
                      {"width", im.size.width}});
  json targets = json::array();
  for (const auto& t : m.targets)
    targets.push_back({{"image", t.key.image_id}, {"task", t.key.class_code}, {"pixels", t.pixel_count}});
  json split = json::object();
  for (const auto& [task, s] : m.split) split[task] = {{"train", s.train}, {"test", s.test}};
  const json j = {{"dataset_root", m.dataset_root},
                  {"split_ratio", m.split_ratio},
                  {"split_seed", m.split_seed},
                  {"images", images},
                  {"targets", targets},
                  {"split", split},
                  {"excluded_tasks", m.excluded_tasks},
                  {"excluded_targets", m.excluded_targets},
                  {"targets_per_class", m.targets_per_class}};
  return j.dump(2) + "\n";
}

Manifest parse_manifest(const std::string& text, const std::string& source) {
  Manifest m;
  try {
    const json j = json::parse(text);
    m.dataset_root = j.at("dataset_root").get<std::string>();
    m.split_ratio = j.at("split_ratio").get<double>();
    m.split_seed = j.at("split_seed").get<std::uint64_t>();
    for (const auto& im : j.at("images"))
      m.images.push_back({im.at("id").get<std::string>(), im.at("image").get<std::string>(),
                          im.at("mask").get<std::string>(), {im.at("height").get<int>(), im.at("width").get<int>()}});
    for (const auto& t : j.at("targets"))
      m.targets.push_back(
          {{t.at("image").get<std::string>(), t.at("task").get<std::string>()}, t.at("pixels").get<std::int64_t>()});
    for (const auto& [task, s] : j.at("split").items())
      m.split[task] = {s.at("train").get<std::vector<std::string>>(), s.at("test").get<std::vector<std::string>>()};
    m.excluded_tasks = j.at("excluded_tasks").get<std::vector<std::string>>();
    m.excluded_targets = j.at("excluded_targets").get<std::int64_t>();
    m.targets_per_class = j.at("targets_per_class").get<std::map<std::string, std::int64_t>>();
  } catch (const json::exception& e) {
    throw CorruptArtifactError(source + ": malformed manifest: " + e.what());
  }
  return m;
}

std::string manifest_summary_json(const Manifest& m) {
  std::int64_t train = 0, test = 0;
  for (const auto& [_, s] : m.split) {
    train += static_cast<std::int64_t>(s.train.size());
    test += static_cast<std::int64_t>(s.test.size());
  }
  const json j = {{"images", m.images.size()},
                  {"targets", m.targets.size()},
                  {"targets_per_class", m.targets_per_class},
                  {"excluded_targets", m.excluded_targets},
                  {"excluded_tasks", m.excluded_tasks},
                  {"tasks", m.split.size()},
                  {"train_targets", train},
                  {"test_targets", test}};
  return j.dump(2) + "\n";
}

}  // namespace aquaseg
