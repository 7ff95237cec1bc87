#include <doctest.h>

#include "aquaseg/config.hpp"
#include "aquaseg/image.hpp"
#include "aquaseg/manifest.hpp"
#include "aquaseg/synth.hpp"
#include "test_util.hpp"

using namespace aquaseg;

namespace {

DatasetConfig dataset_at(const std::filesystem::path& root) {
  DatasetConfig d;
  d.root = root.string();
  return d;
}

// One image whose mask is background plus a `fg` x `fg` square of class `code`.
void write_pair(const std::filesystem::path& root, const std::string& id, const std::string& code, int fg) {
  const auto classes = default_suim_classes();
  std::map<std::string, Mask> masks;
  for (const auto& c : classes) masks[c.code] = Mask::Zero(32, 32);
  masks[classes.front().code].setOnes();
  masks[classes.front().code].topLeftCorner(fg, fg).setZero();
  masks[code].topLeftCorner(fg, fg).setOnes();
  std::filesystem::create_directories(root / "images");
  std::filesystem::create_directories(root / "masks");
  write_image(root / "images" / (id + ".ppm"), RgbImage(32, 32));
  write_image(root / "masks" / (id + ".bmp"), paint_color_mask(masks, classes));
}

}  // namespace

TEST_CASE("manifest of the synthetic set") {
  TempDir dir;
  const auto classes = default_suim_classes();
  (void)generate_synthetic_dataset(dir.path, classes, {10, 0, 256, false});
  std::vector<std::string> warnings;
  const auto m = build_manifest(dataset_at(dir.path), classes, &warnings);
  CHECK(warnings.empty());
  CHECK(m.images.size() == 10);
  CHECK(m.split.size() == 8);
  CHECK(m.excluded_tasks.empty());
  CHECK(m.excluded_targets == 0);
  for (const auto& [task, s] : m.split) {
    CHECK(s.train.size() >= 1);
    CHECK(s.test.size() >= 1);
  }
  CHECK(m.image("synth_004").size == Size2{256, 256});
  CHECK_THROWS_AS((void)m.image("nope"), ValidationError);

  const std::string text = manifest_json(m);
  CHECK(parse_manifest(text, "m") == m);
  CHECK(manifest_json(build_manifest(dataset_at(dir.path), classes, nullptr)) == text);
  CHECK(manifest_summary_json(m).find("\"BW\": 10") != std::string::npos);
}

TEST_CASE("pixel threshold and small tasks") {
  TempDir dir;
  write_pair(dir.path, "a", "FV", 10);  // 100 px: admitted
  write_pair(dir.path, "b", "FV", 10);
  write_pair(dir.path, "c", "RO", 9);   // 81 px: excluded
  write_pair(dir.path, "d", "WR", 12);  // single WR target: task dropped
  std::vector<std::string> warnings;
  const auto m = build_manifest(dataset_at(dir.path), default_suim_classes(), &warnings);
  CHECK(m.targets_per_class.at("FV") == 2);
  CHECK(m.excluded_targets == 1);
  CHECK(m.split.count("FV") == 1);
  CHECK(m.split.count("RO") == 0);
  CHECK(m.split.count("WR") == 0);
  CHECK(std::find(m.excluded_tasks.begin(), m.excluded_tasks.end(), "WR") != m.excluded_tasks.end());
  CHECK_FALSE(warnings.empty());
}

TEST_CASE("ingestion errors name the file") {
  TempDir dir;
  const auto classes = default_suim_classes();
  std::vector<std::string> warnings;

  SUBCASE("empty dataset") {
    std::filesystem::create_directories(dir.path / "images");
    std::filesystem::create_directories(dir.path / "masks");
    try {
      (void)build_manifest(dataset_at(dir.path), classes, &warnings);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("no images found") != std::string::npos);
    }
  }
  SUBCASE("missing mask") {
    write_pair(dir.path, "a", "FV", 10);
    write_image(dir.path / "images" / "b.ppm", RgbImage(32, 32));
    CHECK_THROWS_WITH_AS(build_manifest(dataset_at(dir.path), classes, &warnings),
                         doctest::Contains("b.ppm"), ValidationError);
  }
  SUBCASE("unknown colour") {
    write_pair(dir.path, "a", "FV", 10);
    RgbImage bad(32, 32);
    bad.channels[0](3, 5) = 255;
    write_image(dir.path / "masks" / "a.bmp", bad);
    ClassMap without_ro;
    for (const auto& c : classes)
      if (c.code != "RO") without_ro.push_back(c);
    try {
      (void)build_manifest(dataset_at(dir.path), without_ro, &warnings);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("a.bmp") != std::string::npos);
      CHECK(msg.find("row 3, col 5") != std::string::npos);
    }
  }
  SUBCASE("size mismatch") {
    write_pair(dir.path, "a", "FV", 10);
    write_image(dir.path / "images" / "a.ppm", RgbImage(16, 32));
    CHECK_THROWS_AS(build_manifest(dataset_at(dir.path), classes, &warnings), ValidationError);
  }
}
