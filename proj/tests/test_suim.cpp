#include <doctest.h>

#include <set>

#include "aquaseg/random.hpp"
#include "aquaseg/suim.hpp"

using namespace aquaseg;

namespace {

RgbImage solid(int h, int w, std::array<int, 3> rgb) {
  RgbImage img(h, w);
  for (int c = 0; c < 3; ++c) img.channels[c].setConstant(static_cast<std::uint8_t>(rgb[c]));
  return img;
}

void set_pixel(RgbImage& img, int y, int x, std::array<int, 3> rgb) {
  for (int c = 0; c < 3; ++c) img.channels[c](y, x) = static_cast<std::uint8_t>(rgb[c]);
}

std::vector<TargetKey> keys_for(const std::string& task, int n) {
  std::vector<TargetKey> keys;
  for (int i = 0; i < n; ++i) keys.push_back({"img" + std::to_string(i), task});
  return keys;
}

ImageRecord record_with_counts(const std::vector<std::pair<std::string, int>>& counts) {
  const auto classes = default_suim_classes();
  ImageRecord rec;
  rec.image_id = "r";
  rec.color_mask = solid(20, 20, {0, 0, 0});
  rec.image = solid(20, 20, {9, 9, 9});
  rec.original_size = {20, 20};
  int cursor = 0;
  for (const auto& [code, n] : counts) {
    const auto it = std::find_if(classes.begin(), classes.end(), [&](const ClassSpec& c) { return c.code == code; });
    for (int k = 0; k < n; ++k, ++cursor) set_pixel(rec.color_mask, cursor / 20, cursor % 20, it->color);
  }
  return rec;
}

}  // namespace

TEST_CASE("default class map") {
  const auto classes = default_suim_classes();
  REQUIRE(classes.size() == 8);
  std::vector<std::string> codes;
  for (const auto& c : classes) codes.push_back(c.code);
  CHECK(codes == std::vector<std::string>{"BW", "HD", "PF", "WR", "RO", "RI", "FV", "SR"});
  CHECK_NOTHROW(validate_class_map(classes, 127));

  auto dup = classes;
  dup[1].color = dup[0].color;
  CHECK_THROWS_AS(validate_class_map(dup, 127), ValidationError);
  auto near = classes;
  near[1].color = {10, 10, 10};  // binarizes onto BW
  CHECK_THROWS_AS(validate_class_map(near, 127), ValidationError);
}

TEST_CASE("parse_color_mask lookups") {
  const auto classes = default_suim_classes();
  const auto fv = parse_color_mask(solid(1, 1, {255, 255, 0}), classes);
  CHECK(fv.at("FV")(0, 0) == 1);
  CHECK(parse_color_mask(solid(1, 1, {0, 0, 0}), classes).at("BW")(0, 0) == 1);
  // compression noise is absorbed by the channel threshold
  CHECK(parse_color_mask(solid(1, 1, {240, 251, 12}), classes).at("FV")(0, 0) == 1);

  RgbImage half = solid(4, 4, {0, 0, 0});
  for (int y = 2; y < 4; ++y)
    for (int x = 0; x < 4; ++x) set_pixel(half, y, x, {255, 255, 255});
  const auto masks = parse_color_mask(half, classes);
  CHECK(masks.size() == 8);
  CHECK(count_foreground(masks.at("BW")) == 8);
  CHECK(count_foreground(masks.at("SR")) == 8);
  int empty = 0;
  for (const auto& [code, m] : masks) empty += count_foreground(m) == 0;
  CHECK(empty == 6);
}

TEST_CASE("unknown colour codes are reported with their location") {
  ClassMap two{{"AA", "a", {0, 0, 0}}, {"BB", "b", {255, 255, 255}}};
  RgbImage img = solid(3, 5, {0, 0, 0});
  set_pixel(img, 2, 4, {255, 0, 0});
  try {
    (void)parse_color_mask(img, two);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2, col 4") != std::string::npos);
    CHECK(msg.find("(255,0,0)") != std::string::npos);
    CHECK(msg.find("code (1,0,0)") != std::string::npos);
  }
}

TEST_CASE("paint then parse recovers random class assignments and partitions pixels") {
  const auto classes = default_suim_classes();
  Rng rng = make_rng(21, 0);
  std::uniform_int_distribution<int> pick(0, 7);
  for (int trial = 0; trial < 25; ++trial) {
    const int h = 1 + trial % 9, w = 1 + (trial * 7) % 13;
    std::map<std::string, Mask> truth;
    for (const auto& c : classes) truth[c.code] = Mask::Zero(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) truth[classes[pick(rng)].code](y, x) = 1;
    const auto parsed = parse_color_mask(paint_color_mask(truth, classes), classes);
    Eigen::ArrayXXi cover = Eigen::ArrayXXi::Zero(h, w);
    for (const auto& c : classes) {
      CHECK((parsed.at(c.code) == truth.at(c.code)).all());
      cover += parsed.at(c.code).cast<int>();
    }
    CHECK((cover == 1).all());
  }
}

TEST_CASE("exclusion rule keeps 100 pixels and drops 99") {
  const auto classes = default_suim_classes();
  const auto rec = record_with_counts({{"HD", 100}, {"FV", 99}});
  const auto targets = extract_targets(rec, classes, 100);
  std::set<std::string> codes;
  for (const auto& t : targets) {
    codes.insert(t.class_code);
    CHECK(t.pixel_count == count_foreground(t.mask));
    CHECK(t.pixel_count >= 100);
  }
  CHECK(codes == std::set<std::string>{"BW", "HD"});

  // raising the threshold never adds a target
  std::size_t previous = targets.size() + 1000;
  for (int min_pixels : {0, 50, 99, 100, 101, 200, 201, 400}) {
    const auto n = extract_targets(rec, classes, min_pixels).size();
    CHECK(n <= previous);
    previous = n;
  }
}

TEST_CASE("component exclusion mode drops small pieces only") {
  Mask m = Mask::Zero(30, 30);
  m.block(0, 0, 10, 10).setOnes();   // 100 px component
  m.block(20, 20, 3, 3).setOnes();   // 9 px component
  const Mask kept = drop_small_components(m, 100);
  CHECK(count_foreground(kept) == 100);
  CHECK(kept(21, 21) == 0);
  // diagonal neighbours are separate components under 4-connectivity
  Mask diag = Mask::Zero(2, 2);
  diag(0, 0) = diag(1, 1) = 1;
  CHECK(count_foreground(drop_small_components(diag, 2)) == 0);
}

TEST_CASE("split_dataset counts, determinism and disjointness") {
  CHECK(train_count(50, 0.8) == 40);
  CHECK(train_count(5, 0.8) == 4);
  CHECK(train_count(2, 0.8) == 1);
  CHECK(train_count(10, 0.99) == 9);

  const auto s50 = split_dataset(keys_for("HD", 50), 0.8, 7);
  CHECK(s50.at("HD").train.size() == 40);
  CHECK(s50.at("HD").test.size() == 10);
  const auto s5 = split_dataset(keys_for("HD", 5), 0.8, 7);
  CHECK(s5.at("HD").train.size() == 4);
  CHECK(s5.at("HD").test.size() == 1);

  auto keys = keys_for("HD", 10);
  const auto more = keys_for("FV", 12);
  keys.insert(keys.end(), more.begin(), more.end());
  const auto a = split_dataset(keys, 0.8, 3);
  const auto b = split_dataset(keys, 0.8, 3);
  CHECK(a == b);
  for (const auto& [task, s] : a) {
    std::set<std::string> train(s.train.begin(), s.train.end()), test(s.test.begin(), s.test.end());
    for (const auto& id : test) CHECK_FALSE(train.count(id));
    CHECK(train.size() + test.size() == (task == "HD" ? 10u : 12u));
  }
  // a different seed gives a different partition of a large task
  CHECK(split_dataset(keys_for("HD", 50), 0.8, 1) != split_dataset(keys_for("HD", 50), 0.8, 2));

  CHECK_THROWS_AS(split_dataset(keys_for("HD", 1), 0.8, 0), ValidationError);
  CHECK_THROWS_AS(split_dataset(keys_for("HD", 10), 1.0, 0), ValidationError);
}

TEST_CASE("resize_for_encoder") {
  ImageRecord rec;
  rec.image_id = "wide";
  rec.image = solid(480, 640, {10, 20, 30});
  rec.color_mask = solid(480, 640, {0, 0, 0});
  rec.original_size = {480, 640};
  BinaryTarget t{"wide", "HD", Mask::Zero(480, 640), 0};
  t.mask.block(100, 200, 50, 60).setOnes();
  const auto in = resize_for_encoder(rec, {t}, 1024);
  CHECK(in.image.height() == 1024);
  CHECK(in.image.width() == 1024);
  CHECK(in.original_size == Size2{480, 640});
  REQUIRE(in.masks.size() == 1);
  CHECK(((in.masks[0] == 0) || (in.masks[0] == 1)).all());
  CHECK_THROWS_AS(resize_for_encoder(rec, {t}, 1000), ValidationError);

  ImageRecord square = rec;
  square.image = solid(64, 64, {1, 2, 3});
  square.original_size = {64, 64};
  CHECK(resize_for_encoder(square, {}, 64).image == square.image);
}

TEST_CASE("normalize_image applies per-channel constants") {
  const auto n = normalize_image(solid(2, 2, {124, 116, 104}));
  CHECK(n.rows() == 3);
  CHECK(n.cols() == 4);
  CHECK(n(0, 0) == doctest::Approx((124 - 123.675) / 58.395));
  CHECK(n(2, 3) == doctest::Approx((104 - 103.53) / 57.375));
}
