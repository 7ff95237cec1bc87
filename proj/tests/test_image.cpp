#include <doctest.h>

#include <filesystem>

#include "aquaseg/image.hpp"
#include "aquaseg/random.hpp"
#include "test_util.hpp"

using namespace aquaseg;

namespace {

RgbImage random_image(int h, int w, std::uint64_t seed) {
  Rng rng = make_rng(seed, 1);
  std::uniform_int_distribution<int> px(0, 255);
  RgbImage img(h, w);
  for (auto& c : img.channels)
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = static_cast<std::uint8_t>(px(rng));
  return img;
}

}  // namespace

TEST_CASE("PPM and BMP round-trip exactly") {
  const TempDir dir;
  for (const auto& [h, w] : {std::pair{1, 1}, {3, 5}, {7, 2}, {16, 13}}) {
    const RgbImage img = random_image(h, w, static_cast<std::uint64_t>(h * 100 + w));
    for (const char* ext : {".ppm", ".bmp"}) {
      const auto path = dir.path / (std::string("img") + ext);
      write_image(path, img);
      CHECK(read_image(path) == img);
    }
  }
}

TEST_CASE("JPEG decoding") {
  const RgbImage img = read_image(std::filesystem::path(AQUASEG_TEST_DATA) / "two_tone.jpg");
  REQUIRE(img.height() == 8);
  REQUIRE(img.width() == 16);
  CHECK(std::abs(img.channels[0](2, 2) - 200) <= 4);
  CHECK(std::abs(img.channels[2](2, 2) - 30) <= 4);
  CHECK(std::abs(img.channels[0](5, 12) - 20) <= 4);
  CHECK(std::abs(img.channels[2](5, 12) - 220) <= 4);
}

TEST_CASE("unsupported or malformed files are rejected") {
  const TempDir dir;
  CHECK_FALSE(is_supported_image("a.png"));
  CHECK(is_supported_image("a.JPG"));
  CHECK_THROWS_AS(write_image(dir.path / "x.png", RgbImage(2, 2)), ValidationError);
  write_text(dir.path / "bad.bmp", "not a bitmap");
  CHECK_THROWS_AS(read_image(dir.path / "bad.bmp"), ValidationError);
  write_text(dir.path / "bad.jpg", "not a jpeg");
  CHECK_THROWS_AS(read_image(dir.path / "bad.jpg"), ValidationError);
}

TEST_CASE("bilinear resize") {
  const Grid<double> g = Grid<double>::Random(5, 7);
  CHECK((resize_bilinear(g, 5, 7) == g).all());

  const auto c = resize_bilinear(Grid<double>::Constant(3, 4, 2.5).eval(), 11, 9);
  CHECK((c - 2.5).abs().maxCoeff() < 1e-12);

  // 2x upsampling of [0, 1]: half-pixel centres give 0, 0.25, 0.75, 1.
  Grid<double> row(1, 2);
  row << 0.0, 1.0;
  const auto up = resize_bilinear(row, 1, 4);
  CHECK(up(0, 0) == doctest::Approx(0.0));
  CHECK(up(0, 1) == doctest::Approx(0.25));
  CHECK(up(0, 2) == doctest::Approx(0.75));
  CHECK(up(0, 3) == doctest::Approx(1.0));
}

TEST_CASE("nearest resize keeps masks binary and is the identity at the same size") {
  Rng rng = make_rng(3, 0);
  std::bernoulli_distribution coin(0.3);
  for (int trial = 0; trial < 20; ++trial) {
    Mask m(13 + trial, 29 - trial);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = coin(rng);
    CHECK((resize_nearest(m, static_cast<int>(m.rows()), static_cast<int>(m.cols())) == m).all());
    const Mask r = resize_nearest(m, 64, 48);
    CHECK(((r == 0) || (r == 1)).all());
  }
}

TEST_CASE("resize_image shape and identity") {
  const RgbImage img = random_image(48, 64, 9);
  CHECK(resize_image(img, 48, 64) == img);
  const RgbImage big = resize_image(img, 1024, 1024);
  CHECK(big.height() == 1024);
  CHECK(big.width() == 1024);
}
