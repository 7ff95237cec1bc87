#include <doctest.h>

#include "aquaseg/config.hpp"
#include "test_util.hpp"

using namespace aquaseg;

namespace {

std::string error_of(const std::string& text) {
  try {
    (void)parse_config(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("empty config yields documented defaults") {
  const auto c = parse_config("{}");
  CHECK(c == PipelineConfig{});
  CHECK(c.dataset.channel_threshold == 127);
  CHECK(c.dataset.min_pixels == 100);
  CHECK(c.classes.size() == 8);
  CHECK(c.prompt.max_offset == 20);
  CHECK(c.prompt.outward_only);
  CHECK(c.train.learning_rate == 1e-5);
  CHECK(c.train.dice_eps == 1.0);
  CHECK(c.precision == Precision::float64);
  CHECK(c.eval.threshold == 0.0);
}

TEST_CASE("serialize and parse round trip") {
  auto c = parse_config(R"({"train": {"learning_rate": 0.001, "tasks": ["BW", "FV"]},
                            "dataset": {"exclusion": "component"}, "decoder": {"precision": "float"},
                            "eval": {"iou_mode": "mean_fg_bg"}})");
  CHECK(c.train.tasks == std::vector<std::string>{"BW", "FV"});
  CHECK(c.dataset.exclusion == ExclusionMode::component);
  CHECK(c.precision == Precision::float32);
  const std::string text = serialize_config(c);
  CHECK(parse_config(text) == c);
  CHECK(serialize_config(parse_config(text)) == text);
}

TEST_CASE("unknown keys and wrong types are named") {
  CHECK(error_of(R"({"train": {"learning_rat": 1}})") == "unknown config key train.learning_rat");
  CHECK(error_of(R"({"bogus": 1})") == "unknown config key bogus");
  CHECK(error_of(R"({"encoder": {"normalization": {"mean": [0,0,0], "sd": 1}}})").find("encoder.normalization.sd") !=
        std::string::npos);
  CHECK(error_of(R"({"classes": [{"code": "BW", "name": "x", "color": [0,0,0], "extra": 1}]})")
            .find("classes[0].extra") != std::string::npos);
  CHECK(error_of(R"({"train": {"batch_size": "four"}})").find("train.batch_size") != std::string::npos);
  CHECK(error_of(R"({"eval": {"iou_mode": "weird"}})").find("weird") != std::string::npos);
  CHECK(error_of("{not json").find("invalid JSON") != std::string::npos);
}

TEST_CASE("cross-field validation") {
  CHECK(error_of(R"({"decoder": {"embed_dim": 64}})").find("embed_dim") != std::string::npos);
  CHECK_FALSE(error_of(R"({"synth": {"image_size": 100}})").empty());
  CHECK_FALSE(error_of(R"({"synth": {"image_size": 250}})").empty());
  CHECK_FALSE(error_of(R"({"train": {"tasks": ["XX"]}})").empty());
  CHECK_FALSE(error_of(R"({"encoder": {"kind": "external"}})").empty());
  CHECK_FALSE(error_of(R"({"prompt": {"max_offset": -1}})").empty());
  CHECK(error_of(R"({"encoder": {"embed_dim": 64}, "decoder": {"embed_dim": 64}})").empty());
}

TEST_CASE("overrides") {
  const std::string base = R"({"train": {"learning_rate": 0.001}})";
  auto c = parse_config(apply_override(base, "train.learning_rate=0.5"));
  CHECK(c.train.learning_rate == 0.5);
  c = parse_config(apply_override(base, "output.run_dir=somewhere"));
  CHECK(c.output.run_dir == "somewhere");
  c = parse_config(apply_override(base, "prompt.outward_only=false"));
  CHECK_FALSE(c.prompt.outward_only);
  CHECK_THROWS_AS(apply_override(base, "novalue"), ValidationError);
  CHECK_THROWS_AS(apply_override(base, "train.learning_rate.x=1"), ValidationError);
  CHECK_THROWS_AS(parse_config(apply_override(base, "train.nope=1")), ValidationError);
}

TEST_CASE("derived prompt settings") {
  PromptConfig p;
  CHECK(fourier_spec(p, 32).num_frequencies == 16);
  p.num_frequencies = 4;
  p.scale = 2.0;
  p.seed = 9;
  const auto s = fourier_spec(p, 32);
  CHECK(s.num_frequencies == 4);
  CHECK(s.scale == 2.0);
  CHECK(s.seed == 9);
  CHECK(perturb_options(p).max_offset == 20);
  CHECK(perturb_options(p).outward_only);
}

TEST_CASE("load_config reads files") {
  TempDir dir;
  write_text(dir.path / "c.json", R"({"synth": {"n_images": 3}})");
  CHECK(load_config(dir.path / "c.json").synth.n_images == 3);
  CHECK_THROWS_AS(load_config(dir.path / "missing.json"), ValidationError);
}

TEST_CASE("shipped configs load") {
  const std::filesystem::path configs = std::filesystem::path(AQUASEG_TEST_DATA) / ".." / ".." / "configs";
  const auto toy = load_config(configs / "toy.json");
  CHECK(toy.encoder.embed_dim == 32);
  CHECK(toy.train.max_steps == 200);
  const auto sam = load_config(configs / "sam_vit_b.json");
  CHECK(sam.encoder.kind == EncoderKind::external);
  CHECK(sam.decoder.embed_dim == 256);
  CHECK(sam.encoder.input_side == 1024);
  CHECK(sam.train.learning_rate == 1e-5);
}
