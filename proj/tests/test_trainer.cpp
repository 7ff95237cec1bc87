#include <doctest.h>

#include "aquaseg/pipeline.hpp"
#include "synth_fixture.hpp"

using namespace aquaseg;

namespace {

TrainConfig quick_config(std::int64_t steps) {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.batch_size = 2;
  c.max_steps = steps;
  c.val_fraction = 0;
  c.checkpoint_every = 0;
  return c;
}

bool same_params(const DecoderParams<double>& a, const DecoderParams<double>& b) {
  bool same = true;
  visit_tensors([&](const std::string&, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    same = same && (x.array() == y.array()).all();
  }, a, b);
  return same;
}

}  // namespace

TEST_CASE("parameter partition") {
  const auto f = make_synth_fixture(2, 160, 16, 0);
  const auto part = parameter_partition(f.pipeline);
  int frozen = 0, trainable = 0;
  for (const auto& e : part) {
    if (e.role == ParameterRole::frozen) {
      ++frozen;
      CHECK((e.name.rfind("encoder.", 0) == 0 || e.name.rfind("prompt.", 0) == 0));
    } else {
      ++trainable;
      CHECK(e.name.rfind("decoder.", 0) == 0);
    }
  }
  CHECK(frozen == 7);  // 4 encoder tensors + 3 prompt tensors
  CHECK(trainable > 0);

  CHECK_THROWS_AS(partition_parameters({"decoder.a", "other.b"}), ValidationError);
  CHECK_THROWS_AS(partition_parameters({"decoder.a"}, {{"decoder."}, {"decoder."}}), ValidationError);
  CHECK_THROWS_AS(partition_parameters({"encoder.a", "prompt.b"}), ValidationError);
}

TEST_CASE("training leaves frozen parameters untouched and moves the decoder") {
  auto f = make_synth_fixture(4, 160, 16, 1);
  const auto frozen_before = frozen_parameter_bytes(f.pipeline);
  const auto decoder_before = f.pipeline.decoder;
  (void)train(f.pipeline, f.train, {}, quick_config(5), {});
  CHECK(frozen_parameter_bytes(f.pipeline) == frozen_before);
  CHECK_FALSE(same_params(f.pipeline.decoder, decoder_before));
}

TEST_CASE("trajectory is a pure function of data, config and seed") {
  auto a = make_synth_fixture(4, 160, 16, 2);
  auto b = make_synth_fixture(4, 160, 16, 2);
  auto c = make_synth_fixture(4, 160, 16, 2);
  auto cfg = quick_config(6);
  const auto ra = train(a.pipeline, a.train, {}, cfg, {});
  const auto rb = train(b.pipeline, b.train, {}, cfg, {});
  CHECK(ra.state.history == rb.state.history);
  CHECK(same_params(a.pipeline.decoder, b.pipeline.decoder));
  cfg.seed = 99;
  const auto rc = train(c.pipeline, c.train, {}, cfg, {});
  CHECK_FALSE(rc.state.history == ra.state.history);

  for (const auto& r : ra.state.history) CHECK(r.total == r.dice + r.ce);
  CHECK(ra.state.history.size() == 6);
  CHECK(ra.state.adam.step == 6);
}

TEST_CASE("checkpoint events") {
  auto f = make_synth_fixture(4, 160, 16, 3);
  auto cfg = quick_config(5);
  cfg.checkpoint_every = 2;
  std::vector<std::pair<CheckpointKind, std::int64_t>> events;
  const CheckpointSink<double> sink = [&](CheckpointKind k, std::int64_t step, const DecoderParams<double>&) {
    events.emplace_back(k, step);
  };
  (void)train(f.pipeline, f.train, {}, cfg, {}, sink);
  const std::vector<std::pair<CheckpointKind, std::int64_t>> expected{{CheckpointKind::periodic, 2},
                                                                      {CheckpointKind::periodic, 4},
                                                                      {CheckpointKind::final, 5},
                                                                      {CheckpointKind::best, 5}};
  CHECK(events == expected);
}

TEST_CASE("validation hold-out selects the best checkpoint") {
  auto f = make_synth_fixture(6, 160, 16, 4);
  auto [train_set, val_set] = split_validation(f.train, 0.25, 4);
  CHECK(val_set.size() == static_cast<std::size_t>(std::llround(0.25 * static_cast<double>(f.train.size()))));
  CHECK(train_set.size() + val_set.size() == f.train.size());
  auto cfg = quick_config(0);
  cfg.max_epochs = 2;
  const auto r = train(f.pipeline, train_set, val_set, cfg, {});
  REQUIRE(r.best_val_loss.has_value());
  CHECK(r.best_step > 0);
  CHECK(r.best_step <= r.state.step);
  CHECK(*r.best_val_loss == doctest::Approx(evaluate_loss(Pipeline<double>{f.pipeline.encoder, f.pipeline.prompt,
                                                                           f.pipeline.decoder_config, r.best,
                                                                           f.pipeline.input_side},
                                                          val_set, cfg.dice_eps)
                                                .total));
  // a steps-per-epoch of ceil(n / batch) over two epochs
  CHECK(r.state.step == 2 * static_cast<std::int64_t>((train_set.size() + 1) / 2));
}

TEST_CASE("missing embeddings fail before the first step") {
  auto f = make_synth_fixture(3, 160, 16, 5);
  f.train.back().embedding.reset();
  int calls = 0;
  const CheckpointSink<double> sink = [&](CheckpointKind, std::int64_t, const DecoderParams<double>&) { ++calls; };
  CHECK_THROWS_AS(train(f.pipeline, f.train, {}, quick_config(3), {}, sink), MissingArtifactError);
  CHECK(calls == 0);
}

TEST_CASE("divergence keeps the last good parameters") {
  auto f = make_synth_fixture(3, 160, 16, 6);
  f.pipeline.decoder.upscale2_bias(0, 0) = std::numeric_limits<double>::quiet_NaN();
  std::vector<CheckpointKind> kinds;
  const CheckpointSink<double> sink = [&](CheckpointKind k, std::int64_t step, const DecoderParams<double>&) {
    kinds.push_back(k);
    CHECK(step == 0);
  };
  CHECK_THROWS_AS(train(f.pipeline, f.train, {}, quick_config(3), {}, sink), DivergenceError);
  CHECK(kinds == std::vector<CheckpointKind>{CheckpointKind::last_good});
}

TEST_CASE("single precision training runs") {
  auto f = make_synth_fixture(3, 160, 16, 7);
  Pipeline<float> p{f.pipeline.encoder, f.pipeline.prompt, f.pipeline.decoder_config,
                    cast_params<float>(f.pipeline.decoder), f.pipeline.input_side};
  const auto r = train(p, f.train, {}, quick_config(3), {});
  CHECK(r.state.history.size() == 3);
  for (const auto& h : r.state.history) CHECK(std::isfinite(h.total));
}

TEST_CASE("config validation and history CSV") {
  TrainConfig c;
  CHECK_NOTHROW(validate(c));
  c.learning_rate = 0;
  CHECK_THROWS_AS(validate(c), ValidationError);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(validate(c), ValidationError);
  c = {};
  c.lr_schedule = "cosine";
  CHECK_THROWS_AS(validate(c), ValidationError);
  CHECK(make_lr_schedule(TrainConfig{})(1234) == 1e-5);

  const std::string csv = history_csv({{1, 0.5, 0.25, 0.75}});
  CHECK(csv == "step,dice,ce,total\n1,0.5,0.25,0.75\n");
}
