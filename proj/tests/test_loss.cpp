#include <doctest.h>

#include <cmath>

#include "aquaseg/adam.hpp"
#include "aquaseg/loss.hpp"
#include "aquaseg/random.hpp"

using namespace aquaseg;

namespace {

Mask half_foreground_4x4() {
  Mask t = Mask::Zero(4, 4);
  t.topRows(2).setOnes();
  return t;
}

}  // namespace

TEST_CASE("dice_loss hand-computed values") {
  const Mask t = half_foreground_4x4();
  CHECK(dice_loss(t.cast<double>().eval(), t, 1.0) == doctest::Approx(0.0).epsilon(1e-15));

  const Grid<double> inverse = 1.0 - t.cast<double>();
  CHECK(dice_loss(inverse, t, 1.0) == doctest::Approx(16.0 / 17.0));

  const Grid<double> half = Grid<double>::Constant(2, 2, 0.5);
  CHECK(dice_loss(half, Mask::Ones(2, 2).eval(), 1.0) == doctest::Approx(2.0 / 7.0));

  CHECK_THROWS_AS(dice_loss(half, t, 1.0), ValidationError);
}

TEST_CASE("ce_loss hand-computed values") {
  const Mask t = half_foreground_4x4();
  CHECK(ce_loss(Grid<double>::Zero(4, 4).eval(), t) == doctest::Approx(std::log(2.0)));

  const Grid<double> saturated = t.cast<double>() * 40.0 - 20.0;
  CHECK(ce_loss(saturated, t) < 1e-8);

  Grid<double> one(1, 1);
  one << 1.0;
  CHECK(ce_loss(one, Mask::Ones(1, 1).eval()) == doctest::Approx(std::log1p(std::exp(-1.0))));

  Grid<double> huge(1, 2);
  huge << 800.0, -800.0;
  Mask wrong(1, 2);
  wrong << 0, 1;
  CHECK(std::isfinite(ce_loss(huge, wrong)));
  CHECK(ce_loss(huge, wrong) == doctest::Approx(800.0));
}

TEST_CASE("total_loss composes without weights") {
  const Mask t = half_foreground_4x4();
  const auto zero = total_loss(Grid<double>::Zero(4, 4).eval(), t, 1.0);
  CHECK(zero.total == doctest::Approx(dice_loss(Grid<double>::Constant(4, 4, 0.5).eval(), t, 1.0) + std::log(2.0)));

  const Grid<double> saturated = t.cast<double>() * 40.0 - 20.0;
  CHECK(total_loss(saturated, t, 1.0).total < 1e-6);

  Rng rng = make_rng(5, 0);
  for (int i = 0; i < 50; ++i) {
    const Grid<double> z = gaussian_matrix<double>(6, 7, 3.0, rng).array();
    const Mask m = (gaussian_matrix<double>(6, 7, 1.0, rng).array() > 0).cast<std::uint8_t>();
    const auto terms = total_loss(z, m, 1.0);
    CHECK(terms.total == terms.dice + terms.ce);
    CHECK(terms.dice >= 0.0);
    CHECK(terms.dice < 1.0);
    CHECK(terms.ce >= 0.0);
  }
}

TEST_CASE("logit gradient matches central differences") {
  Rng rng = make_rng(17, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const Grid<double> z = gaussian_matrix<double>(8, 8, 2.0, rng).array();
    const Mask t = (gaussian_matrix<double>(8, 8, 1.0, rng).array() > 0.3).cast<std::uint8_t>();
    Grid<double> grad;
    total_loss_with_grad(z, t, 1.0, grad);
    Grid<double> probe = z;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double h = 1e-6;
      probe.data()[i] = z.data()[i] + h;
      const double up = total_loss(probe, t, 1.0).total;
      probe.data()[i] = z.data()[i] - h;
      const double down = total_loss(probe, t, 1.0).total;
      probe.data()[i] = z.data()[i];
      const double numeric = (up - down) / (2 * h);
      const double rel = std::abs(numeric - grad.data()[i]) / std::max({std::abs(numeric), std::abs(grad.data()[i]), 1e-8});
      CHECK(rel < 1e-3);
    }
  }
}

TEST_CASE("adam_step") {
  DecoderParams<double> p;
  p.layers.clear();
  p.iou_token = Eigen::MatrixXd::Constant(1, 1, 2.0);
  auto g = zeros_like(p);
  auto state = AdamState<double>::zeros_for(p);
  AdamOptions opts;
  opts.learning_rate = 0.1;

  SUBCASE("step 1 with unit gradient moves by lr") {
    g.iou_token(0, 0) = 1.0;
    adam_step(p, g, state, opts);
    CHECK(p.iou_token(0, 0) == doctest::Approx(2.0 - 0.1 / (1.0 + 1e-8)));
    CHECK(state.m.iou_token(0, 0) == doctest::Approx(0.1));
    CHECK(state.v.iou_token(0, 0) == doctest::Approx(0.001));
  }
  SUBCASE("zero gradient leaves parameters and decays moments") {
    state.m.iou_token(0, 0) = 0.5;
    state.v.iou_token(0, 0) = 0.25;
    adam_step(p, g, state, opts);
    CHECK(state.m.iou_token(0, 0) == doctest::Approx(0.45));
    CHECK(state.v.iou_token(0, 0) == doctest::Approx(0.24975));
    // With nonzero first moment the parameter moves; restart from clean moments for the pure case.
    auto q = p;
    q.iou_token(0, 0) = 2.0;
    auto clean = AdamState<double>::zeros_for(q);
    adam_step(q, g, clean, opts);
    CHECK(q.iou_token(0, 0) == 2.0);
  }
  SUBCASE("identical states give identical results") {
    g.iou_token(0, 0) = -0.3;
    auto p2 = p;
    auto s2 = state;
    adam_step(p, g, state, opts);
    adam_step(p2, g, s2, opts);
    CHECK(p.iou_token(0, 0) == p2.iou_token(0, 0));
  }
  SUBCASE("non-finite gradient aborts before updating") {
    g.iou_token(0, 0) = std::nan("");
    CHECK_THROWS_AS(adam_step(p, g, state, opts), DivergenceError);
    CHECK(state.step == 0);
    CHECK(p.iou_token(0, 0) == 2.0);
  }
}
