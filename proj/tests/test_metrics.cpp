#include <doctest.h>

#include <cmath>

#include "aquaseg/metrics.hpp"
#include "published_table.hpp"
#include "synth_fixture.hpp"

using namespace aquaseg;

namespace {

Mask from_rows(std::initializer_list<std::initializer_list<int>> rows) {
  Mask m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index y = 0;
  for (const auto& r : rows) {
    Eigen::Index x = 0;
    for (int v : r) m(y, x++) = static_cast<std::uint8_t>(v);
    ++y;
  }
  return m;
}

Mask random_mask(Rng& rng, int h, int w, double density) {
  std::bernoulli_distribution coin(density);
  Mask m(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m(y, x) = coin(rng);
  return m;
}

}  // namespace

TEST_CASE("dsc and iou hand examples") {
  const Mask p = from_rows({{1, 1, 0}, {0, 0, 0}});
  const Mask g = from_rows({{0, 1, 1}, {0, 0, 0}});
  CHECK(dsc(p, g) == doctest::Approx(0.5));
  CHECK(iou(p, g) == doctest::Approx(1.0 / 3.0));

  const Mask a = from_rows({{1, 1}, {0, 0}});
  const Mask b = from_rows({{1, 0}, {0, 0}});
  CHECK(dsc(a, b) == doctest::Approx(2.0 / 3.0));
  CHECK(iou(a, b) == doctest::Approx(0.5));

  const Mask empty = Mask::Zero(2, 2);
  CHECK(dsc(empty, empty) == 1.0);
  CHECK(iou(empty, empty) == 1.0);
  CHECK(dsc(a, empty) == 0.0);
  CHECK(iou(empty, a) == 0.0);
  CHECK_THROWS_AS(dsc(a, p), ValidationError);
  CHECK_THROWS_AS(iou(a, p), ValidationError);

  // foreground 1/2, background 2/3
  CHECK(iou(a, b, IouMode::mean_fg_bg) == doctest::Approx(7.0 / 12.0));
}

TEST_CASE("metric laws over random pairs") {
  Rng rng = make_rng(3, 0);
  for (int i = 0; i < 200; ++i) {
    const int h = 1 + i % 17, w = 1 + (i * 7) % 23;
    const Mask p = random_mask(rng, h, w, 0.1 + 0.8 * (i % 5) / 4.0);
    const Mask g = random_mask(rng, h, w, 0.3);
    const double d = dsc(p, g), j = iou(p, g);
    CHECK(d == dsc(g, p));
    CHECK(j == iou(g, p));
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK(std::abs(d - 2 * j / (1 + j)) < 1e-12);
    CHECK(dsc(p, p) == 1.0);
    CHECK(d >= j);
    CHECK((d == j) == (j == 0.0 || j == 1.0));
  }
}

TEST_CASE("relative_improvement and formatting") {
  CHECK(format_percent(*relative_improvement(87.83, 83.04)) == "5.77");
  CHECK(format_percent(*relative_improvement(54.87, 63.06)) == "-12.99");
  CHECK(*relative_improvement(50, 50) == 0.0);
  CHECK_FALSE(relative_improvement(10, 0).has_value());
  CHECK(format_percent(-0.001) == "0.00");
  CHECK(format_percent(1.005000001) == "1.01");
}

TEST_CASE("published table audit") {
  const auto checks = audit_improvements(published_rows(), 0.3);
  REQUIRE(checks.size() == 16);
  int ok = 0;
  std::vector<std::string> deviating;
  for (const auto& c : checks) {
    if (c.within_tolerance) ++ok;
    else deviating.push_back(c.task + " " + c.metric);
  }
  CHECK(ok == 15);
  CHECK(deviating == std::vector<std::string>{"FV DSC"});
  CHECK(checks[0].computed == doctest::Approx(5.768).epsilon(1e-3));
}

TEST_CASE("render_report") {
  const std::vector<MetricsRow> rows{{"BW", 90.0, 80.0, 3}, {"FV", 40.0, 30.0, 2}};
  const std::vector<MetricsRow> base{{"FV", 50.0, 20.0, 0}, {"BW", 80.0, 0.0, 0}};
  const std::string csv = render_report(rows, base, ReportFormat::csv);
  CHECK(csv ==
        "Task,DSC_new,DSC_base,DSC_improve,IoU_new,IoU_base,IoU_improve\n"
        "BW,90.00,80.00,12.50,80.00,0.00,\n"
        "FV,40.00,50.00,-20.00,30.00,20.00,50.00\n"
        "MEAN,65.00,65.00,-3.75,55.00,10.00,50.00\n");

  const std::string md = render_report(rows, base, ReportFormat::markdown, {7, "best.ckpt@1234", "IoU"});
  CHECK(md.rfind("# Segmentation report\n", 0) == 0);
  CHECK(md.find("- seed: 7\n") != std::string::npos);
  CHECK(md.find("| BW | 90.00 | 80.00 | 12.50 | 80.00 | 0.00 |  |\n") != std::string::npos);
  CHECK(md.find("| MEAN | 65.00 | 65.00 | -3.75 | 55.00 | 10.00 | 50.00 |\n") != std::string::npos);

  CHECK(render_report(rows, {}, ReportFormat::csv) == "Task,DSC_new,IoU_new\nBW,90.00,80.00\nFV,40.00,30.00\nMEAN,65.00,55.00\n");
  CHECK_THROWS_AS(render_report(rows, {{"BW", 1, 1, 0}}, ReportFormat::csv), ValidationError);
}

TEST_CASE("metrics csv round trip and validation") {
  const std::vector<MetricsRow> rows{{"BW", 1.0 / 3.0 * 100, 12.5, 4}, {"SR", 0.0, 100.0, 1}};
  CHECK(parse_metrics_csv(metrics_csv(rows), "m") == rows);
  CHECK(parse_metrics_csv("task,dsc,iou\nBW,83.04,76.50\n", "b")[0].mean_iou == 76.5);
  CHECK_THROWS_AS(parse_metrics_csv("name,dsc,iou\n", "b"), ValidationError);
  CHECK_THROWS_AS(parse_metrics_csv("task,dsc,iou\nBW,abc,1\n", "b"), ValidationError);
  CHECK_THROWS_AS(parse_metrics_csv("task,dsc,iou\nBW,120,1\n", "b"), ValidationError);
}

TEST_CASE("evaluate with oracle and empty predictors") {
  const auto f = make_synth_fixture(4, 160, 16, 9);
  std::vector<std::string> order;
  for (const auto& c : default_suim_classes()) order.push_back(c.code);

  const auto perfect = evaluate(f.eval, [](const EvalSample& s) { return s.ground_truth; }, order);
  REQUIRE_FALSE(perfect.empty());
  int total = 0;
  for (const auto& r : perfect) {
    CHECK(r.mean_dsc == 100.0);
    CHECK(r.mean_iou == 100.0);
    total += r.n_samples;
  }
  CHECK(total == static_cast<int>(f.eval.size()));

  const auto none = evaluate(f.eval, [](const EvalSample& s) {
    return Mask::Zero(s.ground_truth.rows(), s.ground_truth.cols()).eval();
  }, order);
  for (const auto& r : none) {
    CHECK(r.mean_dsc == 0.0);
    CHECK(r.mean_iou == 0.0);
  }

  const auto predict = decoder_predictor(f.pipeline);
  const Mask m = predict(f.eval.front());
  CHECK(m.rows() == f.eval.front().ground_truth.rows());
  CHECK(m.cols() == f.eval.front().ground_truth.cols());
}
