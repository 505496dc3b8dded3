#include <catch2/catch_amalgamated.hpp>

#include <random>

#include <spherebev/metrics.hpp>

#include "oracles.hpp"

using namespace spherebev;
using Catch::Approx;

namespace {

LabelGrid block(const GridSpec& spec, std::size_t r0, std::size_t c0, std::size_t rows,
                std::size_t cols) {
  LabelGrid grid(spec, 0);
  for (std::size_t r = r0; r < r0 + rows; ++r) {
    for (std::size_t c = c0; c < c0 + cols; ++c) grid.at(r, c) = 1;
  }
  return grid;
}

}  // namespace

TEST_CASE("iou basics", "[metrics]") {
  const GridSpec spec(8.0, 0.5);  // 16x16
  const auto a = block(spec, 2, 2, 4, 4);
  CHECK(iou(a, a) == 1.0);

  const auto disjoint = block(spec, 10, 10, 3, 3);
  CHECK(iou(a, disjoint) == 0.0);

  // Same 4x4 block shifted by 2 cells: overlap 2x4 = 8, union 24.
  const auto shifted = block(spec, 4, 2, 4, 4);
  CHECK(iou(a, shifted) == Approx(1.0 / 3.0).epsilon(1e-12));

  const LabelGrid empty(spec, 0);
  CHECK(iou(empty, empty) == 1.0);
  CHECK(iou(a, empty) == 0.0);
  CHECK(iou(empty, a) == 0.0);

  CHECK_THROWS_AS(iou(a, LabelGrid(GridSpec(8.0, 1.0), 0)), std::invalid_argument);
}

TEST_CASE("iou is symmetric, bounded and matches counting", "[metrics]") {
  std::mt19937_64 rng(211);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 8 + rng() % 57;  // up to 64
    const GridSpec spec(static_cast<double>(n), 1.0);
    LabelGrid a(spec, 0), b(spec, 0);
    for (std::size_t i = 0; i < a.data().size(); ++i) {
      a.data()[i] = (rng() % 4 == 0) ? 1 : 0;
      b.data()[i] = (rng() % 4 == 0) ? 1 : 0;
    }
    const double ab = iou(a, b);
    CHECK(ab == iou(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(ab == oracles::iou_counting_oracle(a, b));
  }
}

TEST_CASE("centered crop geometry", "[metrics]") {
  const GridSpec spec;  // 200x200 at 0.5 m

  SECTION("full-range crop is the identity") {
    std::mt19937_64 rng(223);
    LabelGrid grid(spec, 0);
    for (auto& v : grid.data()) v = (rng() % 5 == 0) ? 1 : 0;
    CHECK(crop_centered(grid, 100.0) == grid);
  }

  SECTION("20 m crop selects the central 40x40 cells") {
    ValueGrid grid(spec, 0.0);
    for (std::size_t r = 0; r < 200; ++r) {
      for (std::size_t c = 0; c < 200; ++c) {
        grid.at(r, c) = static_cast<double>(r * 1000 + c);
      }
    }
    const auto crop = crop_centered(grid, 20.0);
    REQUIRE(crop.n() == 40);
    for (std::size_t r = 0; r < 40; ++r) {
      for (std::size_t c = 0; c < 40; ++c) {
        CHECK(crop.at(r, c) == static_cast<double>((r + 80) * 1000 + (c + 80)));
      }
    }
  }

  SECTION("invalid ranges are rejected") {
    const LabelGrid grid(spec, 0);
    CHECK_THROWS_AS(crop_centered(grid, 20.3), std::invalid_argument);
    CHECK_THROWS_AS(crop_centered(grid, 101.0), std::invalid_argument);
    CHECK_THROWS_AS(crop_centered(grid, 0.0), std::invalid_argument);
  }
}

TEST_CASE("iou at ranges uses the empty-crop convention", "[metrics]") {
  const GridSpec spec;
  // Positives only outside the central 20 m window.
  LabelGrid gt(spec, 0);
  gt.at(10, 10) = 1;
  gt.at(150, 170) = 1;
  const LabelGrid pred(spec, 0);

  const auto report = iou_report(pred, gt);
  CHECK(report.iou_100 == 0.0);
  CHECK(report.iou_20 == 1.0);  // both crops empty

  const double ranges[] = {100.0, 20.0};
  const auto values = iou_at_ranges(pred, gt, ranges);
  CHECK(values[0] == 0.0);
  CHECK(values[1] == 1.0);

  CHECK(iou_at_ranges(gt, gt, std::vector<double>{100.0})[0] == 1.0);
}

TEST_CASE("eff score reproduces published ratios", "[metrics]") {
  CHECK(eff_score(32.6, 8.40) == Approx(3.881).margin(1e-3));
  CHECK(eff_score(32.7, 42.04) == Approx(0.777).margin(1e-3));
  CHECK(eff_score(17.3, 1.0) == 17.3);
  CHECK_THROWS_AS(eff_score(10.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(eff_score(10.0, -2.0), std::invalid_argument);
}

TEST_CASE("binarize thresholds strictly", "[metrics]") {
  const GridSpec spec(4.0, 1.0);

  const ValueGrid background(spec, -10.0);
  const auto all_zero = binarize(background);
  for (const auto v : all_zero.data()) CHECK(v == 0);

  ValueGrid grid(spec, 0.0);
  grid.at(0, 0) = 0.0;   // exactly at threshold: stays 0
  grid.at(0, 1) = 1e-12; // strictly above: becomes 1
  grid.at(1, 1) = -0.5;
  const auto bin = binarize(grid, 0.0);
  CHECK(bin.at(0, 0) == 0);
  CHECK(bin.at(0, 1) == 1);
  CHECK(bin.at(1, 1) == 0);

  std::mt19937_64 rng(227);
  auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  ValueGrid mixed(spec, 0.0);
  for (auto& v : mixed.data()) v = unit() * 2.0 - 1.0;
  const double threshold = 0.2;
  const auto out = binarize(mixed, threshold);
  for (std::size_t i = 0; i < mixed.data().size(); ++i) {
    CHECK(out.data()[i] == (mixed.data()[i] > threshold ? 1 : 0));
  }
}
