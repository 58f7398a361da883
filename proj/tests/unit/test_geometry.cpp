#include <doctest.h>

#include <cmath>
#include <random>

#include "vpp/errors.hpp"
#include "vpp/geometry.hpp"

using namespace vpp;

namespace {

// Counts cells of an n x n grid whose centers fall inside the box.
double iou_by_counting(const NormBox& a, const NormBox& b, int n) {
  long ia = 0, ib = 0, both = 0;
  for (int y = 0; y < n; ++y) {
    const double cy = (y + 0.5) / n;
    for (int x = 0; x < n; ++x) {
      const double cx = (x + 0.5) / n;
      const bool in_a = cx >= a.x1 && cx < a.x2 && cy >= a.y1 && cy < a.y2;
      const bool in_b = cx >= b.x1 && cx < b.x2 && cy >= b.y1 && cy < b.y2;
      ia += in_a;
      ib += in_b;
      both += in_a && in_b;
    }
  }
  const long uni = ia + ib - both;
  return uni == 0 ? 0.0 : double(both) / double(uni);
}

NormBox random_box(std::mt19937_64& rng, int grid) {
  std::uniform_int_distribution<int> d(0, grid);
  int x1 = d(rng), x2 = d(rng), y1 = d(rng), y2 = d(rng);
  if (x1 > x2) std::swap(x1, x2);
  if (y1 > y2) std::swap(y1, y2);
  return {double(x1) / grid, double(y1) / grid, double(x2) / grid, double(y2) / grid};
}

}  // namespace

TEST_CASE("pad placement centers the shorter side") {
  const PadPlacement p = pad_placement(ImageDims(480, 360));
  CHECK(p.side == 480);
  CHECK(p.offset_x == 0);
  CHECK(p.offset_y == 60);
  const PadPlacement q = pad_placement(ImageDims(300, 301));
  CHECK(q.side == 301);
  CHECK(q.offset_x == 0);
  CHECK_THROWS_AS(ImageDims(0, 5), ContractError);
}

TEST_CASE("normalize examples") {
  const NormBox b = normalize_box({245, 384, 283, 502, ImageDims(1000, 1000)});
  CHECK(b.x1 == doctest::Approx(0.245));
  CHECK(b.y2 == doctest::Approx(0.502));
  const NormBox g = normalize_box({75, 13, 240, 67, ImageDims(480, 360)});
  CHECK(g.x1 == doctest::Approx(0.15625));
  CHECK(g.y1 == doctest::Approx(73.0 / 480));
  CHECK(g.y2 == doctest::Approx(127.0 / 480));
  CHECK_THROWS_AS(normalize_box({10, 10, 5, 20, ImageDims(100, 100)}), ValidationError);
  CHECK_THROWS_AS(normalize_box({0, 0, 101, 20, ImageDims(100, 100)}), ValidationError);
}

TEST_CASE("normalize and denormalize round trip within half a pixel") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> side(1, 2000);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const ImageDims d(side(rng), side(rng));
    double x1 = u(rng) * d.width, x2 = u(rng) * d.width;
    double y1 = u(rng) * d.height, y2 = u(rng) * d.height;
    if (x1 > x2) std::swap(x1, x2);
    if (y1 > y2) std::swap(y1, y2);
    const PixelBox back = denormalize_box(normalize_box({x1, y1, x2, y2, d}), d);
    CHECK(std::abs(back.x1 - x1) <= 0.5);
    CHECK(std::abs(back.y1 - y1) <= 0.5);
    CHECK(std::abs(back.x2 - x2) <= 0.5);
    CHECK(std::abs(back.y2 - y2) <= 0.5);
  }
}

TEST_CASE("iou matches a pixel-counting oracle") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 300; ++i) {
    const NormBox a = random_box(rng, 50), b = random_box(rng, 50);
    CHECK(std::abs(iou(a, b) - iou_by_counting(a, b, 200)) < 1e-9);
  }
  CHECK(iou({0, 0, 0.5, 0.5}, {0, 0, 0.5, 0.5}) == 1.0);
  CHECK(iou({0, 0, 0.2, 0.2}, {0.5, 0.5, 0.7, 0.7}) == 0.0);
  CHECK(iou({0.3, 0.3, 0.3, 0.3}, {0.3, 0.3, 0.3, 0.3}) == 0.0);
  CHECK(iou({0, 0, 0.5, 1}, {0.25, 0, 0.75, 1}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("iou is symmetric and bounded") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    const NormBox a = random_box(rng, 100), b = random_box(rng, 100);
    const double v = iou(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == iou(b, a));
  }
}

TEST_CASE("acc at iou counts missing predictions as misses") {
  const std::vector<NormBox> gts{{0, 0, 0.5, 0.5}, {0.5, 0.5, 1, 1}, {0, 0, 1, 1}};
  const std::vector<std::optional<NormBox>> preds{
      NormBox{0, 0, 0.5, 0.5}, std::nullopt, NormBox{0, 0, 1, 0.5}};
  CHECK(acc_at_iou(preds, gts) == doctest::Approx(2.0 / 3.0));
  CHECK(acc_at_iou(preds, gts, 0.51) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(acc_at_iou(preds, std::span(gts).first(2)), ContractError);
  CHECK_THROWS_AS(acc_at_iou(preds, gts, 0.0), ContractError);
}

TEST_CASE("quantize snaps to the two-decimal grid") {
  const NormBox q = quantize_box({0.245, 0.384, 0.283, 0.502});
  CHECK(q == NormBox{0.25, 0.38, 0.28, 0.5});
  CHECK(quantize_box(q) == q);
}
