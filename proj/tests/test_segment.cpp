#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "plastisort/rng.hpp"
#include "plastisort/segment.hpp"
#include "plastisort/serial.hpp"

using namespace plastisort;

namespace {

RasterImage random_gray(int w, int h, Pcg32& rng) {
  RasterImage img(w, h, 1);
  for (auto& v : img.data) v = static_cast<uint8_t>(rng.bounded(256));
  return img;
}

BinaryImage random_mask(int w, int h, int fg_percent, Pcg32& rng) {
  BinaryImage bin(w, h);
  for (auto& v : bin.mask)
    v = rng.bounded(100) < static_cast<uint32_t>(fg_percent) ? 1 : 0;
  return bin;
}

} // namespace

TEST_CASE("otsu: constant image is degenerate") {
  RasterImage img(8, 8, 1, 7);
  OtsuResult r = otsu_threshold(img);
  CHECK(r.threshold == 7);
  CHECK(r.degenerate);
}

TEST_CASE("otsu: bimodal 0/255 ties break to the smallest threshold") {
  RasterImage img(16, 16, 1);
  for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = i % 2 ? 255 : 0;
  OtsuResult r = otsu_threshold(img);
  CHECK(r.threshold == 0);
  CHECK_FALSE(r.degenerate);
  CHECK(serial::otsu_exhaustive(img).threshold == 0);
}

TEST_CASE("otsu matches the exhaustive oracle on random images") {
  Pcg32 rng(99, 0);
  for (int trial = 0; trial < 60; ++trial) {
    int w = 8 + static_cast<int>(rng.bounded(120));
    int h = 8 + static_cast<int>(rng.bounded(120));
    RasterImage img = random_gray(w, h, rng);
    // bias some trials toward bimodal content
    if (trial % 3 == 0) {
      for (auto& v : img.data)
        v = static_cast<uint8_t>(v < 128 ? 40 + v % 17 : 180 + v % 23);
    }
    OtsuResult a = otsu_threshold(img);
    OtsuResult b = serial::otsu_exhaustive(img);
    CHECK(a.threshold == b.threshold);
    CHECK(a.degenerate == b.degenerate);
  }
}

TEST_CASE("binarize polarity and boundary") {
  RasterImage img(2, 1, 1);
  img.data = {0, 255};
  BinaryImage dark = binarize(img, 0, Polarity::DarkForeground);
  CHECK(dark.mask == std::vector<uint8_t>{1, 0});
  BinaryImage light = binarize(img, 0, Polarity::LightForeground);
  CHECK(light.mask == std::vector<uint8_t>{0, 1});

  RasterImage mid(3, 1, 1, 128);
  BinaryImage all = binarize(mid, 128, Polarity::DarkForeground);
  CHECK(all.mask == std::vector<uint8_t>{1, 1, 1}); // threshold is inclusive
}

TEST_CASE("labeling: diagonal pixels join under 8 but not 4") {
  BinaryImage bin(2, 2);
  bin.set(0, 0, 1);
  bin.set(1, 1, 1);
  CHECK(label_components(bin, 8).count == 1);
  CHECK(label_components(bin, 4).count == 2);
}

TEST_CASE("labeling matches flood fill exactly on random masks") {
  Pcg32 rng(4242, 0);
  for (int trial = 0; trial < 40; ++trial) {
    int w = 4 + static_cast<int>(rng.bounded(96));
    int h = 4 + static_cast<int>(rng.bounded(96));
    int density = 10 + static_cast<int>(rng.bounded(80));
    BinaryImage bin = random_mask(w, h, density, rng);
    for (int conn : {4, 8}) {
      LabelMap a = label_components(bin, conn);
      LabelMap b = serial::label_flood_fill(bin, conn);
      CHECK(a.count == b.count);
      CHECK(a.labels == b.labels); // dense first-encounter order is exact
    }
  }
}

TEST_CASE("labeling invariants: partition of the foreground") {
  Pcg32 rng(7, 0);
  BinaryImage bin = random_mask(64, 48, 35, rng);
  LabelMap lm = label_components(bin, 8);
  long long fg = 0;
  for (uint8_t v : bin.mask) fg += v ? 1 : 0;
  auto boxes = region_bounding_boxes(lm, 0);
  long long area_sum = 0;
  for (const auto& b : boxes) area_sum += b.area;
  CHECK(area_sum == fg);
  // every foreground pixel labeled, background zero
  for (size_t i = 0; i < bin.mask.size(); ++i) {
    if (bin.mask[i])
      CHECK(lm.labels[i] > 0);
    else
      CHECK(lm.labels[i] == 0);
  }
}

TEST_CASE("bounding boxes") {
  SUBCASE("solid 3x2 blob at (5,4)") {
    BinaryImage bin(16, 16);
    for (int y = 4; y < 6; ++y)
      for (int x = 5; x < 8; ++x) bin.set(x, y, 1);
    auto boxes = region_bounding_boxes(label_components(bin, 8), 0);
    REQUIRE(boxes.size() == 1);
    CHECK(boxes[0].x0 == 5);
    CHECK(boxes[0].y0 == 4);
    CHECK(boxes[0].width == 3);
    CHECK(boxes[0].height == 2);
    CHECK(boxes[0].area == 6);
  }
  SUBCASE("min_area filters small blobs") {
    BinaryImage bin(8, 8);
    bin.set(1, 1, 1);
    bin.set(2, 1, 1);
    bin.set(3, 1, 1);
    auto boxes = region_bounding_boxes(label_components(bin, 8), 10);
    CHECK(boxes.empty());
  }
  SUBCASE("L shape: tight box, area below width*height") {
    // vertical bar 1x4 at x=2,y=1..4 plus horizontal bar y=4, x=3..5
    BinaryImage bin(8, 8);
    for (int y = 1; y <= 4; ++y) bin.set(2, y, 1);
    for (int x = 3; x <= 5; ++x) bin.set(x, 4, 1);
    auto boxes = region_bounding_boxes(label_components(bin, 8), 0);
    REQUIRE(boxes.size() == 1);
    CHECK(boxes[0].x0 == 2);
    CHECK(boxes[0].y0 == 1);
    CHECK(boxes[0].width == 4);
    CHECK(boxes[0].height == 4);
    CHECK(boxes[0].area == 7);
    CHECK(boxes[0].area < static_cast<long long>(boxes[0].width) * boxes[0].height);
  }
}

TEST_CASE("extract_crops") {
  Pcg32 rng(11, 0);
  RasterImage img(20, 14, 3);
  for (auto& v : img.data) v = static_cast<uint8_t>(rng.bounded(256));

  SUBCASE("full-image box with no pad is the identity") {
    std::vector<BoundingBox> boxes = {{0, 0, 20, 14, 1, 1}};
    auto crops = extract_crops(img, boxes, 0);
    REQUIRE(crops.size() == 1);
    CHECK(crops[0] == img);
  }
  SUBCASE("corner box clamps the pad") {
    std::vector<BoundingBox> boxes = {{0, 0, 4, 4, 1, 1}};
    auto crops = extract_crops(img, boxes, 5);
    REQUIRE(crops.size() == 1);
    CHECK(crops[0].width == 9);  // 0..4+5, clamped at the left edge
    CHECK(crops[0].height == 9);
    CHECK(crops[0].at(0, 0, 0) == img.at(0, 0, 0));
  }
  SUBCASE("three boxes give three crops with padded dimensions") {
    std::vector<BoundingBox> boxes = {
        {2, 2, 3, 3, 1, 1}, {10, 5, 4, 2, 1, 2}, {15, 9, 2, 2, 1, 3}};
    auto crops = extract_crops(img, boxes, 1);
    REQUIRE(crops.size() == 3);
    CHECK(crops[0].width == 5);
    CHECK(crops[0].height == 5);
    CHECK(crops[1].width == 6);
    CHECK(crops[1].height == 4);
    CHECK(crops[2].width == 4);
    CHECK(crops[2].height == 4);
  }
}
