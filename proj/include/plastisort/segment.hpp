#pragma once

#include <cstdint>
#include <vector>

#include "plastisort/image.hpp"

namespace plastisort {

/// Foreground mask. mask[i] != 0 means foreground (plastic).
struct BinaryImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> mask;

  BinaryImage() = default;
  BinaryImage(int w, int h, uint8_t fill = 0)
      : width(w), height(h), mask(static_cast<size_t>(w) * h, fill) {}
  uint8_t at(int x, int y) const { return mask[static_cast<size_t>(y) * width + x]; }
  void set(int x, int y, uint8_t v) { mask[static_cast<size_t>(y) * width + x] = v; }
};

/// Dense component labels: 0 = background, components are 1..count, numbered
/// in raster-scan first-encounter order.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<int32_t> labels;
  int count = 0;

  int32_t at(int x, int y) const { return labels[static_cast<size_t>(y) * width + x]; }
};

struct BoundingBox {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
  long long area = 0; // foreground pixel count, not width*height
  int label = 0;
};

struct OtsuResult {
  int threshold = 0;
  bool degenerate = false; // constant image: threshold is the constant itself
};

// Maximizes between-class variance over t in 0..254, class 0 = pixels <= t;
// ties go to the smallest t. Both this and the exhaustive test oracle derive
// the variance from exact integer histogram sums, so their argmax agrees
// bit-for-bit.
OtsuResult otsu_threshold(const RasterImage& gray);

enum class Polarity { DarkForeground, LightForeground };

BinaryImage binarize(const RasterImage& gray, int threshold, Polarity polarity);

// Two-pass union-find labeling with dense relabeling in raster-scan
// first-encounter order.
LabelMap label_components(const BinaryImage& bin, int connectivity);

// One tight box per component with area >= min_area, sorted by label.
std::vector<BoundingBox> region_bounding_boxes(const LabelMap& lm, long long min_area);

// Sub-images covering each box grown by `pad` and clamped to image bounds.
std::vector<RasterImage> extract_crops(const RasterImage& img,
                                       const std::vector<BoundingBox>& boxes, int pad);

} // namespace plastisort
