#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace plastisort {

/// 8-bit raster image, row-major, interleaved channels (1 = gray, 3 = RGB).
struct RasterImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<uint8_t> data;

  RasterImage() = default;
  RasterImage(int w, int h, int c, uint8_t fill = 0)
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * h * c, fill) {}

  uint8_t& at(int x, int y, int c = 0) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  uint8_t at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
  bool same_size(const RasterImage& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

bool operator==(const RasterImage& a, const RasterImage& b);

// Binary PGM (P5) / PPM (P6) with maxval <= 255, or 8-bit non-interlaced
// gray/RGB PNG. Anything else raises FormatError naming the offending
// feature.
RasterImage load_image(const std::filesystem::path& path);

// Writes P5 for 1-channel, P6 for 3-channel, maxval 255. Round trip through
// load_image is byte-exact.
void save_image(const RasterImage& img, const std::filesystem::path& path);

// ITU-R BT.601 luma, round-half-away-from-zero. Gray input is returned
// unchanged.
RasterImage to_grayscale(const RasterImage& img);

} // namespace plastisort
