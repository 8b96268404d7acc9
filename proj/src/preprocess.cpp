#include "plastisort/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "plastisort/errors.hpp"

namespace plastisort {

namespace {

// round half away from zero, clamp to [0,255]
inline uint8_t quantize(double v) {
  double r = std::floor(v + 0.5);
  if (r < 0.0) r = 0.0;
  if (r > 255.0) r = 255.0;
  return static_cast<uint8_t>(r);
}

// Per-axis interpolation setup: bracketing tile indices and blend weight for
// every pixel coordinate, given tile boundaries at i*extent/tiles.
struct AxisBlend {
  std::vector<int> lo, hi;
  std::vector<double> w;
};

AxisBlend make_axis_blend(int extent, int tiles) {
  std::vector<double> centers(static_cast<size_t>(tiles));
  for (int i = 0; i < tiles; ++i) {
    int b0 = static_cast<int>(static_cast<int64_t>(i) * extent / tiles);
    int b1 = static_cast<int>(static_cast<int64_t>(i + 1) * extent / tiles);
    centers[static_cast<size_t>(i)] = 0.5 * (b0 + b1);
  }
  AxisBlend ab;
  ab.lo.resize(static_cast<size_t>(extent));
  ab.hi.resize(static_cast<size_t>(extent));
  ab.w.resize(static_cast<size_t>(extent));
  for (int x = 0; x < extent; ++x) {
    double px = x + 0.5;
    if (px <= centers.front()) {
      ab.lo[x] = ab.hi[x] = 0;
      ab.w[x] = 0.0;
    } else if (px >= centers.back()) {
      ab.lo[x] = ab.hi[x] = tiles - 1;
      ab.w[x] = 0.0;
    } else {
      int i = 0;
      while (px >= centers[static_cast<size_t>(i + 1)]) ++i;
      ab.lo[x] = i;
      ab.hi[x] = i + 1;
      ab.w[x] = (px - centers[static_cast<size_t>(i)]) /
                (centers[static_cast<size_t>(i + 1)] - centers[static_cast<size_t>(i)]);
    }
  }
  return ab;
}

} // namespace

RasterImage clahe(const RasterImage& gray, const ClaheParams& p) {
  if (gray.channels != 1) throw ValidationError("clahe: image must be grayscale");
  if (p.tiles_x < 1 || p.tiles_y < 1) throw ValidationError("clahe: tiles must be >= 1");
  if (!(p.clip_limit > 0.0 && p.clip_limit <= 1.0))
    throw ValidationError("clahe: clip_limit must be in (0, 1]");
  if (gray.width < p.tiles_x || gray.height < p.tiles_y)
    throw ValidationError("clahe: image smaller than tile grid");

  const int tx = p.tiles_x, ty = p.tiles_y;
  const int w = gray.width, h = gray.height;

  // One clipped-CDF map per tile; kept in double until the final rounding.
  std::vector<double> maps(static_cast<size_t>(tx) * ty * 256);
#pragma omp parallel for collapse(2) schedule(static)
  for (int tyi = 0; tyi < ty; ++tyi) {
    for (int txi = 0; txi < tx; ++txi) {
      int x0 = static_cast<int>(static_cast<int64_t>(txi) * w / tx);
      int x1 = static_cast<int>(static_cast<int64_t>(txi + 1) * w / tx);
      int y0 = static_cast<int>(static_cast<int64_t>(tyi) * h / ty);
      int y1 = static_cast<int>(static_cast<int64_t>(tyi + 1) * h / ty);
      uint32_t hist[256] = {0};
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) hist[gray.at(x, y)]++;
      double area = static_cast<double>(x1 - x0) * (y1 - y0);
      double limit = p.clip_limit * area;
      double clipped[256];
      double excess = 0.0;
      for (int b = 0; b < 256; ++b) {
        double c = static_cast<double>(hist[b]);
        if (c > limit) {
          excess += c - limit;
          clipped[b] = limit;
        } else {
          clipped[b] = c;
        }
      }
      double bonus = excess / 256.0;
      double* map = &maps[(static_cast<size_t>(tyi) * tx + txi) * 256];
      double cum = 0.0;
      for (int b = 0; b < 256; ++b) {
        cum += clipped[b] + bonus;
        map[b] = 255.0 * cum / area;
      }
    }
  }

  AxisBlend bx = make_axis_blend(w, tx);
  AxisBlend by = make_axis_blend(h, ty);

  RasterImage out(w, h, 1);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const double* row_lo = &maps[(static_cast<size_t>(by.lo[y]) * tx) * 256];
    const double* row_hi = &maps[(static_cast<size_t>(by.hi[y]) * tx) * 256];
    double wy = by.w[y];
    for (int x = 0; x < w; ++x) {
      int v = gray.at(x, y);
      double wx = bx.w[x];
      const double* m00 = row_lo + static_cast<size_t>(bx.lo[x]) * 256;
      const double* m01 = row_lo + static_cast<size_t>(bx.hi[x]) * 256;
      const double* m10 = row_hi + static_cast<size_t>(bx.lo[x]) * 256;
      const double* m11 = row_hi + static_cast<size_t>(bx.hi[x]) * 256;
      double top = (1.0 - wx) * m00[v] + wx * m01[v];
      double bot = (1.0 - wx) * m10[v] + wx * m11[v];
      out.at(x, y) = quantize((1.0 - wy) * top + wy * bot);
    }
  }
  return out;
}

RasterImage square_pad(const RasterImage& img, PadMode mode, uint8_t constant_value) {
  int s = std::max(img.width, img.height);
  if (img.width == s && img.height == s) return img;
  int left = (s - img.width) / 2;
  int top = (s - img.height) / 2;
  RasterImage out(s, s, img.channels);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < s; ++y) {
    int sy = y - top;
    for (int x = 0; x < s; ++x) {
      int sx = x - left;
      for (int c = 0; c < img.channels; ++c) {
        uint8_t v;
        if (sx >= 0 && sx < img.width && sy >= 0 && sy < img.height) {
          v = img.at(sx, sy, c);
        } else if (mode == PadMode::Constant) {
          v = constant_value;
        } else {
          int cx = std::clamp(sx, 0, img.width - 1);
          int cy = std::clamp(sy, 0, img.height - 1);
          v = img.at(cx, cy, c);
        }
        out.at(x, y, c) = v;
      }
    }
  }
  return out;
}

RasterImage resize_bilinear(const RasterImage& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw ValidationError("resize_bilinear: output size must be >= 1");
  if (img.width == out_w && img.height == out_h) return img;
  RasterImage out(out_w, out_h, img.channels);
  const double scale_x = static_cast<double>(img.width) / out_w;
  const double scale_y = static_cast<double>(img.height) / out_h;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < out_h; ++y) {
    double sy = (y + 0.5) * scale_y - 0.5;
    if (sy < 0.0) sy = 0.0;
    if (sy > img.height - 1) sy = img.height - 1;
    int y0 = static_cast<int>(sy);
    int y1 = std::min(y0 + 1, img.height - 1);
    double fy = sy - y0;
    for (int x = 0; x < out_w; ++x) {
      double sx = (x + 0.5) * scale_x - 0.5;
      if (sx < 0.0) sx = 0.0;
      if (sx > img.width - 1) sx = img.width - 1;
      int x0 = static_cast<int>(sx);
      int x1 = std::min(x0 + 1, img.width - 1);
      double fx = sx - x0;
      for (int c = 0; c < img.channels; ++c) {
        double top = (1.0 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
        double bot = (1.0 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
        out.at(x, y, c) = quantize((1.0 - fy) * top + fy * bot);
      }
    }
  }
  return out;
}

double blur_metric(const RasterImage& gray) {
  if (gray.channels != 1) throw ValidationError("blur_metric: image must be grayscale");
  if (gray.width < 3 || gray.height < 3)
    throw ValidationError("blur_metric: image must be at least 3x3");
  // Integer moments of the Laplacian response are exact, so the result is
  // independent of the parallel partition.
  long long sum = 0, sum_sq = 0;
#pragma omp parallel for schedule(static) reduction(+ : sum, sum_sq)
  for (int y = 1; y < gray.height - 1; ++y) {
    for (int x = 1; x < gray.width - 1; ++x) {
      int l = gray.at(x - 1, y) + gray.at(x + 1, y) + gray.at(x, y - 1) + gray.at(x, y + 1) -
              4 * gray.at(x, y);
      sum += l;
      sum_sq += static_cast<long long>(l) * l;
    }
  }
  double n = static_cast<double>(gray.width - 2) * (gray.height - 2);
  double mean = sum / n;
  return sum_sq / n - mean * mean;
}

Tensor to_input_tensor(const RasterImage& img, const InputStats& stats, int expect_w,
                       int expect_h) {
  if (img.width != expect_w || img.height != expect_h)
    throw ValidationError("to_input_tensor: expected " + std::to_string(expect_w) + "x" +
                          std::to_string(expect_h) + ", got " + std::to_string(img.width) +
                          "x" + std::to_string(img.height));
  Tensor t({1, 3, expect_h, expect_w});
  fill_input_tensor(t, 0, img, stats);
  return t;
}

void fill_input_tensor(Tensor& batch, int64_t batch_index, const RasterImage& img,
                       const InputStats& stats) {
  const int64_t hw = batch.dim(2) * batch.dim(3);
  if (img.width != batch.dim(3) || img.height != batch.dim(2))
    throw ValidationError("fill_input_tensor: image size does not match tensor");
  if (img.channels != 1 && img.channels != 3)
    throw ValidationError("fill_input_tensor: channels must be 1 or 3");
  float* dst = batch.data.data() + batch_index * 3 * hw;
  for (int c = 0; c < 3; ++c) {
    const float mean = static_cast<float>(stats.mean[static_cast<size_t>(c)]);
    const int src_c = img.channels == 1 ? 0 : c;
    for (int64_t i = 0; i < hw; ++i) {
      uint8_t p = img.data[static_cast<size_t>(i) * img.channels + src_c];
      dst[c * hw + i] = static_cast<float>(p) * (1.0f / 255.0f) - mean;
    }
  }
}

RasterImage preprocess_crop(const RasterImage& crop, const PreprocessParams& p) {
  RasterImage gray = to_grayscale(crop);
  ClaheParams cp = p.clahe;
  cp.tiles_x = std::min(cp.tiles_x, gray.width);
  cp.tiles_y = std::min(cp.tiles_y, gray.height);
  RasterImage eq = clahe(gray, cp);
  RasterImage sq = square_pad(eq, p.pad_mode, p.pad_value);
  return resize_bilinear(sq, p.target_size, p.target_size);
}

} // namespace plastisort
