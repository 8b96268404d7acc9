#include "plastisort/serial.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>

#include "plastisort/errors.hpp"

namespace plastisort::serial {

OtsuResult otsu_exhaustive(const RasterImage& gray) {
  if (gray.channels != 1) throw ValidationError("otsu_exhaustive: grayscale only");
  std::array<uint64_t, 256> hist{};
  for (uint8_t v : gray.data) hist[v]++;

  int nonzero = 0, only = 0;
  for (int v = 0; v < 256; ++v)
    if (hist[v]) {
      ++nonzero;
      only = v;
    }
  if (nonzero <= 1) return {only, true};

  const double total = static_cast<double>(gray.pixel_count());
  double best = -1.0;
  int best_t = 0;
  for (int t = 0; t <= 254; ++t) {
    uint64_t w0 = 0, s0 = 0, w1 = 0, s1 = 0;
    for (int v = 0; v <= t; ++v) {
      w0 += hist[v];
      s0 += hist[v] * static_cast<uint64_t>(v);
    }
    for (int v = t + 1; v < 256; ++v) {
      w1 += hist[v];
      s1 += hist[v] * static_cast<uint64_t>(v);
    }
    (void)total;
    if (w0 == 0 || w1 == 0) continue;
    double mu0 = static_cast<double>(s0) / static_cast<double>(w0);
    double mu1 = static_cast<double>(s1) / static_cast<double>(w1);
    double d = mu0 - mu1;
    double var = static_cast<double>(w0) * static_cast<double>(w1) * (d * d);
    if (var > best) {
      best = var;
      best_t = t;
    }
  }
  return {best_t, false};
}

LabelMap label_flood_fill(const BinaryImage& bin, int connectivity) {
  if (connectivity != 4 && connectivity != 8)
    throw ValidationError("label_flood_fill: connectivity must be 4 or 8");
  LabelMap lm;
  lm.width = bin.width;
  lm.height = bin.height;
  lm.labels.assign(bin.mask.size(), 0);
  const int w = bin.width, h = bin.height;

  static const int dx8[] = {-1, 0, 1, -1, 1, -1, 0, 1};
  static const int dy8[] = {-1, -1, -1, 0, 0, 1, 1, 1};
  static const int dx4[] = {0, -1, 1, 0};
  static const int dy4[] = {-1, 0, 0, 1};
  const int* dx = connectivity == 8 ? dx8 : dx4;
  const int* dy = connectivity == 8 ? dy8 : dy4;
  const int nn = connectivity;

  int32_t next = 0;
  std::deque<int> queue;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int idx = y * w + x;
      if (!bin.mask[static_cast<size_t>(idx)] || lm.labels[static_cast<size_t>(idx)]) continue;
      ++next;
      lm.labels[static_cast<size_t>(idx)] = next;
      queue.push_back(idx);
      while (!queue.empty()) {
        int cur = queue.front();
        queue.pop_front();
        int cx = cur % w, cy = cur / w;
        for (int k = 0; k < nn; ++k) {
          int px = cx + dx[k], py = cy + dy[k];
          if (px < 0 || px >= w || py < 0 || py >= h) continue;
          int pidx = py * w + px;
          if (bin.mask[static_cast<size_t>(pidx)] && !lm.labels[static_cast<size_t>(pidx)]) {
            lm.labels[static_cast<size_t>(pidx)] = next;
            queue.push_back(pidx);
          }
        }
      }
    }
  }
  lm.count = next;
  return lm;
}

template <class T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& bias,
                          int stride, int pad) {
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t OC = w.dim(0), KH = w.dim(2), KW = w.dim(3);
  const int64_t OH = (H + 2 * pad - KH) / stride + 1;
  const int64_t OW = (W + 2 * pad - KW) / stride + 1;
  TensorT<T> y({B, OC, OH, OW});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t oc = 0; oc < OC; ++oc)
      for (int64_t oh = 0; oh < OH; ++oh)
        for (int64_t ow = 0; ow < OW; ++ow) {
          T acc = T(0);
          for (int64_t c = 0; c < C; ++c)
            for (int64_t kh = 0; kh < KH; ++kh)
              for (int64_t kw = 0; kw < KW; ++kw) {
                int64_t ih = oh * stride - pad + kh;
                int64_t iw = ow * stride - pad + kw;
                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                acc += x.data[static_cast<size_t>(((b * C + c) * H + ih) * W + iw)] *
                       w.data[static_cast<size_t>(((oc * C + c) * KH + kh) * KW + kw)];
              }
          y.data[static_cast<size_t>(((b * OC + oc) * OH + oh) * OW + ow)] =
              acc + bias.data[static_cast<size_t>(oc)];
        }
  return y;
}

template TensorT<float> conv2d_forward(const TensorT<float>&, const TensorT<float>&,
                                       const TensorT<float>&, int, int);
template TensorT<double> conv2d_forward(const TensorT<double>&, const TensorT<double>&,
                                        const TensorT<double>&, int, int);

template <class T>
TensorT<T> fc_forward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& bias) {
  const int64_t B = x.dim(0);
  const int64_t F = x.size() / B;
  const int64_t O = w.dim(0);
  TensorT<T> y({B, O});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t o = 0; o < O; ++o) {
      T acc = T(0);
      for (int64_t f = 0; f < F; ++f)
        acc += x.data[static_cast<size_t>(b * F + f)] * w.data[static_cast<size_t>(o * F + f)];
      y.data[static_cast<size_t>(b * O + o)] = acc + bias.data[static_cast<size_t>(o)];
    }
  return y;
}

template TensorT<float> fc_forward(const TensorT<float>&, const TensorT<float>&,
                                   const TensorT<float>&);
template TensorT<double> fc_forward(const TensorT<double>&, const TensorT<double>&,
                                    const TensorT<double>&);

template <class T>
TensorT<T> maxpool_forward(const TensorT<T>& x, int window, int stride) {
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t PH = (H - window) / stride + 1;
  const int64_t PW = (W - window) / stride + 1;
  TensorT<T> y({B, C, PH, PW});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t oy = 0; oy < PH; ++oy)
        for (int64_t ox = 0; ox < PW; ++ox) {
          T best = x.data[static_cast<size_t>(((b * C + c) * H + oy * stride) * W +
                                              ox * stride)];
          for (int64_t ky = 0; ky < window; ++ky)
            for (int64_t kx = 0; kx < window; ++kx) {
              T v = x.data[static_cast<size_t>(((b * C + c) * H + oy * stride + ky) * W +
                                               ox * stride + kx)];
              if (v > best) best = v;
            }
          y.data[static_cast<size_t>(((b * C + c) * PH + oy) * PW + ox)] = best;
        }
  return y;
}

template TensorT<float> maxpool_forward(const TensorT<float>&, int, int);
template TensorT<double> maxpool_forward(const TensorT<double>&, int, int);

template <class T>
TensorT<T> lrn_forward(const TensorT<T>& x, int n, double alpha, double beta, double k) {
  const int64_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  const int64_t r = (n - 1) / 2;
  const double an = alpha / n;
  TensorT<T> y(x.shape);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t s = 0; s < HW; ++s)
      for (int64_t c = 0; c < C; ++c) {
        int64_t lo = std::max<int64_t>(0, c - r);
        int64_t hi = std::min<int64_t>(C - 1, c + r);
        double ss = 0.0;
        for (int64_t j = lo; j <= hi; ++j) {
          double a = static_cast<double>(x.data[static_cast<size_t>((b * C + j) * HW + s)]);
          ss += a * a;
        }
        double d = k + an * ss;
        y.data[static_cast<size_t>((b * C + c) * HW + s)] = static_cast<T>(
            static_cast<double>(x.data[static_cast<size_t>((b * C + c) * HW + s)]) *
            std::pow(d, -beta));
      }
  return y;
}

template TensorT<float> lrn_forward(const TensorT<float>&, int, double, double, double);
template TensorT<double> lrn_forward(const TensorT<double>&, int, double, double, double);

template <class T>
void gemm_nn(int64_t M, int64_t N, int64_t K, const T* A, const T* B, T* C,
             bool accumulate) {
  for (int64_t m = 0; m < M; ++m)
    for (int64_t n = 0; n < N; ++n) {
      T acc = accumulate ? C[m * N + n] : T(0);
      for (int64_t k = 0; k < K; ++k) acc += A[m * K + k] * B[k * N + n];
      C[m * N + n] = acc;
    }
}

template void gemm_nn(int64_t, int64_t, int64_t, const float*, const float*, float*, bool);
template void gemm_nn(int64_t, int64_t, int64_t, const double*, const double*, double*, bool);

namespace {

inline uint8_t quantize(double v) {
  double r = std::floor(v + 0.5);
  if (r < 0.0) r = 0.0;
  if (r > 255.0) r = 255.0;
  return static_cast<uint8_t>(r);
}

} // namespace

RasterImage clahe(const RasterImage& gray, const ClaheParams& p) {
  if (gray.channels != 1) throw ValidationError("clahe: grayscale only");
  if (gray.width < p.tiles_x || gray.height < p.tiles_y)
    throw ValidationError("clahe: image smaller than tile grid");
  const int tx = p.tiles_x, ty = p.tiles_y;
  const int w = gray.width, h = gray.height;

  std::vector<double> maps(static_cast<size_t>(tx) * ty * 256);
  std::vector<double> cx(static_cast<size_t>(tx)), cy(static_cast<size_t>(ty));
  for (int tyi = 0; tyi < ty; ++tyi) {
    int y0 = static_cast<int>(static_cast<int64_t>(tyi) * h / ty);
    int y1 = static_cast<int>(static_cast<int64_t>(tyi + 1) * h / ty);
    cy[static_cast<size_t>(tyi)] = 0.5 * (y0 + y1);
    for (int txi = 0; txi < tx; ++txi) {
      int x0 = static_cast<int>(static_cast<int64_t>(txi) * w / tx);
      int x1 = static_cast<int>(static_cast<int64_t>(txi + 1) * w / tx);
      cx[static_cast<size_t>(txi)] = 0.5 * (x0 + x1);
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

  auto bracket = [](const std::vector<double>& centers, double p) {
    struct R {
      int lo, hi;
      double w;
    };
    if (p <= centers.front()) return R{0, 0, 0.0};
    int last = static_cast<int>(centers.size()) - 1;
    if (p >= centers.back()) return R{last, last, 0.0};
    int i = 0;
    while (p >= centers[static_cast<size_t>(i + 1)]) ++i;
    return R{i, i + 1,
             (p - centers[static_cast<size_t>(i)]) /
                 (centers[static_cast<size_t>(i + 1)] - centers[static_cast<size_t>(i)])};
  };

  RasterImage out(w, h, 1);
  for (int y = 0; y < h; ++y) {
    auto ry = bracket(cy, y + 0.5);
    for (int x = 0; x < w; ++x) {
      auto rx = bracket(cx, x + 0.5);
      int v = gray.at(x, y);
      const double* m00 = &maps[(static_cast<size_t>(ry.lo) * tx + rx.lo) * 256];
      const double* m01 = &maps[(static_cast<size_t>(ry.lo) * tx + rx.hi) * 256];
      const double* m10 = &maps[(static_cast<size_t>(ry.hi) * tx + rx.lo) * 256];
      const double* m11 = &maps[(static_cast<size_t>(ry.hi) * tx + rx.hi) * 256];
      double top = (1.0 - rx.w) * m00[v] + rx.w * m01[v];
      double bot = (1.0 - rx.w) * m10[v] + rx.w * m11[v];
      out.at(x, y) = quantize((1.0 - ry.w) * top + ry.w * bot);
    }
  }
  return out;
}

RasterImage resize_bilinear(const RasterImage& img, int out_w, int out_h) {
  if (img.width == out_w && img.height == out_h) return img;
  RasterImage out(out_w, out_h, img.channels);
  const double scale_x = static_cast<double>(img.width) / out_w;
  const double scale_y = static_cast<double>(img.height) / out_h;
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

} // namespace plastisort::serial
