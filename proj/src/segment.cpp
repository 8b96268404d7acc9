#include "plastisort/segment.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>

#include "plastisort/errors.hpp"

namespace plastisort {

OtsuResult otsu_threshold(const RasterImage& gray) {
  if (gray.channels != 1) throw ValidationError("otsu_threshold: image must be grayscale");
  std::array<uint64_t, 256> hist{};
  for (uint8_t v : gray.data) hist[v]++;

  int nonzero_bins = 0;
  int only_value = 0;
  for (int v = 0; v < 256; ++v) {
    if (hist[v]) {
      ++nonzero_bins;
      only_value = v;
    }
  }
  if (nonzero_bins <= 1) return {only_value, true};

  const uint64_t total = gray.pixel_count();
  uint64_t total_sum = 0;
  for (int v = 0; v < 256; ++v) total_sum += hist[v] * static_cast<uint64_t>(v);

  // Running integer sums keep w0/w1/s0/s1 exact, so the double-precision
  // variance below is a pure function of them and matches any other route
  // that evaluates the same definition.
  uint64_t w0 = 0, s0 = 0;
  double best = -1.0;
  int best_t = 0;
  for (int t = 0; t <= 254; ++t) {
    w0 += hist[t];
    s0 += hist[t] * static_cast<uint64_t>(t);
    uint64_t w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    double mu0 = static_cast<double>(s0) / static_cast<double>(w0);
    double mu1 = static_cast<double>(total_sum - s0) / static_cast<double>(w1);
    double d = mu0 - mu1;
    double var = static_cast<double>(w0) * static_cast<double>(w1) * (d * d);
    if (var > best) {
      best = var;
      best_t = t;
    }
  }
  return {best_t, false};
}

BinaryImage binarize(const RasterImage& gray, int threshold, Polarity polarity) {
  if (gray.channels != 1) throw ValidationError("binarize: image must be grayscale");
  BinaryImage out(gray.width, gray.height);
  const size_t n = gray.pixel_count();
  const bool dark = polarity == Polarity::DarkForeground;
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    bool fg = dark ? gray.data[static_cast<size_t>(i)] <= threshold
                   : gray.data[static_cast<size_t>(i)] > threshold;
    out.mask[static_cast<size_t>(i)] = fg ? 1 : 0;
  }
  return out;
}

namespace {

struct UnionFind {
  std::vector<int32_t> parent;

  int32_t make() {
    parent.push_back(static_cast<int32_t>(parent.size()));
    return parent.back();
  }
  int32_t find(int32_t x) {
    int32_t root = x;
    while (parent[root] != root) root = parent[root];
    while (parent[x] != root) {
      int32_t next = parent[x];
      parent[x] = root;
      x = next;
    }
    return root;
  }
  void merge(int32_t a, int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b)
      parent[b] = a;
    else
      parent[a] = b;
  }
};

} // namespace

LabelMap label_components(const BinaryImage& bin, int connectivity) {
  if (connectivity != 4 && connectivity != 8)
    throw ValidationError("label_components: connectivity must be 4 or 8");
  LabelMap lm;
  lm.width = bin.width;
  lm.height = bin.height;
  lm.labels.assign(bin.mask.size(), 0);

  const int w = bin.width;
  const int h = bin.height;
  UnionFind uf;
  uf.make(); // provisional label 0 = background

  // First pass: provisional labels from the already-visited neighbors
  // (west, and the row above for 8-connectivity: NW, N, NE).
  std::vector<int32_t> prov(bin.mask.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      size_t idx = static_cast<size_t>(y) * w + x;
      if (!bin.mask[idx]) continue;
      int32_t neighbors[4];
      int nn = 0;
      if (x > 0 && prov[idx - 1]) neighbors[nn++] = prov[idx - 1];
      if (y > 0) {
        size_t up = idx - static_cast<size_t>(w);
        if (prov[up]) neighbors[nn++] = prov[up];
        if (connectivity == 8) {
          if (x > 0 && prov[up - 1]) neighbors[nn++] = prov[up - 1];
          if (x + 1 < w && prov[up + 1]) neighbors[nn++] = prov[up + 1];
        }
      }
      if (nn == 0) {
        prov[idx] = uf.make();
      } else {
        int32_t m = neighbors[0];
        for (int i = 1; i < nn; ++i) m = std::min(m, neighbors[i]);
        prov[idx] = m;
        for (int i = 0; i < nn; ++i) uf.merge(m, neighbors[i]);
      }
    }
  }

  // Second pass: resolve roots and assign dense labels in first-encounter
  // order, which is the observable contract.
  std::vector<int32_t> dense(uf.parent.size(), 0);
  int32_t next = 0;
  for (size_t idx = 0; idx < prov.size(); ++idx) {
    if (!prov[idx]) continue;
    int32_t root = uf.find(prov[idx]);
    if (dense[root] == 0) dense[root] = ++next;
    lm.labels[idx] = dense[root];
  }
  lm.count = next;
  return lm;
}

std::vector<BoundingBox> region_bounding_boxes(const LabelMap& lm, long long min_area) {
  struct Extent {
    int min_x = std::numeric_limits<int>::max();
    int min_y = std::numeric_limits<int>::max();
    int max_x = -1;
    int max_y = -1;
    long long area = 0;
  };
  std::vector<Extent> ext(static_cast<size_t>(lm.count) + 1);
  for (int y = 0; y < lm.height; ++y) {
    for (int x = 0; x < lm.width; ++x) {
      int32_t l = lm.labels[static_cast<size_t>(y) * lm.width + x];
      if (!l) continue;
      Extent& e = ext[static_cast<size_t>(l)];
      e.min_x = std::min(e.min_x, x);
      e.min_y = std::min(e.min_y, y);
      e.max_x = std::max(e.max_x, x);
      e.max_y = std::max(e.max_y, y);
      e.area++;
    }
  }
  std::vector<BoundingBox> boxes;
  for (int l = 1; l <= lm.count; ++l) {
    const Extent& e = ext[static_cast<size_t>(l)];
    if (e.area < min_area) continue;
    boxes.push_back({e.min_x, e.min_y, e.max_x - e.min_x + 1, e.max_y - e.min_y + 1,
                     e.area, l});
  }
  return boxes;
}

std::vector<RasterImage> extract_crops(const RasterImage& img,
                                       const std::vector<BoundingBox>& boxes, int pad) {
  std::vector<RasterImage> crops;
  crops.reserve(boxes.size());
  for (const BoundingBox& b : boxes) {
    int x0 = std::max(0, b.x0 - pad);
    int y0 = std::max(0, b.y0 - pad);
    int x1 = std::min(img.width, b.x0 + b.width + pad);
    int y1 = std::min(img.height, b.y0 + b.height + pad);
    RasterImage crop(x1 - x0, y1 - y0, img.channels);
    for (int y = y0; y < y1; ++y) {
      const uint8_t* src = &img.data[(static_cast<size_t>(y) * img.width + x0) * img.channels];
      uint8_t* dst = &crop.data[static_cast<size_t>(y - y0) * crop.width * crop.channels];
      std::copy(src, src + static_cast<size_t>(crop.width) * img.channels, dst);
    }
    crops.push_back(std::move(crop));
  }
  return crops;
}

} // namespace plastisort
