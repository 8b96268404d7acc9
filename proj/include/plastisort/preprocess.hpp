#pragma once

#include <array>
#include <cstdint>

#include "plastisort/image.hpp"
#include "plastisort/tensor.hpp"

namespace plastisort {

struct ClaheParams {
  int tiles_x = 8;
  int tiles_y = 8;
  double clip_limit = 0.01; // fraction of the tile pixel count
  // histogram resolution is fixed at 256 bins (8-bit input)
};

/// Per-channel input means (of pixel/255), measured on the training set
/// after every other preprocessing step. Stored alongside the weights.
struct InputStats {
  std::array<double, 3> mean = {0.0, 0.0, 0.0};
};

// Contrast-limited adaptive histogram equalization on a grayscale image.
// Per-tile histograms are clipped at clip_limit * tile_area with the excess
// redistributed uniformly over all bins; each tile gets a monotone map from
// its clipped CDF; pixels blend the four surrounding tile maps bilinearly.
RasterImage clahe(const RasterImage& gray, const ClaheParams& p);

enum class PadMode { ReplicateEdge, Constant };

// Pads the short axis to max(width, height), content centered with the
// extra pixel on the right/bottom when the deficit is odd.
RasterImage square_pad(const RasterImage& img, PadMode mode, uint8_t constant_value = 0);

// Half-pixel-centered bilinear resampling, rounded half away from zero.
RasterImage resize_bilinear(const RasterImage& img, int out_w, int out_h);

// Variance of the 4-neighbor 3x3 Laplacian over interior pixels. Higher
// means sharper.
double blur_metric(const RasterImage& gray);

// pixel/255 - channel mean, laid out 1 x 3 x H x W; gray input is
// replicated across the three channels.
Tensor to_input_tensor(const RasterImage& img, const InputStats& stats, int expect_w = 227,
                       int expect_h = 227);

// Writes one image into row `batch_index` of a pre-shaped N x 3 x H x W
// batch tensor (same math as to_input_tensor).
void fill_input_tensor(Tensor& batch, int64_t batch_index, const RasterImage& img,
                       const InputStats& stats);

struct PreprocessParams {
  ClaheParams clahe;
  PadMode pad_mode = PadMode::ReplicateEdge;
  uint8_t pad_value = 0;
  double blur_threshold = 0.0; // 0 = report only, never skip
  int target_size = 227;
};

// The full crop pipeline short of tensor conversion: grayscale -> CLAHE ->
// square pad -> resize to target. For crops smaller than the CLAHE tile
// grid the grid is shrunk to fit.
RasterImage preprocess_crop(const RasterImage& crop, const PreprocessParams& p);

} // namespace plastisort
