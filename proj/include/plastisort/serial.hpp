#pragma once

#include <cstdint>
#include <vector>

#include "plastisort/image.hpp"
#include "plastisort/preprocess.hpp"
#include "plastisort/segment.hpp"
#include "plastisort/tensor.hpp"

namespace plastisort::serial {

// Single-threaded reference implementations, kept deliberately naive and
// independent of the OpenMP kernels. The test suites compare the fast path
// against these, and the benchmark tool reports the speedup over them.

// Exhaustive Otsu: evaluates the between-class variance independently for
// every candidate threshold straight from the histogram definition.
OtsuResult otsu_exhaustive(const RasterImage& gray);

// Breadth-first flood fill from every unvisited foreground pixel in raster
// order; labels are dense in first-encounter order by construction.
LabelMap label_flood_fill(const BinaryImage& bin, int connectivity);

// Naive direct convolution, loops nested batch -> out-channel -> spatial ->
// (in-channel, kh, kw). The tap order matches what im2col+GEMM accumulates,
// so results agree bit-for-bit with the parallel path.
template <class T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& bias,
                          int stride, int pad);

template <class T>
TensorT<T> fc_forward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& bias);

template <class T>
TensorT<T> maxpool_forward(const TensorT<T>& x, int window, int stride);

template <class T>
TensorT<T> lrn_forward(const TensorT<T>& x, int n, double alpha, double beta, double k);

template <class T>
void gemm_nn(int64_t M, int64_t N, int64_t K, const T* A, const T* B, T* C,
             bool accumulate);

RasterImage clahe(const RasterImage& gray, const ClaheParams& p);

RasterImage resize_bilinear(const RasterImage& img, int out_w, int out_h);

} // namespace plastisort::serial
