#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>

namespace plastisort::kernels {

// OpenMP-parallel kernels behind the network math.
//
// Determinism contract: every output element is produced by exactly one
// thread and accumulated in a fixed (ascending-k) order, so results are
// bit-identical for any thread count and any schedule. No floating-point
// OpenMP reductions anywhere. The serial counterparts in
// plastisort::serial are the reference these are tested against.

// C (M x N) = A (M x K) * B (K x N), all row-major. With accumulate the
// products are added onto the existing C. Register-blocked over MR rows and
// NB-wide column tiles; the inner loop is a saxpy the compiler vectorizes.
template <class T>
void gemm_nn(int64_t M, int64_t N, int64_t K, const T* A, const T* B, T* C,
             bool accumulate) {
  constexpr int64_t MR = 4;
  constexpr int64_t NB = 512;
  const int64_t mblocks = (M + MR - 1) / MR;
  const int64_t nblocks = (N + NB - 1) / NB;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t mb = 0; mb < mblocks; ++mb) {
    for (int64_t nb = 0; nb < nblocks; ++nb) {
      const int64_t m0 = mb * MR, m1 = std::min(m0 + MR, M);
      const int64_t n0 = nb * NB, n1 = std::min(n0 + NB, N);
      if (!accumulate) {
        for (int64_t m = m0; m < m1; ++m)
          std::fill(C + m * N + n0, C + m * N + n1, T(0));
      }
      for (int64_t k = 0; k < K; ++k) {
        const T* brow = B + k * N;
        for (int64_t m = m0; m < m1; ++m) {
          const T a = A[m * K + k];
          T* crow = C + m * N;
          for (int64_t n = n0; n < n1; ++n) crow[n] += a * brow[n];
        }
      }
    }
  }
}

template <class T>
void transpose(int64_t rows, int64_t cols, const T* src, T* dst) {
  constexpr int64_t BS = 64;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t r0 = 0; r0 < rows; r0 += BS) {
    for (int64_t c0 = 0; c0 < cols; c0 += BS) {
      const int64_t r1 = std::min(r0 + BS, rows);
      const int64_t c1 = std::min(c0 + BS, cols);
      for (int64_t r = r0; r < r1; ++r)
        for (int64_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
    }
  }
}

// Unrolls one C x H x W image into a (C*KH*KW) x (OH*OW) matrix; out-of-
// bounds taps are zero. Row k corresponds to (c, kh, kw) in that order, so
// a GEMM over it accumulates exactly like a naive conv loop nested
// c -> kh -> kw.
template <class T>
void im2col(const T* src, int64_t C, int64_t H, int64_t W, int64_t KH, int64_t KW,
            int64_t stride, int64_t pad, int64_t OH, int64_t OW, T* col) {
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t kh = 0; kh < KH; ++kh) {
      for (int64_t kw = 0; kw < KW; ++kw) {
        T* row = col + ((c * KH + kh) * KW + kw) * (OH * OW);
        for (int64_t oh = 0; oh < OH; ++oh) {
          int64_t ih = oh * stride - pad + kh;
          T* dst = row + oh * OW;
          if (ih < 0 || ih >= H) {
            std::fill(dst, dst + OW, T(0));
            continue;
          }
          const T* srow = src + (c * H + ih) * W;
          for (int64_t ow = 0; ow < OW; ++ow) {
            int64_t iw = ow * stride - pad + kw;
            dst[ow] = (iw >= 0 && iw < W) ? srow[iw] : T(0);
          }
        }
      }
    }
  }
}

// Scatter-add inverse of im2col. Serial on purpose: callers parallelize
// over batch items, whose destination slices are disjoint.
template <class T>
void col2im_accumulate(const T* col, int64_t C, int64_t H, int64_t W, int64_t KH,
                       int64_t KW, int64_t stride, int64_t pad, int64_t OH, int64_t OW,
                       T* dst) {
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t kh = 0; kh < KH; ++kh) {
      for (int64_t kw = 0; kw < KW; ++kw) {
        const T* row = col + ((c * KH + kh) * KW + kw) * (OH * OW);
        for (int64_t oh = 0; oh < OH; ++oh) {
          int64_t ih = oh * stride - pad + kh;
          if (ih < 0 || ih >= H) continue;
          T* drow = dst + (c * H + ih) * W;
          const T* srow = row + oh * OW;
          for (int64_t ow = 0; ow < OW; ++ow) {
            int64_t iw = ow * stride - pad + kw;
            if (iw >= 0 && iw < W) drow[iw] += srow[ow];
          }
        }
      }
    }
  }
}

} // namespace plastisort::kernels
