#pragma once

#include <cstddef>

namespace mvgen {

// Geometry of one conv layer application. out_h/out_w follow the usual
// floor((extent + 2*pad - kernel) / stride) + 1 rule.
struct ConvDims {
  int channels = 0;
  int height = 0;
  int width = 0;
  int kernel = 0;
  int stride = 1;
  int pad = 0;
  int out_h = 0;
  int out_w = 0;

  int patch_rows() const { return channels * kernel * kernel; }
  int patch_cols() const { return out_h * out_w; }
};

ConvDims make_conv_dims(int channels, int height, int width, int kernel, int stride, int pad);

namespace kern {

// C(m x n) = A(m x k) @ B(k x n), row-major. accumulate=true adds into C.
// Parallel over row tiles; every output element is reduced in a fixed k
// order, so results are bit-identical for any thread count.
template <typename T>
void gemm(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false);

// C(m x n) = A(m x k) @ B(n x k)^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false);

// C(m x n) = A(k x m)^T @ B(k x n)
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false);

template <typename T>
void transpose(const T* src, T* dst, int rows, int cols);

// Patch matrix of shape (patch_rows, patch_cols) from one CHW image.
template <typename T>
void im2col(const T* img, T* cols, const ConvDims& d);

// Adjoint of im2col: scatter a patch matrix back into a CHW image.
// Formulated as a gather per image element, so it parallelizes without races.
template <typename T>
void col2im(const T* cols, T* img, const ConvDims& d);

}  // namespace kern

// Plain serial loops. Kept as the reference implementation the parallel
// kernels are tested and benchmarked against.
namespace ref {

template <typename T>
void gemm(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false);

template <typename T>
void im2col(const T* img, T* cols, const ConvDims& d);

template <typename T>
void col2im(const T* cols, T* img, const ConvDims& d);

// Direct quadruple-loop convolution of a NCHW batch with an OIKK kernel.
template <typename T>
void conv2d_naive(const T* input, const T* kernel, T* output, int batch, int in_c, int h, int w,
                  int out_c, int ksize, int stride, int pad);

}  // namespace ref

}  // namespace mvgen
