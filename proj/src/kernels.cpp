#include "mvgen/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvgen/threading.hpp"

namespace mvgen {

ConvDims make_conv_dims(int channels, int height, int width, int kernel, int stride, int pad) {
  if (channels <= 0 || height <= 0 || width <= 0 || kernel <= 0 || stride <= 0 || pad < 0)
    throw std::invalid_argument("conv dims must be positive (pad >= 0)");
  if (height + 2 * pad < kernel || width + 2 * pad < kernel)
    throw std::invalid_argument("kernel " + std::to_string(kernel) + " exceeds padded extent " +
                                std::to_string(height + 2 * pad) + "x" +
                                std::to_string(width + 2 * pad));
  ConvDims d;
  d.channels = channels;
  d.height = height;
  d.width = width;
  d.kernel = kernel;
  d.stride = stride;
  d.pad = pad;
  d.out_h = (height + 2 * pad - kernel) / stride + 1;
  d.out_w = (width + 2 * pad - kernel) / stride + 1;
  return d;
}

namespace kern {

namespace {

constexpr int kRowTile = 4;   // MR
constexpr int kColTile = 16;  // NR, one 512-bit vector of floats

// One MR x NR register tile of C. The accumulator array stays in vector
// registers across the whole k loop.
template <typename T>
inline void micro_tile(const T* a, const T* b, T* c, int k, int lda, int ldb, int ldc,
                       bool accumulate) {
  T acc[kRowTile][kColTile];
  for (int i = 0; i < kRowTile; ++i)
    for (int j = 0; j < kColTile; ++j) acc[i][j] = accumulate ? c[i * ldc + j] : T(0);
  for (int p = 0; p < k; ++p) {
    const T* brow = b + static_cast<size_t>(p) * ldb;
    for (int i = 0; i < kRowTile; ++i) {
      T av = a[static_cast<size_t>(i) * lda + p];
#pragma omp simd
      for (int j = 0; j < kColTile; ++j) acc[i][j] += av * brow[j];
    }
  }
  for (int i = 0; i < kRowTile; ++i)
    for (int j = 0; j < kColTile; ++j) c[i * ldc + j] = acc[i][j];
}

// Tail tile of arbitrary size < MR x NR.
template <typename T>
inline void edge_tile(const T* a, const T* b, T* c, int rows, int cols, int k, int lda, int ldb,
                      int ldc, bool accumulate) {
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      T sum = accumulate ? c[i * ldc + j] : T(0);
      for (int p = 0; p < k; ++p) sum += a[static_cast<size_t>(i) * lda + p] * b[static_cast<size_t>(p) * ldb + j];
      c[i * ldc + j] = sum;
    }
  }
}

thread_local std::vector<char> tl_scratch;

template <typename T>
T* scratch(size_t count) {
  size_t bytes = count * sizeof(T);
  if (tl_scratch.size() < bytes) tl_scratch.resize(bytes);
  return reinterpret_cast<T*>(tl_scratch.data());
}

}  // namespace

template <typename T>
void gemm(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  int row_tiles = m / kRowTile;
  int nt = thread_count();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1 && row_tiles > 1)
  for (int t = 0; t < row_tiles; ++t) {
    int i0 = t * kRowTile;
    int j0 = 0;
    for (; j0 + kColTile <= n; j0 += kColTile)
      micro_tile(a + static_cast<size_t>(i0) * k, b + j0, c + static_cast<size_t>(i0) * n + j0, k,
                 k, n, n, accumulate);
    if (j0 < n)
      edge_tile(a + static_cast<size_t>(i0) * k, b + j0, c + static_cast<size_t>(i0) * n + j0,
                kRowTile, n - j0, k, k, n, n, accumulate);
  }
  int i0 = row_tiles * kRowTile;
  if (i0 < m)
    edge_tile(a + static_cast<size_t>(i0) * k, b, c + static_cast<size_t>(i0) * n, m - i0, n, k, k,
              n, n, accumulate);
}

template <typename T>
void transpose(const T* src, T* dst, int rows, int cols) {
  constexpr int B = 32;
  for (int i0 = 0; i0 < rows; i0 += B)
    for (int j0 = 0; j0 < cols; j0 += B) {
      int i1 = std::min(i0 + B, rows);
      int j1 = std::min(j0 + B, cols);
      for (int i = i0; i < i1; ++i)
        for (int j = j0; j < j1; ++j)
          dst[static_cast<size_t>(j) * rows + i] = src[static_cast<size_t>(i) * cols + j];
    }
}

template <typename T>
void gemm_nt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  // B arrives as (n x k); transpose into scratch and reuse the one tuned path.
  T* bt = scratch<T>(static_cast<size_t>(k) * n);
  transpose(b, bt, n, k);
  gemm(a, bt, c, m, k, n, accumulate);
}

template <typename T>
void gemm_tn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  T* at = scratch<T>(static_cast<size_t>(k) * m);
  transpose(a, at, k, m);
  gemm(at, b, c, m, k, n, accumulate);
}

template <typename T>
void im2col(const T* img, T* cols, const ConvDims& d) {
  const int K = d.kernel, P = d.patch_cols();
  int nt = thread_count();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1 && d.channels > 1)
  for (int c = 0; c < d.channels; ++c) {
    const T* plane = img + static_cast<size_t>(c) * d.height * d.width;
    for (int kh = 0; kh < K; ++kh)
      for (int kw = 0; kw < K; ++kw) {
        T* row = cols + (static_cast<size_t>(c) * K * K + kh * K + kw) * P;
        for (int oh = 0; oh < d.out_h; ++oh) {
          int ih = oh * d.stride - d.pad + kh;
          T* out = row + static_cast<size_t>(oh) * d.out_w;
          if (ih < 0 || ih >= d.height) {
            std::fill(out, out + d.out_w, T(0));
            continue;
          }
          const T* src = plane + static_cast<size_t>(ih) * d.width;
          for (int ow = 0; ow < d.out_w; ++ow) {
            int iw = ow * d.stride - d.pad + kw;
            out[ow] = (iw >= 0 && iw < d.width) ? src[iw] : T(0);
          }
        }
      }
  }
}

template <typename T>
void col2im(const T* cols, T* img, const ConvDims& d) {
  const int K = d.kernel, P = d.patch_cols();
  int nt = thread_count();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1 && d.channels > 1)
  for (int c = 0; c < d.channels; ++c) {
    T* plane = img + static_cast<size_t>(c) * d.height * d.width;
    for (int ih = 0; ih < d.height; ++ih)
      for (int iw = 0; iw < d.width; ++iw) {
        T sum = 0;
        // every (kh, kw) maps this image element to at most one patch column
        for (int kh = 0; kh < K; ++kh) {
          int oh_num = ih + d.pad - kh;
          if (oh_num < 0 || oh_num % d.stride != 0) continue;
          int oh = oh_num / d.stride;
          if (oh >= d.out_h) continue;
          for (int kw = 0; kw < K; ++kw) {
            int ow_num = iw + d.pad - kw;
            if (ow_num < 0 || ow_num % d.stride != 0) continue;
            int ow = ow_num / d.stride;
            if (ow >= d.out_w) continue;
            sum += cols[(static_cast<size_t>(c) * K * K + kh * K + kw) * P +
                        static_cast<size_t>(oh) * d.out_w + ow];
          }
        }
        plane[static_cast<size_t>(ih) * d.width + iw] = sum;
      }
  }
}

template void gemm<float>(const float*, const float*, float*, int, int, int, bool);
template void gemm<double>(const double*, const double*, double*, int, int, int, bool);
template void gemm_nt<float>(const float*, const float*, float*, int, int, int, bool);
template void gemm_nt<double>(const double*, const double*, double*, int, int, int, bool);
template void gemm_tn<float>(const float*, const float*, float*, int, int, int, bool);
template void gemm_tn<double>(const double*, const double*, double*, int, int, int, bool);
template void transpose<float>(const float*, float*, int, int);
template void transpose<double>(const double*, double*, int, int);
template void im2col<float>(const float*, float*, const ConvDims&);
template void im2col<double>(const double*, double*, const ConvDims&);
template void col2im<float>(const float*, float*, const ConvDims&);
template void col2im<double>(const double*, double*, const ConvDims&);

}  // namespace kern

namespace ref {

template <typename T>
void gemm(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      T sum = accumulate ? c[static_cast<size_t>(i) * n + j] : T(0);
      for (int p = 0; p < k; ++p)
        sum += a[static_cast<size_t>(i) * k + p] * b[static_cast<size_t>(p) * n + j];
      c[static_cast<size_t>(i) * n + j] = sum;
    }
}

template <typename T>
void im2col(const T* img, T* cols, const ConvDims& d) {
  const int K = d.kernel, P = d.patch_cols();
  for (int c = 0; c < d.channels; ++c)
    for (int kh = 0; kh < K; ++kh)
      for (int kw = 0; kw < K; ++kw)
        for (int oh = 0; oh < d.out_h; ++oh)
          for (int ow = 0; ow < d.out_w; ++ow) {
            int ih = oh * d.stride - d.pad + kh;
            int iw = ow * d.stride - d.pad + kw;
            T v = 0;
            if (ih >= 0 && ih < d.height && iw >= 0 && iw < d.width)
              v = img[(static_cast<size_t>(c) * d.height + ih) * d.width + iw];
            cols[(static_cast<size_t>(c) * K * K + kh * K + kw) * P +
                 static_cast<size_t>(oh) * d.out_w + ow] = v;
          }
}

template <typename T>
void col2im(const T* cols, T* img, const ConvDims& d) {
  std::fill(img, img + static_cast<size_t>(d.channels) * d.height * d.width, T(0));
  const int K = d.kernel, P = d.patch_cols();
  for (int c = 0; c < d.channels; ++c)
    for (int kh = 0; kh < K; ++kh)
      for (int kw = 0; kw < K; ++kw)
        for (int oh = 0; oh < d.out_h; ++oh)
          for (int ow = 0; ow < d.out_w; ++ow) {
            int ih = oh * d.stride - d.pad + kh;
            int iw = ow * d.stride - d.pad + kw;
            if (ih >= 0 && ih < d.height && iw >= 0 && iw < d.width)
              img[(static_cast<size_t>(c) * d.height + ih) * d.width + iw] +=
                  cols[(static_cast<size_t>(c) * K * K + kh * K + kw) * P +
                       static_cast<size_t>(oh) * d.out_w + ow];
          }
}

template <typename T>
void conv2d_naive(const T* input, const T* kernel, T* output, int batch, int in_c, int h, int w,
                  int out_c, int ksize, int stride, int pad) {
  ConvDims d = make_conv_dims(in_c, h, w, ksize, stride, pad);
  for (int n = 0; n < batch; ++n)
    for (int oc = 0; oc < out_c; ++oc)
      for (int oh = 0; oh < d.out_h; ++oh)
        for (int ow = 0; ow < d.out_w; ++ow) {
          T sum = 0;
          for (int ic = 0; ic < in_c; ++ic)
            for (int kh = 0; kh < ksize; ++kh)
              for (int kw = 0; kw < ksize; ++kw) {
                int ih = oh * stride - pad + kh;
                int iw = ow * stride - pad + kw;
                if (ih < 0 || ih >= h || iw < 0 || iw >= w) continue;
                sum += input[((static_cast<size_t>(n) * in_c + ic) * h + ih) * w + iw] *
                       kernel[((static_cast<size_t>(oc) * in_c + ic) * ksize + kh) * ksize + kw];
              }
          output[((static_cast<size_t>(n) * out_c + oc) * d.out_h + oh) * d.out_w + ow] = sum;
        }
}

template void gemm<float>(const float*, const float*, float*, int, int, int, bool);
template void gemm<double>(const double*, const double*, double*, int, int, int, bool);
template void im2col<float>(const float*, float*, const ConvDims&);
template void im2col<double>(const double*, double*, const ConvDims&);
template void col2im<float>(const float*, float*, const ConvDims&);
template void col2im<double>(const double*, double*, const ConvDims&);
template void conv2d_naive<float>(const float*, const float*, float*, int, int, int, int, int, int,
                                  int, int);
template void conv2d_naive<double>(const double*, const double*, double*, int, int, int, int, int,
                                   int, int, int);

}  // namespace ref

}  // namespace mvgen
