#pragma once

// Dense numeric kernels behind the tensor ops.
//
// Every kernel exists twice: an OpenMP-parallel blocked version used by the
// library, and a plain serial version in `reference` used by tests and the
// benchmark. Parallel kernels split work over output elements only, so each
// output is reduced in the same order whatever the thread count.

#include <cstddef>

namespace mans::kernels {

enum class Trans { kNo, kYes };

/// C = alpha * op(A) * op(B) + beta * C, row-major. op(A) is m x k, op(B) is k x n.
template <typename T>
void gemm(Trans trans_a, Trans trans_b, int m, int n, int k, T alpha, const T* a, int lda,
          const T* b, int ldb, T beta, T* c, int ldc);

/// Geometry of one 2-D cross-correlation over a single image.
struct ConvGeometry {
  int channels;
  int height;
  int width;
  int kernel;
  int stride;
  int pad;

  int out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  int out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
  int patch_size() const { return channels * kernel * kernel; }
};

/// Unfolds one C x H x W image into a (C*k*k) x (H'*W') column matrix whose row
/// stride is `ld` (>= H'*W'), so several images can share one wide matrix.
template <typename T>
void im2col(const ConvGeometry& g, const T* image, T* columns, std::size_t ld);

/// Adjoint of im2col: scatters-and-adds columns back into a zeroed image.
template <typename T>
void col2im(const ConvGeometry& g, const T* columns, std::size_t ld, T* image);

/// Number of OpenMP threads kernels will use (1 when built without OpenMP).
int thread_count();
void set_thread_count(int threads);

namespace reference {

template <typename T>
void gemm(Trans trans_a, Trans trans_b, int m, int n, int k, T alpha, const T* a, int lda,
          const T* b, int ldb, T beta, T* c, int ldc);

template <typename T>
void im2col(const ConvGeometry& g, const T* image, T* columns, std::size_t ld);

template <typename T>
void col2im(const ConvGeometry& g, const T* columns, std::size_t ld, T* image);

}  // namespace reference

}  // namespace mans::kernels
