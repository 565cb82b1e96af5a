#include "mans/kernels.hpp"

#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mans::kernels {

namespace {

// Register tile: kMR rows of A against kNR columns of B (two 512-bit vectors wide).
template <typename T>
struct Tile {
  static constexpr int kMR = 8;
  static constexpr int kNR = 128 / static_cast<int>(sizeof(T));
};

constexpr int kKC = 256;
constexpr int kNC = 2048;
// Below this many multiply-adds packing costs more than it saves.
constexpr long kSmallWork = 48L * 1024;

template <typename T>
inline T element(const T* a, int ld, Trans t, int row, int col) {
  return t == Trans::kNo ? a[static_cast<std::size_t>(row) * ld + col]
                         : a[static_cast<std::size_t>(col) * ld + row];
}

// Packs rows [0, m) x cols [p0, p0+kc) of op(A) into kMR-row panels, zero padded.
template <typename T>
void pack_a(Trans ta, const T* a, int lda, int m, int p0, int kc, T* out) {
  constexpr int MR = Tile<T>::kMR;
  const int panels = (m + MR - 1) / MR;
#pragma omp parallel for schedule(static)
  for (int panel = 0; panel < panels; ++panel) {
    T* dst = out + static_cast<std::size_t>(panel) * MR * kc;
    const int i0 = panel * MR;
    const int rows = std::min(MR, m - i0);
    for (int p = 0; p < kc; ++p) {
      for (int i = 0; i < rows; ++i) dst[p * MR + i] = element(a, lda, ta, i0 + i, p0 + p);
      for (int i = rows; i < MR; ++i) dst[p * MR + i] = T(0);
    }
  }
}

// Packs rows [p0, p0+kc) x cols [j0, j0+nc) of op(B) into kNR-column panels.
template <typename T>
void pack_b(Trans tb, const T* b, int ldb, int p0, int kc, int j0, int nc, T* out) {
  constexpr int NR = Tile<T>::kNR;
  const int panels = (nc + NR - 1) / NR;
#pragma omp parallel for schedule(static)
  for (int panel = 0; panel < panels; ++panel) {
    T* dst = out + static_cast<std::size_t>(panel) * NR * kc;
    const int c0 = j0 + panel * NR;
    const int cols = std::min(NR, j0 + nc - c0);
    for (int p = 0; p < kc; ++p) {
      T* row = dst + p * NR;
      if (tb == Trans::kNo) {
        const T* src = b + static_cast<std::size_t>(p0 + p) * ldb + c0;
        for (int j = 0; j < cols; ++j) row[j] = src[j];
      } else {
        for (int j = 0; j < cols; ++j) row[j] = b[static_cast<std::size_t>(c0 + j) * ldb + p0 + p];
      }
      for (int j = cols; j < NR; ++j) row[j] = T(0);
    }
  }
}

template <typename T>
inline void micro_kernel(int kc, const T* __restrict ap, const T* __restrict bp, T* __restrict c,
                         int ldc, int rows, int cols, T alpha, T beta, bool overwrite) {
  constexpr int MR = Tile<T>::kMR;
  constexpr int NR = Tile<T>::kNR;
  T acc[MR][NR] = {};
  for (int p = 0; p < kc; ++p) {
    const T* a = ap + p * MR;
    const T* b = bp + p * NR;
#pragma GCC unroll 8
    for (int i = 0; i < MR; ++i) {
      const T av = a[i];
#pragma omp simd
      for (int j = 0; j < NR; ++j) acc[i][j] += av * b[j];
    }
  }
  for (int i = 0; i < rows; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * ldc;
    if (overwrite) {
      if (beta == T(0)) {
        for (int j = 0; j < cols; ++j) crow[j] = alpha * acc[i][j];
      } else {
        for (int j = 0; j < cols; ++j) crow[j] = alpha * acc[i][j] + beta * crow[j];
      }
    } else {
      for (int j = 0; j < cols; ++j) crow[j] += alpha * acc[i][j];
    }
  }
}

template <typename T>
void scale_c(int m, int n, T beta, T* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    T* row = c + static_cast<std::size_t>(i) * ldc;
    if (beta == T(0)) {
      std::fill(row, row + n, T(0));
    } else {
      for (int j = 0; j < n; ++j) row[j] *= beta;
    }
  }
}

// Serial row-streaming product for tiny problems; each C row is accumulated in p order.
template <typename T>
void small_gemm(Trans trans_a, Trans trans_b, int m, int n, int k, T alpha, const T* a, int lda,
                const T* b, int ldb, T beta, T* c, int ldc) {
  std::vector<T> row(static_cast<std::size_t>(n));
  for (int i = 0; i < m; ++i) {
    std::fill(row.begin(), row.end(), T(0));
    for (int p = 0; p < k; ++p) {
      const T av = element(a, lda, trans_a, i, p);
      if (trans_b == Trans::kNo) {
        const T* brow = b + static_cast<std::size_t>(p) * ldb;
        for (int j = 0; j < n; ++j) row[j] += av * brow[j];
      } else {
        for (int j = 0; j < n; ++j) row[j] += av * b[static_cast<std::size_t>(j) * ldb + p];
      }
    }
    T* crow = c + static_cast<std::size_t>(i) * ldc;
    if (beta == T(0)) {
      for (int j = 0; j < n; ++j) crow[j] = alpha * row[j];
    } else {
      for (int j = 0; j < n; ++j) crow[j] = alpha * row[j] + beta * crow[j];
    }
  }
}

}  // namespace

template <typename T>
void gemm(Trans trans_a, Trans trans_b, int m, int n, int k, T alpha, const T* a, int lda,
          const T* b, int ldb, T beta, T* c, int ldc) {
  constexpr int MR = Tile<T>::kMR;
  constexpr int NR = Tile<T>::kNR;
  if (m <= 0 || n <= 0) return;
  if (k <= 0) {
    scale_c(m, n, beta, c, ldc);
    return;
  }
  if (static_cast<long>(m) * n * k <= kSmallWork) {
    small_gemm(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
    return;
  }
  const int a_panels = (m + MR - 1) / MR;
  std::vector<T> apack(static_cast<std::size_t>(a_panels) * MR * std::min(k, kKC));
  std::vector<T> bpack(static_cast<std::size_t>((std::min(n, kNC) + NR - 1) / NR) * NR *
                       std::min(k, kKC));

  for (int j0 = 0; j0 < n; j0 += kNC) {
    const int nc = std::min(kNC, n - j0);
    const int b_panels = (nc + NR - 1) / NR;
    for (int p0 = 0; p0 < k; p0 += kKC) {
      const int kc = std::min(kKC, k - p0);
      const bool first = p0 == 0;
      pack_a(trans_a, a, lda, m, p0, kc, apack.data());
      pack_b(trans_b, b, ldb, p0, kc, j0, nc, bpack.data());
#pragma omp parallel for schedule(static)
      for (int jp = 0; jp < b_panels; ++jp) {
        const T* bp = bpack.data() + static_cast<std::size_t>(jp) * NR * kc;
        const int col0 = j0 + jp * NR;
        const int cols = std::min(NR, n - col0);
        for (int ip = 0; ip < a_panels; ++ip) {
          const T* ap = apack.data() + static_cast<std::size_t>(ip) * MR * kc;
          const int row0 = ip * MR;
          const int rows = std::min(MR, m - row0);
          micro_kernel(kc, ap, bp, c + static_cast<std::size_t>(row0) * ldc + col0, ldc, rows,
                       cols, alpha, beta, first);
        }
      }
    }
  }
}

template <typename T>
void im2col(const ConvGeometry& g, const T* image, T* columns, std::size_t ld) {
  const int oh = g.out_height();
  const int ow = g.out_width();
  const int rows = g.patch_size();
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int ch = r / (g.kernel * g.kernel);
    const int ky = (r / g.kernel) % g.kernel;
    const int kx = r % g.kernel;
    const T* plane = image + static_cast<std::size_t>(ch) * g.height * g.width;
    T* dst = columns + static_cast<std::size_t>(r) * ld;
    for (int oy = 0; oy < oh; ++oy) {
      const int iy = oy * g.stride - g.pad + ky;
      T* out = dst + static_cast<std::size_t>(oy) * ow;
      if (iy < 0 || iy >= g.height) {
        std::fill(out, out + ow, T(0));
        continue;
      }
      const T* src = plane + static_cast<std::size_t>(iy) * g.width;
      for (int ox = 0; ox < ow; ++ox) {
        const int ix = ox * g.stride - g.pad + kx;
        out[ox] = (ix >= 0 && ix < g.width) ? src[ix] : T(0);
      }
    }
  }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* columns, std::size_t ld, T* image) {
  const int oh = g.out_height();
  const int ow = g.out_width();
  const int kk = g.kernel * g.kernel;
  // One thread per channel: every image element is accumulated by exactly one thread.
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < g.channels; ++ch) {
    T* plane = image + static_cast<std::size_t>(ch) * g.height * g.width;
    for (int q = 0; q < kk; ++q) {
      const int ky = q / g.kernel;
      const int kx = q % g.kernel;
      const T* src = columns + static_cast<std::size_t>(ch * kk + q) * ld;
      for (int oy = 0; oy < oh; ++oy) {
        const int iy = oy * g.stride - g.pad + ky;
        if (iy < 0 || iy >= g.height) continue;
        T* dst = plane + static_cast<std::size_t>(iy) * g.width;
        const T* s = src + static_cast<std::size_t>(oy) * ow;
        for (int ox = 0; ox < ow; ++ox) {
          const int ix = ox * g.stride - g.pad + kx;
          if (ix >= 0 && ix < g.width) dst[ix] += s[ox];
        }
      }
    }
  }
}

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_thread_count(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

namespace reference {

template <typename T>
void gemm(Trans trans_a, Trans trans_b, int m, int n, int k, T alpha, const T* a, int lda,
          const T* b, int ldb, T beta, T* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T sum = T(0);
      for (int p = 0; p < k; ++p) {
        sum += element(a, lda, trans_a, i, p) * element(b, ldb, trans_b, p, j);
      }
      T& out = c[static_cast<std::size_t>(i) * ldc + j];
      out = beta == T(0) ? alpha * sum : alpha * sum + beta * out;
    }
  }
}

template <typename T>
void im2col(const ConvGeometry& g, const T* image, T* columns, std::size_t ld) {
  const int oh = g.out_height();
  const int ow = g.out_width();
  for (int ch = 0; ch < g.channels; ++ch) {
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        const std::size_t row = static_cast<std::size_t>((ch * g.kernel + ky) * g.kernel + kx);
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            const int iy = oy * g.stride - g.pad + ky;
            const int ix = ox * g.stride - g.pad + kx;
            const bool inside = iy >= 0 && iy < g.height && ix >= 0 && ix < g.width;
            columns[row * ld + oy * ow + ox] =
                inside ? image[(static_cast<std::size_t>(ch) * g.height + iy) * g.width + ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* columns, std::size_t ld, T* image) {
  const int oh = g.out_height();
  const int ow = g.out_width();
  for (int ch = 0; ch < g.channels; ++ch) {
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        const std::size_t row = static_cast<std::size_t>((ch * g.kernel + ky) * g.kernel + kx);
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            const int iy = oy * g.stride - g.pad + ky;
            const int ix = ox * g.stride - g.pad + kx;
            if (iy >= 0 && iy < g.height && ix >= 0 && ix < g.width) {
              image[(static_cast<std::size_t>(ch) * g.height + iy) * g.width + ix] +=
                  columns[row * ld + oy * ow + ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace reference

#define MANS_INSTANTIATE_KERNELS(T)                                                       \
  template void gemm<T>(Trans, Trans, int, int, int, T, const T*, int, const T*, int, T, T*, \
                        int);                                                             \
  template void im2col<T>(const ConvGeometry&, const T*, T*, std::size_t);                \
  template void col2im<T>(const ConvGeometry&, const T*, std::size_t, T*);                \
  template void reference::gemm<T>(Trans, Trans, int, int, int, T, const T*, int, const T*, \
                                   int, T, T*, int);                                      \
  template void reference::im2col<T>(const ConvGeometry&, const T*, T*, std::size_t);     \
  template void reference::col2im<T>(const ConvGeometry&, const T*, std::size_t, T*);

MANS_INSTANTIATE_KERNELS(float)
MANS_INSTANTIATE_KERNELS(double)

#undef MANS_INSTANTIATE_KERNELS

}  // namespace mans::kernels
