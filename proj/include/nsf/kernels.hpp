// Dense matrix product used by the network.
//
// Every output element is accumulated with fused multiply-adds in a fixed
// order over the inner dimension, independent of how many columns are
// computed at once. A column of a batched product is therefore bit-identical
// to the same column computed alone.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace nsf::kernels {

namespace detail {

template <class T, int NC, int MR>
inline void micro(std::size_t p, const T* a, std::size_t lda, const T* b, std::size_t sp, std::size_t sc, T* c,
                  std::size_t ldc) {
  T acc[NC][MR];
  for (int j = 0; j < NC; ++j)
    for (int r = 0; r < MR; ++r) acc[j][r] = c[static_cast<std::size_t>(j) * ldc + static_cast<std::size_t>(r)];
  for (std::size_t k = 0; k < p; ++k) {
    const T* ak = a + k * lda;
    for (int j = 0; j < NC; ++j) {
      const T bj = b[k * sp + static_cast<std::size_t>(j) * sc];
      for (int r = 0; r < MR; ++r) acc[j][r] = std::fma(ak[r], bj, acc[j][r]);
    }
  }
  for (int j = 0; j < NC; ++j)
    for (int r = 0; r < MR; ++r) c[static_cast<std::size_t>(j) * ldc + static_cast<std::size_t>(r)] = acc[j][r];
}

template <class T, int MR>
inline void column_block(int nc, std::size_t p, const T* a, std::size_t lda, const T* b, std::size_t sp,
                         std::size_t sc, T* c, std::size_t ldc) {
  switch (nc) {
    case 6: micro<T, 6, MR>(p, a, lda, b, sp, sc, c, ldc); break;
    case 5: micro<T, 5, MR>(p, a, lda, b, sp, sc, c, ldc); break;
    case 4: micro<T, 4, MR>(p, a, lda, b, sp, sc, c, ldc); break;
    case 3: micro<T, 3, MR>(p, a, lda, b, sp, sc, c, ldc); break;
    case 2: micro<T, 2, MR>(p, a, lda, b, sp, sc, c, ldc); break;
    default: micro<T, 1, MR>(p, a, lda, b, sp, sc, c, ldc); break;
  }
}

}  // namespace detail

/// C[:, j] += sum_k A[:, k] * B(k, j) for j < n, where A is m x p column-major
/// with leading dimension lda, B(k, j) = b[k * sp + j * sc], and C is m x n
/// column-major with leading dimension ldc.
template <class T>
void gemm_acc(std::size_t m, std::size_t n, std::size_t p, const T* a, std::size_t lda, const T* b, std::size_t sp,
              std::size_t sc, T* c, std::size_t ldc) {
  constexpr int kNR = 6;
  constexpr int kMR = 64 / static_cast<int>(sizeof(T)) * 2;  // two cache lines of rows
  for (std::size_t j = 0; j < n; j += kNR) {
    const int nc = static_cast<int>(std::min<std::size_t>(kNR, n - j));
    const T* bj = b + j * sc;
    T* cj = c + j * ldc;
    std::size_t i = 0;
    for (; i + kMR <= m; i += kMR) detail::column_block<T, kMR>(nc, p, a + i, lda, bj, sp, sc, cj + i, ldc);
    for (; i + 8 <= m; i += 8) detail::column_block<T, 8>(nc, p, a + i, lda, bj, sp, sc, cj + i, ldc);
    for (; i < m; ++i) detail::column_block<T, 1>(nc, p, a + i, lda, bj, sp, sc, cj + i, ldc);
  }
}

}  // namespace nsf::kernels
