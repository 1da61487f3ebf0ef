#pragma once

#include <cstdint>

namespace dspec {

/// Row-major C (M x N) = A (M x K) * B (K x N), optionally accumulating into
/// C. Each output element is a strictly k-serial sum, so results are bitwise
/// identical for any M/N blocking or thread partition; lanes across N carry
/// the vectorization instead of the reduction.
template <typename T>
void gemm_rowmajor(const T* A, const T* B, T* C, int M, int K, int N,
                   int lda, int ldb, int ldc, bool accumulate);

namespace detail {

template <typename T, int MR, int NB>
inline void gemm_tile(const T* A, int lda, const T* B, int ldb, T* C, int ldc,
                      int K, bool accumulate) {
    T acc[MR][NB];
    for (int m = 0; m < MR; ++m)
        for (int j = 0; j < NB; ++j) acc[m][j] = T(0);
    for (int k = 0; k < K; ++k) {
        const T* brow = B + static_cast<std::int64_t>(k) * ldb;
        for (int m = 0; m < MR; ++m) {
            const T a = A[static_cast<std::int64_t>(m) * lda + k];
            for (int j = 0; j < NB; ++j) acc[m][j] += a * brow[j];
        }
    }
    for (int m = 0; m < MR; ++m) {
        T* crow = C + static_cast<std::int64_t>(m) * ldc;
        if (accumulate) {
            for (int j = 0; j < NB; ++j) crow[j] += acc[m][j];
        } else {
            for (int j = 0; j < NB; ++j) crow[j] = acc[m][j];
        }
    }
}

template <typename T, int MR>
inline void gemm_rows(const T* A, int lda, const T* B, int ldb, T* C, int ldc,
                      int K, int N, bool accumulate) {
    int n = 0;
    for (; n + 32 <= N; n += 32) gemm_tile<T, MR, 32>(A, lda, B + n, ldb, C + n, ldc, K, accumulate);
    for (; n + 8 <= N; n += 8) gemm_tile<T, MR, 8>(A, lda, B + n, ldb, C + n, ldc, K, accumulate);
    for (; n < N; ++n) gemm_tile<T, MR, 1>(A, lda, B + n, ldb, C + n, ldc, K, accumulate);
}

} // namespace detail

template <typename T>
void gemm_rowmajor(const T* A, const T* B, T* C, int M, int K, int N,
                   int lda, int ldb, int ldc, bool accumulate) {
    // wider row blocks for float keep B streaming low without spilling
    constexpr int MRmax = sizeof(T) == 4 ? 8 : 4;
    int m = 0;
    for (; m + MRmax <= M; m += MRmax)
        detail::gemm_rows<T, MRmax>(A + static_cast<std::int64_t>(m) * lda, lda, B, ldb,
                                    C + static_cast<std::int64_t>(m) * ldc, ldc, K, N, accumulate);
    for (; m + 4 <= M; m += 4)
        detail::gemm_rows<T, 4>(A + static_cast<std::int64_t>(m) * lda, lda, B, ldb,
                                C + static_cast<std::int64_t>(m) * ldc, ldc, K, N, accumulate);
    for (; m < M; ++m)
        detail::gemm_rows<T, 1>(A + static_cast<std::int64_t>(m) * lda, lda, B, ldb,
                                C + static_cast<std::int64_t>(m) * ldc, ldc, K, N, accumulate);
}

} // namespace dspec
