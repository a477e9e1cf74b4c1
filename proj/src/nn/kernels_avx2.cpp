// Compiled with -mavx2 -mfma. Only reached after a runtime CPU check.

#include <immintrin.h>

#include <cmath>

#include "kernels_internal.hpp"

namespace trailgrade::nn::detail {

namespace {

// 4 rows x 8 columns of C held in registers across the whole k loop.
inline void block_nn_4x8(std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    __m256d c00 = _mm256_loadu_pd(c + 0 * n), c01 = _mm256_loadu_pd(c + 0 * n + 4);
    __m256d c10 = _mm256_loadu_pd(c + 1 * n), c11 = _mm256_loadu_pd(c + 1 * n + 4);
    __m256d c20 = _mm256_loadu_pd(c + 2 * n), c21 = _mm256_loadu_pd(c + 2 * n + 4);
    __m256d c30 = _mm256_loadu_pd(c + 3 * n), c31 = _mm256_loadu_pd(c + 3 * n + 4);
    for (std::size_t p = 0; p < k; ++p) {
        const __m256d b0 = _mm256_loadu_pd(b + p * n);
        const __m256d b1 = _mm256_loadu_pd(b + p * n + 4);
        __m256d av = _mm256_broadcast_sd(a + 0 * k + p);
        c00 = _mm256_fmadd_pd(av, b0, c00);
        c01 = _mm256_fmadd_pd(av, b1, c01);
        av = _mm256_broadcast_sd(a + 1 * k + p);
        c10 = _mm256_fmadd_pd(av, b0, c10);
        c11 = _mm256_fmadd_pd(av, b1, c11);
        av = _mm256_broadcast_sd(a + 2 * k + p);
        c20 = _mm256_fmadd_pd(av, b0, c20);
        c21 = _mm256_fmadd_pd(av, b1, c21);
        av = _mm256_broadcast_sd(a + 3 * k + p);
        c30 = _mm256_fmadd_pd(av, b0, c30);
        c31 = _mm256_fmadd_pd(av, b1, c31);
    }
    _mm256_storeu_pd(c + 0 * n, c00), _mm256_storeu_pd(c + 0 * n + 4, c01);
    _mm256_storeu_pd(c + 1 * n, c10), _mm256_storeu_pd(c + 1 * n + 4, c11);
    _mm256_storeu_pd(c + 2 * n, c20), _mm256_storeu_pd(c + 2 * n + 4, c21);
    _mm256_storeu_pd(c + 3 * n, c30), _mm256_storeu_pd(c + 3 * n + 4, c31);
}

inline void block_nn_4x4(std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    __m256d c0 = _mm256_loadu_pd(c + 0 * n);
    __m256d c1 = _mm256_loadu_pd(c + 1 * n);
    __m256d c2 = _mm256_loadu_pd(c + 2 * n);
    __m256d c3 = _mm256_loadu_pd(c + 3 * n);
    for (std::size_t p = 0; p < k; ++p) {
        const __m256d bv = _mm256_loadu_pd(b + p * n);
        c0 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + 0 * k + p), bv, c0);
        c1 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + 1 * k + p), bv, c1);
        c2 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + 2 * k + p), bv, c2);
        c3 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + 3 * k + p), bv, c3);
    }
    _mm256_storeu_pd(c + 0 * n, c0);
    _mm256_storeu_pd(c + 1 * n, c1);
    _mm256_storeu_pd(c + 2 * n, c2);
    _mm256_storeu_pd(c + 3 * n, c3);
}

inline void row_nn(std::size_t n, std::size_t k, std::size_t j0, const double* a, const double* b, double* c) {
    std::size_t j = j0;
    for (; j + 4 <= n; j += 4) {
        __m256d acc = _mm256_loadu_pd(c + j);
        for (std::size_t p = 0; p < k; ++p) {
            acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p), _mm256_loadu_pd(b + p * n + j), acc);
        }
        _mm256_storeu_pd(c + j, acc);
    }
    for (; j < n; ++j) {
        double acc = c[j];
        for (std::size_t p = 0; p < k; ++p) acc = std::fma(a[p], b[p * n + j], acc);
        c[j] = acc;
    }
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        std::size_t j = 0;
        for (; j + 8 <= n; j += 8) block_nn_4x8(n, k, ai, b + j, ci + j);
        for (; j + 4 <= n; j += 4) block_nn_4x4(n, k, ai, b + j, ci + j);
        if (j < n) {
            for (std::size_t r = 0; r < 4; ++r) row_nn(n, k, j, ai + r * k, b, ci + r * n);
        }
    }
    for (; i < m; ++i) row_nn(n, k, 0, a + i * k, b, c + i * n);
}

// C rows p..p+3, columns j..j+3, reduced over all m.
inline void block_tn_4x4(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    __m256d c0 = _mm256_loadu_pd(c + 0 * n);
    __m256d c1 = _mm256_loadu_pd(c + 1 * n);
    __m256d c2 = _mm256_loadu_pd(c + 2 * n);
    __m256d c3 = _mm256_loadu_pd(c + 3 * n);
    for (std::size_t i = 0; i < m; ++i) {
        const __m256d bv = _mm256_loadu_pd(b + i * n);
        const double* ai = a + i * k;
        c0 = _mm256_fmadd_pd(_mm256_broadcast_sd(ai + 0), bv, c0);
        c1 = _mm256_fmadd_pd(_mm256_broadcast_sd(ai + 1), bv, c1);
        c2 = _mm256_fmadd_pd(_mm256_broadcast_sd(ai + 2), bv, c2);
        c3 = _mm256_fmadd_pd(_mm256_broadcast_sd(ai + 3), bv, c3);
    }
    _mm256_storeu_pd(c + 0 * n, c0);
    _mm256_storeu_pd(c + 1 * n, c1);
    _mm256_storeu_pd(c + 2 * n, c2);
    _mm256_storeu_pd(c + 3 * n, c3);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    const std::size_t n4 = n - n % 4;
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
        for (std::size_t j = 0; j < n4; j += 4) block_tn_4x4(m, n, k, a + p, b + j, c + p * n + j);
    }
    // Leftover C rows use the vector path column-wise.
    for (; p < k; ++p) {
        for (std::size_t j = 0; j < n4; j += 4) {
            __m256d acc = _mm256_loadu_pd(c + p * n + j);
            for (std::size_t i = 0; i < m; ++i) {
                acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + i * k + p), _mm256_loadu_pd(b + i * n + j), acc);
            }
            _mm256_storeu_pd(c + p * n + j, acc);
        }
    }
    // Leftover columns.
    for (std::size_t q = 0; q < k; ++q) {
        for (std::size_t j = n4; j < n; ++j) {
            double acc = c[q * n + j];
            for (std::size_t i = 0; i < m; ++i) acc = std::fma(a[i * k + q], b[i * n + j], acc);
            c[q * n + j] = acc;
        }
    }
}

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(std::size_t n, const double* x, const double* y) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s = std::fma(x[i], y[i], s);
    return s;
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void adam_update(std::size_t n, double* param, const double* grad, double* m, double* v, double beta1,
                 double beta2, double lr, double c1, double c2, double eps) {
    const __m256d b1 = _mm256_set1_pd(beta1), nb1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d b2 = _mm256_set1_pd(beta2), nb2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d lrv = _mm256_set1_pd(lr), c1v = _mm256_set1_pd(c1), c2v = _mm256_set1_pd(c2);
    const __m256d epsv = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d g = _mm256_loadu_pd(grad + i);
        const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(nb1, g));
        const __m256d vi =
            _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)), _mm256_mul_pd(_mm256_mul_pd(nb2, g), g));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d num = _mm256_mul_pd(lrv, _mm256_mul_pd(mi, c1v));
        const __m256d den = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vi, c2v)), epsv);
        _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), _mm256_div_pd(num, den)));
    }
    for (; i < n; ++i) {
        const double g = grad[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        param[i] -= lr * (m[i] * c1) / (std::sqrt(v[i] * c2) + eps);
    }
}

constexpr KernelTable kAvx2{"avx2", gemm_nn, gemm_tn, dot, axpy, adam_update};

}  // namespace

const KernelTable& avx2_table() noexcept { return kAvx2; }

}  // namespace trailgrade::nn::detail
