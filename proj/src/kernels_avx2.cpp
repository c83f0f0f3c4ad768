#include "ckr/kernels.hpp"

#include <cstring>
#include <immintrin.h>

// AVX2/FMA lane. Reductions use 4 independent accumulators and a final
// horizontal fold, so results can differ from the scalar lane by rounding
// only; the equivalence suite pins the tolerance.

namespace ckr::kern::avx2 {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    __m128d s2 = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(s2, s2);
    return _mm_cvtsd_f64(_mm_add_sd(s2, sh));
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
             const double* a, const double* b, double* c, bool acc) {
    if (!acc) std::memset(c, 0, m * n * sizeof(double));
    const std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const __m256d aip = _mm256_set1_pd(arow[p]);
            const double* brow = b + p * n;
            std::size_t j = 0;
            for (; j < n4; j += 4) {
                __m256d cj = _mm256_loadu_pd(crow + j);
                cj = _mm256_fmadd_pd(aip, _mm256_loadu_pd(brow + j), cj);
                _mm256_storeu_pd(crow + j, cj);
            }
            const double s = arow[p];
            for (; j < n; ++j) crow[j] += s * brow[j];
        }
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
             const double* a, const double* b, double* c, bool acc) {
    const std::size_t k4 = k & ~std::size_t(3);
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            __m256d accv = _mm256_setzero_pd();
            std::size_t p = 0;
            for (; p < k4; p += 4)
                accv = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p), _mm256_loadu_pd(brow + p), accv);
            double s = hsum(accv);
            for (; p < k; ++p) s += arow[p] * brow[p];
            crow[j] = acc ? crow[j] + s : s;
        }
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k,
             const double* a, const double* b, double* c, bool acc) {
    if (!acc) std::memset(c, 0, m * n * sizeof(double));
    const std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const __m256d api = _mm256_set1_pd(arow[i]);
            double* crow = c + i * n;
            std::size_t j = 0;
            for (; j < n4; j += 4) {
                __m256d cj = _mm256_loadu_pd(crow + j);
                cj = _mm256_fmadd_pd(api, _mm256_loadu_pd(brow + j), cj);
                _mm256_storeu_pd(crow + j, cj);
            }
            const double s = arow[i];
            for (; j < n; ++j) crow[j] += s * brow[j];
        }
    }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
    const __m256d av = _mm256_set1_pd(alpha);
    const std::size_t n4 = n & ~std::size_t(3);
    std::size_t i = 0;
    for (; i < n4; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
        _mm256_storeu_pd(y + i, yv);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

double dot(std::size_t n, const double* x, const double* y) {
    __m256d accv = _mm256_setzero_pd();
    const std::size_t n4 = n & ~std::size_t(3);
    std::size_t i = 0;
    for (; i < n4; i += 4)
        accv = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), accv);
    double s = hsum(accv);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

double sum(std::size_t n, const double* x) {
    __m256d accv = _mm256_setzero_pd();
    const std::size_t n4 = n & ~std::size_t(3);
    std::size_t i = 0;
    for (; i < n4; i += 4) accv = _mm256_add_pd(accv, _mm256_loadu_pd(x + i));
    double s = hsum(accv);
    for (; i < n; ++i) s += x[i];
    return s;
}

void vmul(std::size_t n, const double* x, const double* y, double* z) {
    const std::size_t n4 = n & ~std::size_t(3);
    std::size_t i = 0;
    for (; i < n4; i += 4)
        _mm256_storeu_pd(z + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) z[i] = x[i] * y[i];
}

void vadd(std::size_t n, const double* x, const double* y, double* z) {
    const std::size_t n4 = n & ~std::size_t(3);
    std::size_t i = 0;
    for (; i < n4; i += 4)
        _mm256_storeu_pd(z + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) z[i] = x[i] + y[i];
}

void vscale(std::size_t n, double alpha, const double* x, double* z) {
    const __m256d av = _mm256_set1_pd(alpha);
    const std::size_t n4 = n & ~std::size_t(3);
    std::size_t i = 0;
    for (; i < n4; i += 4)
        _mm256_storeu_pd(z + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) z[i] = alpha * x[i];
}

void vmuladd(std::size_t n, const double* x, const double* y, const double* w, double* z) {
    const std::size_t n4 = n & ~std::size_t(3);
    std::size_t i = 0;
    for (; i < n4; i += 4) {
        __m256d zv = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                                     _mm256_loadu_pd(w + i));
        _mm256_storeu_pd(z + i, zv);
    }
    for (; i < n; ++i) z[i] = x[i] * y[i] + w[i];
}

}  // namespace ckr::kern::avx2
