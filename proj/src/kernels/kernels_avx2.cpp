#if MODIFF_BUILD_AVX2

#include <immintrin.h>

#include <cmath>
#include <cstddef>

#include "kernel_table.hpp"

// AVX2+FMA kernel variants. Elementwise loops and the row-major matmuls
// vectorize across the output index, so each output element sees the same
// sequence of fused multiply-adds as the scalar reference and the results
// match bit for bit (tails fall back to the identical scalar expression).
// dot, sum_squared_diff and matmul_transb reduce across lanes and only
// agree with the reference to rounding.

namespace modiff::kernels::detail {
namespace {

double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    __m128 s = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(s);
    s = _mm_add_ps(s, shuf);
    return _mm_cvtss_f32(_mm_add_ss(s, _mm_movehl_ps(shuf, s)));
}

void axpby_avx2(double a, const double* x, double b, const double* y, double* out,
                std::size_t n) {
    __m256d va = _mm256_set1_pd(a);
    __m256d vb = _mm256_set1_pd(b);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d r = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                    _mm256_mul_pd(vb, _mm256_loadu_pd(y + i)));
        _mm256_storeu_pd(out + i, r);
    }
    for (; i < n; ++i) out[i] = std::fma(a, x[i], b * y[i]);
}

void axpby_avx2(float a, const float* x, float b, const float* y, float* out, std::size_t n) {
    __m256 va = _mm256_set1_ps(a);
    __m256 vb = _mm256_set1_ps(b);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 r = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i),
                                   _mm256_mul_ps(vb, _mm256_loadu_ps(y + i)));
        _mm256_storeu_ps(out + i, r);
    }
    for (; i < n; ++i) out[i] = std::fma(a, x[i], b * y[i]);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double s = hsum(acc);
    for (; i < n; ++i) s = std::fma(a[i], b[i], s);
    return s;
}

float dot_avx2(const float* a, const float* b, std::size_t n) {
    __m256 acc = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
    float s = hsum(acc);
    for (; i < n; ++i) s = std::fma(a[i], b[i], s);
    return s;
}

double ssd_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        double d = a[i] - b[i];
        s = std::fma(d, d, s);
    }
    return s;
}

double ssd_avx2(const float* a, const float* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 fa = _mm256_loadu_ps(a + i);
        __m256 fb = _mm256_loadu_ps(b + i);
        __m256d dlo = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(fa)),
                                    _mm256_cvtps_pd(_mm256_castps256_ps128(fb)));
        __m256d dhi = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(fa, 1)),
                                    _mm256_cvtps_pd(_mm256_extractf128_ps(fb, 1)));
        acc = _mm256_fmadd_pd(dlo, dlo, acc);
        acc = _mm256_fmadd_pd(dhi, dhi, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        double d = double(a[i]) - double(b[i]);
        s = std::fma(d, d, s);
    }
    return s;
}

// Shared row update for matmul / matmul_transa: crow += aip * brow.
void row_fmadd(double aip, const double* brow, double* crow, std::size_t n) {
    __m256d va = _mm256_set1_pd(aip);
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        __m256d r = _mm256_fmadd_pd(va, _mm256_loadu_pd(brow + j), _mm256_loadu_pd(crow + j));
        _mm256_storeu_pd(crow + j, r);
    }
    for (; j < n; ++j) crow[j] = std::fma(aip, brow[j], crow[j]);
}

void row_fmadd(float aip, const float* brow, float* crow, std::size_t n) {
    __m256 va = _mm256_set1_ps(aip);
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
        __m256 r = _mm256_fmadd_ps(va, _mm256_loadu_ps(brow + j), _mm256_loadu_ps(crow + j));
        _mm256_storeu_ps(crow + j, r);
    }
    for (; j < n; ++j) crow[j] = std::fma(aip, brow[j], crow[j]);
}

template <typename T>
void matmul_avx2(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
                 bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        if (!accumulate)
            for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
        for (std::size_t p = 0; p < k; ++p) row_fmadd(a[i * k + p], b + p * n, crow, n);
    }
}

template <typename T>
void matmul_transa_avx2(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
                        bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        if (!accumulate)
            for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
        for (std::size_t p = 0; p < k; ++p) row_fmadd(a[p * m + i], b + p * n, crow, n);
    }
}

template <typename T>
void matmul_transb_avx2(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
                        bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            T acc = dot_avx2(arow, b + j * k, k);
            c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
        }
    }
}

void adam_avx2(double* w, double* m, double* v, const double* g, std::size_t n, double lr,
               double beta1, double beta2, double eps, double s1, double s2) {
    double c1 = 1.0 - beta1;
    double c2 = 1.0 - beta2;
    __m256d vb1 = _mm256_set1_pd(beta1), vb2 = _mm256_set1_pd(beta2);
    __m256d vc1 = _mm256_set1_pd(c1), vc2 = _mm256_set1_pd(c2);
    __m256d vlr = _mm256_set1_pd(lr), veps = _mm256_set1_pd(eps);
    __m256d vs1 = _mm256_set1_pd(s1), vs2 = _mm256_set1_pd(s2);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d gi = _mm256_loadu_pd(g + i);
        __m256d mi = _mm256_fmadd_pd(vb1, _mm256_loadu_pd(m + i), _mm256_mul_pd(vc1, gi));
        __m256d vi = _mm256_fmadd_pd(vb2, _mm256_loadu_pd(v + i),
                                     _mm256_mul_pd(vc2, _mm256_mul_pd(gi, gi)));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        __m256d mhat = _mm256_mul_pd(mi, vs1);
        __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vi, vs2)), veps);
        __m256d upd = _mm256_mul_pd(vlr, _mm256_div_pd(mhat, denom));
        _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), upd));
    }
    for (; i < n; ++i) {
        double gi = g[i];
        m[i] = std::fma(beta1, m[i], c1 * gi);
        v[i] = std::fma(beta2, v[i], c2 * (gi * gi));
        double mhat = m[i] * s1;
        double denom = std::sqrt(v[i] * s2) + eps;
        w[i] = w[i] - lr * (mhat / denom);
    }
}

void adam_avx2(float* w, float* m, float* v, const float* g, std::size_t n, float lr, float beta1,
               float beta2, float eps, float s1, float s2) {
    float c1 = 1.0f - beta1;
    float c2 = 1.0f - beta2;
    __m256 vb1 = _mm256_set1_ps(beta1), vb2 = _mm256_set1_ps(beta2);
    __m256 vc1 = _mm256_set1_ps(c1), vc2 = _mm256_set1_ps(c2);
    __m256 vlr = _mm256_set1_ps(lr), veps = _mm256_set1_ps(eps);
    __m256 vs1 = _mm256_set1_ps(s1), vs2 = _mm256_set1_ps(s2);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 gi = _mm256_loadu_ps(g + i);
        __m256 mi = _mm256_fmadd_ps(vb1, _mm256_loadu_ps(m + i), _mm256_mul_ps(vc1, gi));
        __m256 vi = _mm256_fmadd_ps(vb2, _mm256_loadu_ps(v + i),
                                    _mm256_mul_ps(vc2, _mm256_mul_ps(gi, gi)));
        _mm256_storeu_ps(m + i, mi);
        _mm256_storeu_ps(v + i, vi);
        __m256 mhat = _mm256_mul_ps(mi, vs1);
        __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(_mm256_mul_ps(vi, vs2)), veps);
        __m256 upd = _mm256_mul_ps(vlr, _mm256_div_ps(mhat, denom));
        _mm256_storeu_ps(w + i, _mm256_sub_ps(_mm256_loadu_ps(w + i), upd));
    }
    for (; i < n; ++i) {
        float gi = g[i];
        m[i] = std::fma(beta1, m[i], c1 * gi);
        v[i] = std::fma(beta2, v[i], c2 * (gi * gi));
        float mhat = m[i] * s1;
        float denom = std::sqrt(v[i] * s2) + eps;
        w[i] = w[i] - lr * (mhat / denom);
    }
}

template <typename T>
KernelTable<T> make_avx2_table() {
    KernelTable<T> t;
    t.axpby = [](T a, const T* x, T b, const T* y, T* out, std::size_t n) {
        axpby_avx2(a, x, b, y, out, n);
    };
    t.dot = [](const T* a, const T* b, std::size_t n) { return dot_avx2(a, b, n); };
    t.sum_squared_diff = [](const T* a, const T* b, std::size_t n) { return ssd_avx2(a, b, n); };
    t.matmul = &matmul_avx2<T>;
    t.matmul_transa = &matmul_transa_avx2<T>;
    t.matmul_transb = &matmul_transb_avx2<T>;
    t.adam_update = [](T* w, T* m, T* v, const T* g, std::size_t n, T lr, T beta1, T beta2, T eps,
                       T s1, T s2) { adam_avx2(w, m, v, g, n, lr, beta1, beta2, eps, s1, s2); };
    return t;
}

}  // namespace

const KernelTable<double>& avx2_table_f64() {
    static const KernelTable<double> t = make_avx2_table<double>();
    return t;
}

const KernelTable<float>& avx2_table_f32() {
    static const KernelTable<float> t = make_avx2_table<float>();
    return t;
}

}  // namespace modiff::kernels::detail

#endif  // MODIFF_BUILD_AVX2
