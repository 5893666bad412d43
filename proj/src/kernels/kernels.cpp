#include "modiff/kernels.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

#include "kernel_table.hpp"

// Scalar reference kernels plus the runtime backend switch. This file is
// compiled with -ffp-contract=off so the only fused operations are the
// explicit std::fma calls below; that is what makes the AVX2 variants
// (which use vfmadd the same way) bit-exact against these loops.

namespace modiff::kernels {
namespace detail {
namespace {

template <typename T>
void axpby_scalar(T a, const T* x, T b, const T* y, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::fma(a, x[i], b * y[i]);
}

template <typename T>
T dot_scalar(const T* a, const T* b, std::size_t n) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc = std::fma(a[i], b[i], acc);
    return acc;
}

template <typename T>
double ssd_scalar(const T* a, const T* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = double(a[i]) - double(b[i]);
        acc = std::fma(d, d, acc);
    }
    return acc;
}

// All three matmuls walk the output row-by-row and accumulate along k in
// the same order the AVX2 variants use, one fma per (k, column) pair.
template <typename T>
void matmul_scalar(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
                   bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        if (!accumulate)
            for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
        for (std::size_t p = 0; p < k; ++p) {
            T aip = a[i * k + p];
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] = std::fma(aip, brow[j], crow[j]);
        }
    }
}

template <typename T>
void matmul_transa_scalar(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
                          std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        if (!accumulate)
            for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
        for (std::size_t p = 0; p < k; ++p) {
            T aip = a[p * m + i];
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] = std::fma(aip, brow[j], crow[j]);
        }
    }
}

template <typename T>
void matmul_transb_scalar(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
                          std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            T acc = dot_scalar(arow, b + j * k, k);
            c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
        }
    }
}

template <typename T>
void adam_scalar(T* w, T* m, T* v, const T* g, std::size_t n, T lr, T beta1, T beta2, T eps,
                 T s1, T s2) {
    T c1 = T(1) - beta1;
    T c2 = T(1) - beta2;
    for (std::size_t i = 0; i < n; ++i) {
        T gi = g[i];
        m[i] = std::fma(beta1, m[i], c1 * gi);
        v[i] = std::fma(beta2, v[i], c2 * (gi * gi));
        T mhat = m[i] * s1;
        T denom = std::sqrt(v[i] * s2) + eps;
        w[i] = w[i] - lr * (mhat / denom);
    }
}

template <typename T>
KernelTable<T> make_scalar_table() {
    KernelTable<T> t;
    t.axpby = &axpby_scalar<T>;
    t.dot = &dot_scalar<T>;
    t.sum_squared_diff = &ssd_scalar<T>;
    t.matmul = &matmul_scalar<T>;
    t.matmul_transa = &matmul_transa_scalar<T>;
    t.matmul_transb = &matmul_transb_scalar<T>;
    t.adam_update = &adam_scalar<T>;
    return t;
}

}  // namespace

const KernelTable<double>& scalar_table_f64() {
    static const KernelTable<double> t = make_scalar_table<double>();
    return t;
}

const KernelTable<float>& scalar_table_f32() {
    static const KernelTable<float> t = make_scalar_table<float>();
    return t;
}

namespace {

bool avx2_supported() {
#if MODIFF_BUILD_AVX2
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

struct Dispatch {
    std::atomic<const KernelTable<double>*> f64;
    std::atomic<const KernelTable<float>*> f32;
    std::atomic<Backend> backend;

    Dispatch() {
#if MODIFF_BUILD_AVX2
        if (avx2_supported()) {
            f64 = &avx2_table_f64();
            f32 = &avx2_table_f32();
            backend = Backend::Avx2;
            return;
        }
#endif
        f64 = &scalar_table_f64();
        f32 = &scalar_table_f32();
        backend = Backend::Scalar;
    }
};

Dispatch& dispatch() {
    static Dispatch d;
    return d;
}

const KernelTable<double>& tab(double) { return *dispatch().f64.load(std::memory_order_relaxed); }
const KernelTable<float>& tab(float) { return *dispatch().f32.load(std::memory_order_relaxed); }

}  // namespace
}  // namespace detail

bool backend_available(Backend b) {
    switch (b) {
        case Backend::Scalar: return true;
        case Backend::Avx2: return detail::avx2_supported();
    }
    return false;
}

Backend active_backend() { return detail::dispatch().backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) {
    if (!backend_available(b))
        throw std::invalid_argument(std::string("kernel backend not available: ") +
                                    backend_name(b));
    auto& d = detail::dispatch();
    if (b == Backend::Scalar) {
        d.f64 = &detail::scalar_table_f64();
        d.f32 = &detail::scalar_table_f32();
    }
#if MODIFF_BUILD_AVX2
    else {
        d.f64 = &detail::avx2_table_f64();
        d.f32 = &detail::avx2_table_f32();
    }
#endif
    d.backend = b;
}

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
    }
    return "unknown";
}

void axpby(double a, const double* x, double b, const double* y, double* out, std::size_t n) {
    detail::tab(0.0).axpby(a, x, b, y, out, n);
}
void axpby(float a, const float* x, float b, const float* y, float* out, std::size_t n) {
    detail::tab(0.0f).axpby(a, x, b, y, out, n);
}

double dot(const double* a, const double* b, std::size_t n) { return detail::tab(0.0).dot(a, b, n); }
float dot(const float* a, const float* b, std::size_t n) { return detail::tab(0.0f).dot(a, b, n); }

double sum_squared_diff(const double* a, const double* b, std::size_t n) {
    return detail::tab(0.0).sum_squared_diff(a, b, n);
}
double sum_squared_diff(const float* a, const float* b, std::size_t n) {
    return detail::tab(0.0f).sum_squared_diff(a, b, n);
}

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n, bool accumulate) {
    detail::tab(0.0).matmul(a, b, c, m, k, n, accumulate);
}
void matmul(const float* a, const float* b, float* c, std::size_t m, std::size_t k, std::size_t n,
            bool accumulate) {
    detail::tab(0.0f).matmul(a, b, c, m, k, n, accumulate);
}

void matmul_transa(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n, bool accumulate) {
    detail::tab(0.0).matmul_transa(a, b, c, m, k, n, accumulate);
}
void matmul_transa(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
                   std::size_t n, bool accumulate) {
    detail::tab(0.0f).matmul_transa(a, b, c, m, k, n, accumulate);
}

void matmul_transb(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n, bool accumulate) {
    detail::tab(0.0).matmul_transb(a, b, c, m, k, n, accumulate);
}
void matmul_transb(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
                   std::size_t n, bool accumulate) {
    detail::tab(0.0f).matmul_transb(a, b, c, m, k, n, accumulate);
}

void adam_update(double* w, double* m, double* v, const double* g, std::size_t n, double lr,
                 double beta1, double beta2, double eps, double s1, double s2) {
    detail::tab(0.0).adam_update(w, m, v, g, n, lr, beta1, beta2, eps, s1, s2);
}
void adam_update(float* w, float* m, float* v, const float* g, std::size_t n, float lr,
                 float beta1, float beta2, float eps, float s1, float s2) {
    detail::tab(0.0f).adam_update(w, m, v, g, n, lr, beta1, beta2, eps, s1, s2);
}

namespace {

// 1/sqrt(2) and 1/sqrt(2*pi)
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

template <typename T>
void gelu_impl(const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double xi = double(x[i]);
        y[i] = T(0.5 * xi * (1.0 + std::erf(xi * kInvSqrt2)));
    }
}

template <typename T>
void gelu_backward_impl(const T* x, const T* dy, T* dx, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < n; ++i) {
        double xi = double(x[i]);
        double cdf = 0.5 * (1.0 + std::erf(xi * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * xi * xi);
        double grad = double(dy[i]) * (cdf + xi * pdf);
        dx[i] = accumulate ? T(double(dx[i]) + grad) : T(grad);
    }
}

}  // namespace

void gelu(const double* x, double* y, std::size_t n) { gelu_impl(x, y, n); }
void gelu(const float* x, float* y, std::size_t n) { gelu_impl(x, y, n); }

void gelu_backward(const double* x, const double* dy, double* dx, std::size_t n, bool accumulate) {
    gelu_backward_impl(x, dy, dx, n, accumulate);
}
void gelu_backward(const float* x, const float* dy, float* dx, std::size_t n, bool accumulate) {
    gelu_backward_impl(x, dy, dx, n, accumulate);
}

}  // namespace modiff::kernels
