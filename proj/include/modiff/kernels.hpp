#pragma once

#include <cstddef>

// Numeric inner-loop kernels. Every routine has a scalar reference
// implementation and, on x86-64 with AVX2+FMA, a vectorized variant chosen
// at runtime. Elementwise kernels and the plain/transA matmuls accumulate
// in the same order in both backends (FMA in both), so they are bit-exact
// across backends; dot, sum_squared_diff and matmul_transb reduce
// horizontally and agree only to rounding.
//
// gelu / gelu_backward are scalar in both backends (erf is not vectorized
// here); they still route through the dispatch table so backend selection
// stays in one place.

namespace modiff::kernels {

enum class Backend { Scalar = 0, Avx2 = 1 };

bool backend_available(Backend b);
Backend active_backend();
void set_backend(Backend b);  // throws std::invalid_argument if unavailable
const char* backend_name(Backend b);

// out[i] = a*x[i] + b*y[i]
void axpby(double a, const double* x, double b, const double* y, double* out, std::size_t n);
void axpby(float a, const float* x, float b, const float* y, float* out, std::size_t n);

double dot(const double* a, const double* b, std::size_t n);
float dot(const float* a, const float* b, std::size_t n);

// sum_i (a[i]-b[i])^2, accumulated in double for both precisions
double sum_squared_diff(const double* a, const double* b, std::size_t n);
double sum_squared_diff(const float* a, const float* b, std::size_t n);

// c[m,n] = a[m,k] * b[k,n]       (+= with accumulate)
void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n, bool accumulate = false);
void matmul(const float* a, const float* b, float* c, std::size_t m, std::size_t k, std::size_t n,
            bool accumulate = false);

// c[m,n] = a^T * b with a stored [k,m]
void matmul_transa(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n, bool accumulate = false);
void matmul_transa(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
                   std::size_t n, bool accumulate = false);

// c[m,n] = a * b^T with b stored [n,k]
void matmul_transb(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n, bool accumulate = false);
void matmul_transb(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
                   std::size_t n, bool accumulate = false);

// Fused Adam update. Caller supplies the inverse bias corrections
// s1 = 1/(1-beta1^t), s2 = 1/(1-beta2^t):
//   m = beta1*m + (1-beta1)*g
//   v = beta2*v + (1-beta2)*g^2
//   w -= lr * (m*s1) / (sqrt(v*s2) + eps)
void adam_update(double* w, double* m, double* v, const double* g, std::size_t n, double lr,
                 double beta1, double beta2, double eps, double s1, double s2);
void adam_update(float* w, float* m, float* v, const float* g, std::size_t n, float lr,
                 float beta1, float beta2, float eps, float s1, float s2);

// Exact (erf-based) GELU and its derivative; dx[i] (+)= dy[i] * gelu'(x[i])
void gelu(const double* x, double* y, std::size_t n);
void gelu(const float* x, float* y, std::size_t n);
void gelu_backward(const double* x, const double* dy, double* dx, std::size_t n,
                   bool accumulate = false);
void gelu_backward(const float* x, const float* dy, float* dx, std::size_t n,
                   bool accumulate = false);

}  // namespace modiff::kernels
