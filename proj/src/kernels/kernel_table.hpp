#pragma once

#include <cstddef>

// Internal dispatch table shared by the scalar and AVX2 translation units.
// Not installed; include only from src/kernels.

namespace modiff::kernels::detail {

template <typename T>
struct KernelTable {
    void (*axpby)(T a, const T* x, T b, const T* y, T* out, std::size_t n);
    T (*dot)(const T* a, const T* b, std::size_t n);
    double (*sum_squared_diff)(const T* a, const T* b, std::size_t n);
    void (*matmul)(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
                   bool accumulate);
    void (*matmul_transa)(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
                          std::size_t n, bool accumulate);
    void (*matmul_transb)(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
                          std::size_t n, bool accumulate);
    void (*adam_update)(T* w, T* m, T* v, const T* g, std::size_t n, T lr, T beta1, T beta2,
                        T eps, T s1, T s2);
};

const KernelTable<double>& scalar_table_f64();
const KernelTable<float>& scalar_table_f32();

#if MODIFF_BUILD_AVX2
const KernelTable<double>& avx2_table_f64();
const KernelTable<float>& avx2_table_f32();
#endif

}  // namespace modiff::kernels::detail
