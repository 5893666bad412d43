#pragma once

#include <cstddef>
#include <string>

#include "modiff/matrix.hpp"

namespace modiff {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam update for one parameter tensor. t is the 1-based
// step count after which this update applies; moments m/v must match w's
// shape. Non-finite gradients are rejected, naming the offending tensor.
template <typename T>
void adam_step(Matrix<T>& w, Matrix<T>& m, Matrix<T>& v, const Matrix<T>& g, std::size_t t,
               double lr, const AdamConfig& cfg, const std::string& name);

extern template void adam_step<float>(Matrix<float>&, Matrix<float>&, Matrix<float>&,
                                      const Matrix<float>&, std::size_t, double,
                                      const AdamConfig&, const std::string&);
extern template void adam_step<double>(Matrix<double>&, Matrix<double>&, Matrix<double>&,
                                       const Matrix<double>&, std::size_t, double,
                                       const AdamConfig&, const std::string&);

}  // namespace modiff
