#include "modiff/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "modiff/kernels.hpp"

namespace modiff {

template <typename T>
void adam_step(Matrix<T>& w, Matrix<T>& m, Matrix<T>& v, const Matrix<T>& g, std::size_t t,
               double lr, const AdamConfig& cfg, const std::string& name) {
    if (!w.same_shape(g) || !w.same_shape(m) || !w.same_shape(v))
        throw std::invalid_argument("adam: shape mismatch for " + name);
    if (t == 0) throw std::invalid_argument("adam: step count must be >= 1 for " + name);
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!std::isfinite(double(g[i])))
            throw std::runtime_error("adam: non-finite gradient in " + name + " at element " +
                                     std::to_string(i));
    double s1 = 1.0 / (1.0 - std::pow(cfg.beta1, double(t)));
    double s2 = 1.0 / (1.0 - std::pow(cfg.beta2, double(t)));
    kernels::adam_update(w.data(), m.data(), v.data(), g.data(), w.size(), T(lr), T(cfg.beta1),
                         T(cfg.beta2), T(cfg.eps), T(s1), T(s2));
}

template void adam_step<float>(Matrix<float>&, Matrix<float>&, Matrix<float>&,
                               const Matrix<float>&, std::size_t, double, const AdamConfig&,
                               const std::string&);
template void adam_step<double>(Matrix<double>&, Matrix<double>&, Matrix<double>&,
                                const Matrix<double>&, std::size_t, double, const AdamConfig&,
                                const std::string&);

}  // namespace modiff
