#pragma once

#include <cmath>
#include <vector>

#include "cria/rng.hpp"
#include "cria/tensor.hpp"

namespace cria::testing {

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

inline double rel_err(double a, double b) {
    return std::fabs(a - b) / (std::fabs(a) + std::fabs(b) + 1e-12);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

inline double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, rel_err(a[i], b[i]));
    return m;
}

}  // namespace cria::testing
