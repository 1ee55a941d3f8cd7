#pragma once

#include <functional>
#include <vector>

#include "psgan/nn/layers.hpp"
#include "psgan/rng.hpp"
#include "psgan/tensor.hpp"

namespace testutil {

template <typename T>
psgan::Tensor<T> random_tensor(std::vector<int> shape, psgan::Rng& rng, double lo = -1.0,
                               double hi = 1.0) {
    psgan::Tensor<T> t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i)
        t[i] = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

/// Central finite difference of `loss` w.r.t. one scalar location.
inline double central_diff(double* slot, const std::function<double()>& loss,
                           double h = 1e-6) {
    const double saved = *slot;
    *slot = saved + h;
    const double up = loss();
    *slot = saved - h;
    const double down = loss();
    *slot = saved;
    return (up - down) / (2.0 * h);
}

/// Relative error with a floor that keeps exact-zero pairs comparable.
inline double rel_err(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

/// Checks analytic gradients of `loss` against central differences on up to
/// `max_per_tensor` entries of each parameter. `loss` must recompute the
/// full forward pass; gradients must already be accumulated for the same
/// point. Returns the worst relative error.
inline double check_param_grads(const std::vector<psgan::nn::ParamRef<double>>& params,
                                const std::function<double()>& loss,
                                psgan::Rng& rng, int max_per_tensor,
                                int* checked_total = nullptr) {
    double worst = 0;
    int total = 0;
    for (const auto& p : params) {
        const int n = static_cast<int>(p.value->numel());
        for (int k = 0; k < std::min(n, max_per_tensor); ++k) {
            const int idx = max_per_tensor >= n ? k : rng.uniform_int(0, n - 1);
            const double analytic = (*p.grad)[idx];
            const double numeric = central_diff(&(*p.value)[idx], loss);
            worst = std::max(worst, rel_err(analytic, numeric));
            ++total;
        }
    }
    if (checked_total) *checked_total = total;
    return worst;
}

}  // namespace testutil
