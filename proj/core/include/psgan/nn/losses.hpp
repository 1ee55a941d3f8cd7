#pragma once

#include <cmath>

#include "psgan/errors.hpp"
#include "psgan/tensor.hpp"

namespace psgan {

enum class GanLossKind { least_squares, log_likelihood };

/// Weights of the combined generator objective. lambda_l1 scales the
/// reconstruction term; the per-discriminator kinds select least-squares or
/// negative-log-likelihood adversarial objectives (the config switches
/// behind the loss-ablation variants).
struct LossWeights {
    double lambda_l1 = 100.0;
    GanLossKind db_kind = GanLossKind::least_squares;
    GanLossKind dp_kind = GanLossKind::log_likelihood;

    void validate() const {
        if (!(lambda_l1 >= 0)) throw ConfigError("lambda_l1 must be >= 0");
    }
};

namespace loss {

inline constexpr double kProbClamp = 1e-7;

// All reductions are means so values are independent of map/patch size.

/// Least-squares discriminator loss: mean((real-1)^2) + mean(fake^2).
template <typename T>
T lsgan_d_loss(const Tensor<T>& real, const Tensor<T>& fake) {
    if (!real.same_shape(fake))
        throw ShapeError("lsgan_d_loss: shape mismatch " + real.shape_string() +
                         " vs " + fake.shape_string());
    T sr = 0, sf = 0;
    for (std::size_t i = 0; i < real.numel(); ++i) {
        const T dr = real[i] - T(1);
        sr += dr * dr;
        sf += fake[i] * fake[i];
    }
    return sr / T(real.numel()) + sf / T(fake.numel());
}

template <typename T>
void lsgan_d_loss_grad(const Tensor<T>& real, const Tensor<T>& fake,
                       Tensor<T>& dreal, Tensor<T>& dfake) {
    dreal = Tensor<T>(real.shape());
    dfake = Tensor<T>(fake.shape());
    const T nr = T(real.numel()), nf = T(fake.numel());
    for (std::size_t i = 0; i < real.numel(); ++i) {
        dreal[i] = T(2) * (real[i] - T(1)) / nr;
        dfake[i] = T(2) * fake[i] / nf;
    }
}

/// Least-squares generator loss: mean((fake-1)^2), the non-saturating form.
template <typename T>
T lsgan_g_loss(const Tensor<T>& fake) {
    T s = 0;
    for (std::size_t i = 0; i < fake.numel(); ++i) {
        const T d = fake[i] - T(1);
        s += d * d;
    }
    return s / T(fake.numel());
}

template <typename T>
void lsgan_g_loss_grad(const Tensor<T>& fake, Tensor<T>& dfake) {
    dfake = Tensor<T>(fake.shape());
    for (std::size_t i = 0; i < fake.numel(); ++i)
        dfake[i] = T(2) * (fake[i] - T(1)) / T(fake.numel());
}

template <typename T>
void require_probability(const Tensor<T>& p, const char* what) {
    for (std::size_t i = 0; i < p.numel(); ++i)
        if (!(p[i] >= T(0) && p[i] <= T(1)))
            throw DomainError(std::string(what) + ": probability outside [0,1]");
}

/// Negative log likelihood for the pedestrian discriminator:
/// mean(-log real_p) + mean(-log(1 - fake_p)). Probabilities are clamped
/// 1e-7 away from the boundaries.
template <typename T>
T nll_dp_loss(const Tensor<T>& real_p, const Tensor<T>& fake_p) {
    require_probability(real_p, "nll_dp_loss real");
    require_probability(fake_p, "nll_dp_loss fake");
    const T lo = T(kProbClamp), hi = T(1) - T(kProbClamp);
    T sr = 0, sf = 0;
    for (std::size_t i = 0; i < real_p.numel(); ++i)
        sr -= std::log(std::min(std::max(real_p[i], lo), hi));
    for (std::size_t i = 0; i < fake_p.numel(); ++i)
        sf -= std::log(T(1) - std::min(std::max(fake_p[i], lo), hi));
    return sr / T(real_p.numel()) + sf / T(fake_p.numel());
}

template <typename T>
void nll_dp_loss_grad(const Tensor<T>& real_p, const Tensor<T>& fake_p,
                      Tensor<T>& dreal, Tensor<T>& dfake) {
    dreal = Tensor<T>(real_p.shape());
    dfake = Tensor<T>(fake_p.shape());
    const T lo = T(kProbClamp), hi = T(1) - T(kProbClamp);
    for (std::size_t i = 0; i < real_p.numel(); ++i)
        dreal[i] = (real_p[i] > lo && real_p[i] < hi)
                       ? -T(1) / (real_p[i] * T(real_p.numel()))
                       : T(0);
    for (std::size_t i = 0; i < fake_p.numel(); ++i)
        dfake[i] = (fake_p[i] > lo && fake_p[i] < hi)
                       ? T(1) / ((T(1) - fake_p[i]) * T(fake_p.numel()))
                       : T(0);
}

/// Generator side of the log-likelihood objective: mean(-log fake_p).
template <typename T>
T nll_g_dp_loss(const Tensor<T>& fake_p) {
    require_probability(fake_p, "nll_g_dp_loss");
    const T lo = T(kProbClamp), hi = T(1) - T(kProbClamp);
    T s = 0;
    for (std::size_t i = 0; i < fake_p.numel(); ++i)
        s -= std::log(std::min(std::max(fake_p[i], lo), hi));
    return s / T(fake_p.numel());
}

template <typename T>
void nll_g_dp_loss_grad(const Tensor<T>& fake_p, Tensor<T>& dfake) {
    dfake = Tensor<T>(fake_p.shape());
    const T lo = T(kProbClamp), hi = T(1) - T(kProbClamp);
    for (std::size_t i = 0; i < fake_p.numel(); ++i)
        dfake[i] = (fake_p[i] > lo && fake_p[i] < hi)
                       ? -T(1) / (fake_p[i] * T(fake_p.numel()))
                       : T(0);
}

/// Mean absolute difference over all elements.
template <typename T>
T l1_loss(const Tensor<T>& generated, const Tensor<T>& truth) {
    if (!generated.same_shape(truth))
        throw ShapeError("l1_loss: shape mismatch");
    T s = 0;
    for (std::size_t i = 0; i < generated.numel(); ++i)
        s += std::abs(generated[i] - truth[i]);
    return s / T(generated.numel());
}

template <typename T>
void l1_loss_grad(const Tensor<T>& generated, const Tensor<T>& truth,
                  Tensor<T>& dgen) {
    dgen = Tensor<T>(generated.shape());
    const T n = T(generated.numel());
    for (std::size_t i = 0; i < generated.numel(); ++i) {
        const T d = generated[i] - truth[i];
        dgen[i] = d > T(0) ? T(1) / n : (d < T(0) ? -T(1) / n : T(0));
    }
}

/// Combined generator objective: adv_db + adv_dp + lambda * l1.
template <typename T>
T total_g_loss(T adv_db, T adv_dp, T l1, const LossWeights& w) {
    return adv_db + adv_dp + T(w.lambda_l1) * l1;
}

// Single-sided pieces of the objectives above. The trainer backpropagates
// the real and fake passes separately (a second forward would clobber the
// layer caches of the first), so it consumes these; the combined forms
// above are their exact sums.

/// mean((x - target)^2) against a constant target.
template <typename T>
T mse_vs(const Tensor<T>& x, T target) {
    T s = 0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const T d = x[i] - target;
        s += d * d;
    }
    return s / T(x.numel());
}

template <typename T>
void mse_vs_grad(const Tensor<T>& x, T target, T scale, Tensor<T>& dx) {
    dx = Tensor<T>(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i)
        dx[i] = scale * T(2) * (x[i] - target) / T(x.numel());
}

/// mean(-log p): the "classify as real" side.
template <typename T>
T nll_accept(const Tensor<T>& p) {
    return nll_g_dp_loss(p);
}

template <typename T>
void nll_accept_grad(const Tensor<T>& p, T scale, Tensor<T>& dp) {
    nll_g_dp_loss_grad(p, dp);
    for (std::size_t i = 0; i < dp.numel(); ++i) dp[i] *= scale;
}

/// mean(-log(1-p)): the "classify as fake" side.
template <typename T>
T nll_reject(const Tensor<T>& p) {
    require_probability(p, "nll_reject");
    const T lo = T(kProbClamp), hi = T(1) - T(kProbClamp);
    T s = 0;
    for (std::size_t i = 0; i < p.numel(); ++i)
        s -= std::log(T(1) - std::min(std::max(p[i], lo), hi));
    return s / T(p.numel());
}

template <typename T>
void nll_reject_grad(const Tensor<T>& p, T scale, Tensor<T>& dp) {
    dp = Tensor<T>(p.shape());
    const T lo = T(kProbClamp), hi = T(1) - T(kProbClamp);
    for (std::size_t i = 0; i < p.numel(); ++i)
        dp[i] = (p[i] > lo && p[i] < hi)
                    ? scale / ((T(1) - p[i]) * T(p.numel()))
                    : T(0);
}

}  // namespace loss
}  // namespace psgan
