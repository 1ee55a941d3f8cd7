#pragma once

#include <string>
#include <vector>

#include "psgan/errors.hpp"
#include "psgan/nn/layers.hpp"
#include "psgan/rng.hpp"
#include "psgan/tensor.hpp"

namespace psgan {

/// Background-context discriminator config. Scores a stacked
/// (noise image, candidate image) pair patch-wise: C64-C128-C256-C512
/// with strides 2,2,2,1 plus a stride-1 single-channel head gives each
/// output unit a 70x70 receptive field.
struct DbConfig {
    int in_channels = 6;
    std::vector<int> layer_channels{64, 128, 256, 512};

    int stride_at(std::size_t i) const {
        return i + 1 < layer_channels.size() ? 2 : 1;
    }
};

/// Receptive field of one output unit, by the r <- r + (k-1)*jump
/// recurrence over the conv stack.
inline int db_receptive_field(const DbConfig& cfg) {
    int r = 1, jump = 1;
    for (std::size_t i = 0; i < cfg.layer_channels.size(); ++i) {
        r += 3 * jump;
        jump *= cfg.stride_at(i);
    }
    r += 3 * jump;  // head conv, stride 1
    return r;
}

/// Spatial side of the score map for a square input of side p.
inline int db_score_map_side(const DbConfig& cfg, int p) {
    int s = p;
    for (std::size_t i = 0; i < cfg.layer_channels.size(); ++i)
        s = nn::detail::conv_out_dim(
            s, 4, cfg.stride_at(i),
            nn::detail::effective_pad(s, 4, cfg.stride_at(i), 1));
    return nn::detail::conv_out_dim(s, 4, 1, nn::detail::effective_pad(s, 4, 1, 1));
}

/// All-ones (real) or all-zeros (fake) target map for the patch scores.
template <typename T>
Tensor<T> patch_targets(int m_h, int m_w, bool real) {
    if (m_h < 1 || m_w < 1) throw ShapeError("patch_targets: empty map");
    return Tensor<T>::full({1, m_h, m_w}, real ? T(1) : T(0));
}

namespace nn {

/// PatchGAN-style discriminator over 6-channel stacked image pairs.
/// Emits a raw (un-squashed) score map; the least-squares loss consumes
/// unsquashed values.
template <typename T>
struct BackgroundDiscriminator {
    DbConfig cfg;
    std::vector<Conv2d<T>> convs;
    std::vector<BatchNorm2d<T>> bns;   // aligned; layer 0 has none
    std::vector<char> has_bn;
    std::vector<LeakyReLU<T>> acts;
    Conv2d<T> head;

    BackgroundDiscriminator() = default;

    explicit BackgroundDiscriminator(const DbConfig& c) : cfg(c) {
        const auto& ch = cfg.layer_channels;
        if (ch.empty()) throw ConfigError("background discriminator: no layers");
        bns.resize(ch.size());
        has_bn.assign(ch.size(), 0);
        acts.resize(ch.size());
        for (std::size_t i = 0; i < ch.size(); ++i) {
            const int c_in = i == 0 ? cfg.in_channels : ch[i - 1];
            const bool bn = i > 0;
            convs.emplace_back(c_in, ch[i], 4, cfg.stride_at(i), 1, /*bias=*/!bn);
            if (bn) {
                bns[i] = BatchNorm2d<T>(ch[i]);
                has_bn[i] = 1;
            }
        }
        head = Conv2d<T>(ch.back(), 1, 4, 1, 1, /*bias=*/true);
    }

    void init(Rng& rng) {
        for (auto& l : convs) l.init(rng);
        for (std::size_t i = 0; i < bns.size(); ++i)
            if (has_bn[i]) bns[i].init(rng);
        head.init(rng);
    }

    Tensor<T> forward(const Tensor<T>& pair, bool training) {
        if (pair.ndim() != 3 || pair.dim(0) != cfg.in_channels)
            throw ShapeError("background discriminator: input " + pair.shape_string() +
                             ", want " + std::to_string(cfg.in_channels) + " channels");
        Tensor<T> a = pair;
        for (std::size_t i = 0; i < convs.size(); ++i) {
            a = convs[i].forward(a);
            if (has_bn[i]) a = bns[i].forward(a, training);
            a = acts[i].forward(a);
        }
        return head.forward(a);
    }

    Tensor<T> backward(const Tensor<T>& dscore, bool param_grads = true) {
        Tensor<T> g = head.backward(dscore, param_grads);
        for (std::size_t i = convs.size(); i-- > 0;) {
            g = acts[i].backward(g);
            if (has_bn[i]) g = bns[i].backward(g, param_grads);
            g = convs[i].backward(g, param_grads);
        }
        return g;
    }

    void zero_grad() {
        for (auto& l : convs) l.zero_grad();
        for (std::size_t i = 0; i < bns.size(); ++i)
            if (has_bn[i]) bns[i].zero_grad();
        head.zero_grad();
    }

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        for (std::size_t i = 0; i < convs.size(); ++i) {
            const std::string p = "conv" + std::to_string(i + 1);
            convs[i].collect(p, out);
            if (has_bn[i]) bns[i].collect(p + ".bn", out);
        }
        head.collect("head", out);
        return out;
    }

    std::vector<StateRef<T>> buffers() {
        std::vector<StateRef<T>> out;
        for (std::size_t i = 0; i < bns.size(); ++i)
            if (has_bn[i])
                bns[i].collect_state("conv" + std::to_string(i + 1) + ".bn", out);
        return out;
    }
};

}  // namespace nn
}  // namespace psgan
