#pragma once

#include <string>
#include <vector>

#include "psgan/errors.hpp"
#include "psgan/nn/layers.hpp"
#include "psgan/nn/spp.hpp"
#include "psgan/rng.hpp"
#include "psgan/tensor.hpp"

namespace psgan {

/// Pedestrian-realism discriminator config: a conv stack followed by
/// spatial pyramid pooling, so crops of any size map to one probability.
/// With SPP disabled the pyramid degrades to a single global max bin,
/// which keeps variable-size input support with no pyramid structure.
struct DpConfig {
    std::vector<int> layer_channels{64, 128, 256, 512, 512};
    SppLevels spp;
    bool spp_enabled = true;
    int min_input = 16;  // five stride-2 layers need >= 1 output cell

    int pooled_bins() const { return spp_enabled ? spp.bins() : 1; }
    int head_inputs() const { return layer_channels.back() * pooled_bins(); }
};

namespace nn {

/// Judges a cropped pedestrian (3,h,w), any h,w above the minimum, as a
/// probability of being real. Five stride-2 conv layers by default, batch
/// norm from the second layer, SPP, then a single sigmoid unit.
template <typename T>
struct PedestrianDiscriminator {
    DpConfig cfg;
    std::vector<Conv2d<T>> convs;
    std::vector<BatchNorm2d<T>> bns;
    std::vector<char> has_bn;
    std::vector<LeakyReLU<T>> acts;
    SppPool<T> pool;
    Linear<T> head;
    Sigmoid<T> squash;

    PedestrianDiscriminator() = default;

    explicit PedestrianDiscriminator(const DpConfig& c) : cfg(c) {
        const auto& ch = cfg.layer_channels;
        if (ch.empty()) throw ConfigError("pedestrian discriminator: no layers");
        bns.resize(ch.size());
        has_bn.assign(ch.size(), 0);
        acts.resize(ch.size());
        for (std::size_t i = 0; i < ch.size(); ++i) {
            const int c_in = i == 0 ? 3 : ch[i - 1];
            const bool bn = i > 0;
            convs.emplace_back(c_in, ch[i], 4, 2, 1, /*bias=*/!bn);
            if (bn) {
                bns[i] = BatchNorm2d<T>(ch[i]);
                has_bn[i] = 1;
            }
        }
        pool = SppPool<T>(cfg.spp_enabled ? cfg.spp : SppLevels{{1}});
        head = Linear<T>(cfg.head_inputs(), 1);
    }

    void init(Rng& rng) {
        for (auto& l : convs) l.init(rng);
        for (std::size_t i = 0; i < bns.size(); ++i)
            if (has_bn[i]) bns[i].init(rng);
        head.init(rng);
    }

    /// Probability in (0,1) that the crop is a real pedestrian. Shape {1}.
    Tensor<T> forward(const Tensor<T>& crop, bool training) {
        if (crop.ndim() != 3 || crop.dim(0) != 3)
            throw ShapeError("pedestrian discriminator: input " + crop.shape_string());
        if (crop.dim(1) < cfg.min_input || crop.dim(2) < cfg.min_input)
            throw CropTooSmall("pedestrian crop " + crop.shape_string() +
                               " below minimum side " + std::to_string(cfg.min_input));
        Tensor<T> a = crop;
        for (std::size_t i = 0; i < convs.size(); ++i) {
            a = convs[i].forward(a);
            if (has_bn[i]) a = bns[i].forward(a, training);
            a = acts[i].forward(a);
        }
        a = pool.forward(a);
        a = head.forward(a);
        return squash.forward(a);
    }

    Tensor<T> backward(const Tensor<T>& dprob, bool param_grads = true) {
        Tensor<T> g = squash.backward(dprob);
        g = head.backward(g, param_grads);
        g = pool.backward(g);
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
