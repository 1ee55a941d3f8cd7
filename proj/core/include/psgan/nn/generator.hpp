#pragma once

#include <string>
#include <vector>

#include "psgan/errors.hpp"
#include "psgan/nn/layers.hpp"
#include "psgan/rng.hpp"
#include "psgan/tensor.hpp"

namespace psgan {

struct GeneratorConfig {
    int levels = 8;         // down/up pairs; patch side must equal 2^levels
    int base_channels = 64;
    int in_channels = 3;
    int out_channels = 3;

    int patch_side() const { return 1 << levels; }

    // Encoder widths double per level and saturate at 8x base, the standard
    // image-translation ladder (64,128,256,512,512,...).
    int channels_at(int level) const {  // level in [1, levels]
        int mult = 1 << (level - 1);
        if (mult > 8) mult = 8;
        return base_channels * mult;
    }

    void validate(int patch) const {
        if (levels < 2) throw ConfigError("generator: levels must be >= 2");
        if (patch != patch_side())
            throw ConfigError("generator: patch side " + std::to_string(patch) +
                              " != 2^levels = " + std::to_string(patch_side()));
    }
};

/// Number of trainable scalars the generator will allocate for a config.
long long generator_parameter_count(const GeneratorConfig& cfg);

namespace nn {

/// Encoder-decoder with mirror skip connections. Stage i of the encoder
/// halves the spatial size; decoder stage i consumes the concatenation of
/// the stage below and the mirror encoder activation. Output is tanh.
template <typename T>
struct UNetGenerator {
    GeneratorConfig cfg;

    std::vector<Conv2d<T>> enc;
    std::vector<BatchNorm2d<T>> enc_bn;      // aligned with enc; unused slots empty
    std::vector<char> enc_has_bn;
    std::vector<LeakyReLU<T>> enc_act;       // act before enc conv i >= 1
    std::vector<ConvTranspose2d<T>> dec;     // dec[s-1] produces level s-1 output
    std::vector<BatchNorm2d<T>> dec_bn;
    std::vector<char> dec_has_bn;
    std::vector<ReLU<T>> dec_act;
    Tanh<T> out_act;

    // Test hook: when >= 0, the skip connection from encoder stage
    // `zero_skip_stage` (1-based) feeds zeros instead of the activation.
    int zero_skip_stage = -1;

    UNetGenerator() = default;

    explicit UNetGenerator(const GeneratorConfig& c) : cfg(c) {
        const int L = cfg.levels;
        enc.reserve(L);
        enc_bn.resize(L);
        enc_has_bn.assign(L, 0);
        enc_act.resize(L);
        dec.reserve(L);
        dec_bn.resize(L);
        dec_has_bn.assign(L, 0);
        dec_act.resize(L);

        for (int i = 1; i <= L; ++i) {
            const int c_in = (i == 1) ? cfg.in_channels : cfg.channels_at(i - 1);
            const int c_out = cfg.channels_at(i);
            // No normalization on the first and innermost encoder stages;
            // bias only where no normalization follows.
            const bool bn = (i > 1 && i < L);
            enc.emplace_back(c_in, c_out, 4, 2, 1, /*bias=*/!bn);
            if (bn) {
                enc_bn[i - 1] = BatchNorm2d<T>(c_out);
                enc_has_bn[i - 1] = 1;
            }
        }
        for (int s = L; s >= 1; --s) {
            const int c_in = (s == L) ? cfg.channels_at(L) : 2 * cfg.channels_at(s);
            const int c_out = (s == 1) ? cfg.out_channels : cfg.channels_at(s - 1);
            const bool bn = (s > 1);
            dec.emplace_back(c_in, c_out, 4, 2, 1, /*bias=*/!bn);
            if (bn) {
                dec_bn[s - 1] = BatchNorm2d<T>(c_out);
                dec_has_bn[s - 1] = 1;
            }
        }
    }

    void init(Rng& rng) {
        for (auto& l : enc) l.init(rng);
        for (int i = 0; i < cfg.levels; ++i)
            if (enc_has_bn[i]) enc_bn[i].init(rng);
        for (auto& l : dec) l.init(rng);
        for (int i = 0; i < cfg.levels; ++i)
            if (dec_has_bn[i]) dec_bn[i].init(rng);
    }

    ConvTranspose2d<T>& dec_stage(int s) { return dec[cfg.levels - s]; }

    Tensor<T> forward(const Tensor<T>& x, bool training) {
        const int L = cfg.levels;
        if (x.ndim() != 3 || x.dim(0) != cfg.in_channels ||
            x.dim(1) != cfg.patch_side() || x.dim(2) != cfg.patch_side())
            throw ShapeError("generator: input " + x.shape_string() + ", want (" +
                             std::to_string(cfg.in_channels) + "," +
                             std::to_string(cfg.patch_side()) + "," +
                             std::to_string(cfg.patch_side()) + ")");
        e_.assign(L, Tensor<T>());
        e_[0] = enc[0].forward(x);
        for (int i = 2; i <= L; ++i) {
            Tensor<T> a = enc_act[i - 1].forward(e_[i - 2]);
            a = enc[i - 1].forward(a);
            if (enc_has_bn[i - 1]) a = enc_bn[i - 1].forward(a, training);
            e_[i - 1] = std::move(a);
        }

        Tensor<T> d = dec_act[L - 1].forward(e_[L - 1]);
        d = dec_stage(L).forward(d);
        if (dec_has_bn[L - 1]) d = dec_bn[L - 1].forward(d, training);
        for (int s = L - 1; s >= 1; --s) {
            Tensor<T> u = concat_channels(d, skip(s));
            u = dec_act[s - 1].forward(u);
            u = dec_stage(s).forward(u);
            if (dec_has_bn[s - 1]) u = dec_bn[s - 1].forward(u, training);
            d = std::move(u);
        }
        return out_act.forward(d);
    }

    /// Backpropagates dLoss/dOutput; accumulates parameter gradients and
    /// returns dLoss/dInput.
    Tensor<T> backward(const Tensor<T>& dy, bool param_grads = true) {
        const int L = cfg.levels;
        std::vector<Tensor<T>> eg(L);  // gradients w.r.t. encoder activations
        for (int i = 0; i < L; ++i) eg[i] = Tensor<T>(e_[i].shape());

        Tensor<T> g = out_act.backward(dy);
        for (int s = 1; s <= L - 1; ++s) {
            if (dec_has_bn[s - 1]) g = dec_bn[s - 1].backward(g, param_grads);
            g = dec_stage(s).backward(g, param_grads);
            g = dec_act[s - 1].backward(g);
            auto [gd, gskip] = split_channels(g, cfg.channels_at(s));
            if (zero_skip_stage != s)
                for (std::size_t i = 0; i < gskip.numel(); ++i)
                    eg[s - 1][i] += gskip[i];
            g = std::move(gd);
        }
        if (dec_has_bn[L - 1]) g = dec_bn[L - 1].backward(g, param_grads);
        g = dec_stage(L).backward(g, param_grads);
        g = dec_act[L - 1].backward(g);
        for (std::size_t i = 0; i < g.numel(); ++i) eg[L - 1][i] += g[i];

        g = std::move(eg[L - 1]);
        for (int i = L; i >= 2; --i) {
            if (enc_has_bn[i - 1]) g = enc_bn[i - 1].backward(g, param_grads);
            g = enc[i - 1].backward(g, param_grads);
            g = enc_act[i - 1].backward(g);
            for (std::size_t j = 0; j < g.numel(); ++j) g[j] += eg[i - 2][j];
        }
        return enc[0].backward(g, param_grads);
    }

    void zero_grad() {
        for (auto& l : enc) l.zero_grad();
        for (auto& l : dec) l.zero_grad();
        for (int i = 0; i < cfg.levels; ++i) {
            if (enc_has_bn[i]) enc_bn[i].zero_grad();
            if (dec_has_bn[i]) dec_bn[i].zero_grad();
        }
    }

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        for (int i = 0; i < cfg.levels; ++i) {
            const std::string p = "enc" + std::to_string(i + 1);
            enc[i].collect(p, out);
            if (enc_has_bn[i]) enc_bn[i].collect(p + ".bn", out);
        }
        for (int s = cfg.levels; s >= 1; --s) {
            const std::string p = "dec" + std::to_string(s);
            dec_stage(s).collect(p, out);
            if (dec_has_bn[s - 1]) dec_bn[s - 1].collect(p + ".bn", out);
        }
        return out;
    }

    std::vector<StateRef<T>> buffers() {
        std::vector<StateRef<T>> out;
        for (int i = 0; i < cfg.levels; ++i)
            if (enc_has_bn[i])
                enc_bn[i].collect_state("enc" + std::to_string(i + 1) + ".bn", out);
        for (int s = cfg.levels; s >= 1; --s)
            if (dec_has_bn[s - 1])
                dec_bn[s - 1].collect_state("dec" + std::to_string(s) + ".bn", out);
        return out;
    }

private:
    const Tensor<T>& skip(int s) {
        if (zero_skip_stage == s) {
            zero_buf_ = Tensor<T>(e_[s - 1].shape());
            return zero_buf_;
        }
        return e_[s - 1];
    }

    std::vector<Tensor<T>> e_;
    Tensor<T> zero_buf_;
};

}  // namespace nn

inline long long generator_parameter_count(const GeneratorConfig& cfg) {
    const int L = cfg.levels;
    long long n = 0;
    for (int i = 1; i <= L; ++i) {
        const long long c_in = (i == 1) ? cfg.in_channels : cfg.channels_at(i - 1);
        const long long c_out = cfg.channels_at(i);
        const bool bn = (i > 1 && i < L);
        n += c_in * c_out * 16 + (bn ? 2 * c_out : c_out);
    }
    for (int s = L; s >= 1; --s) {
        const long long c_in = (s == L) ? cfg.channels_at(L) : 2LL * cfg.channels_at(s);
        const long long c_out = (s == 1) ? cfg.out_channels : cfg.channels_at(s - 1);
        const bool bn = (s > 1);
        n += c_in * c_out * 16 + (bn ? 2 * c_out : c_out);
    }
    return n;
}

}  // namespace psgan
