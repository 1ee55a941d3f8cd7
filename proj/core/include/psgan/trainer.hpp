#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "psgan/nn/discriminator_background.hpp"
#include "psgan/nn/discriminator_pedestrian.hpp"
#include "psgan/nn/generator.hpp"
#include "psgan/nn/losses.hpp"
#include "psgan/rng.hpp"
#include "psgan/scene.hpp"

namespace psgan {

struct TrainConfig {
    int epochs = 200;
    int batch_size = 1;
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    std::uint64_t seed = 1;
    LossWeights weights;
    bool spp_enabled = true;
    int patch = 256;
    int gen_levels = 8;
    int base_channels = 64;
    // Explicit per-layer widths; empty means the standard ladders scaled
    // from base_channels.
    std::vector<int> db_channels;
    std::vector<int> dp_channels;
    int checkpoint_every = 0;  // epochs between checkpoints; 0 = final only

    GeneratorConfig generator_config() const;
    DbConfig db_config() const;
    DpConfig dp_config() const;
    void validate() const;
};

/// The six per-step loss components.
struct StepMetrics {
    double db_loss = 0;
    double dp_loss = 0;
    double g_adv_db = 0;
    double g_adv_dp = 0;
    double g_l1 = 0;
    double g_total = 0;
};

struct EpochMetrics {
    int epoch = 0;
    StepMetrics mean;
};

/// Adam with per-tensor moment buffers, aligned to a fixed parameter list.
template <typename T>
class Adam {
public:
    Adam() = default;
    Adam(double lr, double beta1, double beta2) : lr_(lr), b1_(beta1), b2_(beta2) {}

    void step(const std::vector<nn::ParamRef<T>>& params) {
        if (m_.empty()) {
            for (const auto& p : params) {
                m_.emplace_back(p.value->shape());
                v_.emplace_back(p.value->shape());
            }
        }
        ++t_;
        const T c1 = T(1) - static_cast<T>(std::pow(b1_, t_));
        const T c2 = T(1) - static_cast<T>(std::pow(b2_, t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor<T>& theta = *params[i].value;
            const Tensor<T>& g = *params[i].grad;
            for (std::size_t j = 0; j < theta.numel(); ++j) {
                m_[i][j] = T(b1_) * m_[i][j] + (T(1) - T(b1_)) * g[j];
                v_[i][j] = T(b2_) * v_[i][j] + (T(1) - T(b2_)) * g[j] * g[j];
                theta[j] -= T(lr_) * (m_[i][j] / c1) /
                            (std::sqrt(v_[i][j] / c2) + T(1e-8));
            }
        }
    }

    long long step_count() const { return t_; }
    void set_step_count(long long t) { t_ = t; }
    std::vector<Tensor<T>>& moments1() { return m_; }
    std::vector<Tensor<T>>& moments2() { return v_; }

    /// Pre-sizes the moment buffers (used when loading checkpoints).
    void shape_to(const std::vector<nn::ParamRef<T>>& params) {
        m_.clear();
        v_.clear();
        for (const auto& p : params) {
            m_.emplace_back(p.value->shape());
            v_.emplace_back(p.value->shape());
        }
    }

private:
    double lr_ = 2e-4, b1_ = 0.5, b2_ = 0.999;
    long long t_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

/// Everything the training loop mutates: the three networks, their
/// optimizer moments, counters and the RNG stream.
struct TrainState {
    TrainConfig cfg;
    nn::UNetGenerator<float> gen;
    nn::BackgroundDiscriminator<float> db;
    nn::PedestrianDiscriminator<float> dp;
    Adam<float> opt_gen, opt_db, opt_dp;
    long long epoch = 0;
    long long step = 0;
    Rng rng;
};

/// Builds the three networks with Gaussian(0, 0.02) weights drawn from the
/// config seed. Deterministic.
TrainState init_train_state(const TrainConfig& cfg);

/// One optimization step on one pair: D_b on the stacked-pair loss, D_p on
/// the crop loss, then G on the combined objective with freshly recomputed
/// discriminator scores. Throws NanDetected naming the offending component.
StepMetrics train_step(TrainState& state, const PatchPair& pair);

/// Batched variant; gradients are averaged over the span before each
/// parameter update.
StepMetrics train_step(TrainState& state, std::span<const PatchPair> batch);

/// Full training loop: epochs x pairs with per-epoch shuffling from the
/// state RNG. Writes one CSV row per step when metrics_path is non-empty
/// and checkpoints per cfg when checkpoint_path is non-empty.
std::vector<EpochMetrics> train(TrainState& state, const std::vector<PatchPair>& pairs,
                                const std::string& metrics_path = "",
                                const std::string& checkpoint_path = "",
                                const std::function<void(const EpochMetrics&)>& on_epoch = {});

/// Convenience: init + train.
std::vector<EpochMetrics> train(const TrainConfig& cfg, const std::vector<PatchPair>& pairs,
                                TrainState& out_state,
                                const std::string& metrics_path = "",
                                const std::string& checkpoint_path = "");

/// Checkpoint container: magic "PSGN1", a JSON header (version, counters,
/// rng, config, tensor directory) and raw little-endian float32 payload.
/// save -> load -> save is byte-identical.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace psgan
