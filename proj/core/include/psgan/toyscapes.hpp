#pragma once

#include <functional>
#include <vector>

#include "psgan/nn/discriminator_pedestrian.hpp"
#include "psgan/nn/generator.hpp"
#include "psgan/rng.hpp"
#include "psgan/scene.hpp"

namespace psgan {

/// Procedural desk-scale street scene: textured sky/road bands split at a
/// horizon, a few lamp posts, and articulated stick-figure pedestrians
/// with randomized limb angles, heights and colors.
struct ToyConfig {
    int width = 160;
    int height = 96;
    int n_peds = 1;
    int ped_h_min = 32;
    int ped_h_max = 52;

    void validate() const;
};

/// Renders one scene. Returned boxes tightly bound the rendered pixels of
/// each figure (label real). Deterministic for a fixed generator state.
Scene gen_toy_scene(Rng& rng, const ToyConfig& cfg = {});

/// Generator quality on held-out pairs: mean L1 outside the noise box
/// (background fidelity), mean L1 inside it (reconstruction proxy), and
/// the fraction of generated crops a frozen pedestrian discriminator
/// scores above 0.5.
struct EvalMetrics {
    double outside_l1 = 0;
    double inside_l1 = 0;
    double dp_fool_rate = 0;
    int n_pairs = 0;
};

/// Callable form so a test harness can substitute a stub generator.
using GeneratorFn = std::function<Tensorf(const Tensorf&)>;

EvalMetrics eval_generator(const GeneratorFn& gen_forward,
                           const std::vector<PatchPair>& pairs,
                           nn::PedestrianDiscriminator<float>& dp);

EvalMetrics eval_generator(nn::UNetGenerator<float>& gen,
                           const std::vector<PatchPair>& pairs,
                           nn::PedestrianDiscriminator<float>& dp);

}  // namespace psgan
