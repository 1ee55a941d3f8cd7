#pragma once

// Whole-network gradient verification on tiny double-precision configs:
// analytic backward passes against central finite differences, run through
// the same loss paths the trainer uses. Layer counts are chosen so no batch
// norm ever sees a single-element map (that would squash its input to beta
// and zero every upstream gradient, making the comparison vacuous).

#include <algorithm>
#include <functional>

#include "psgan/nn/discriminator_background.hpp"
#include "psgan/nn/discriminator_pedestrian.hpp"
#include "psgan/nn/generator.hpp"
#include "psgan/nn/losses.hpp"
#include "psgan/rng.hpp"
#include "psgan/scene.hpp"
#include "test_util.hpp"

namespace gradcheck {

struct Report {
    double worst_rel_err = 0;
    int checked = 0;
};

template <typename T>
psgan::Tensor<T> crop_region_t(const psgan::Tensor<T>& image, const psgan::BBox& box) {
    psgan::Tensor<T> out({image.dim(0), box.h, box.w});
    for (int c = 0; c < image.dim(0); ++c)
        for (int r = 0; r < box.h; ++r)
            for (int col = 0; col < box.w; ++col)
                out.at(c, r, col) = image.at(c, box.y + r, box.x + col);
    return out;
}

/// Background discriminator on 6x8x8 stacks under its discriminator loss.
inline Report check_background_discriminator(int samples_per_tensor = 30) {
    using namespace psgan;
    Rng rng(211);
    DbConfig cfg;
    cfg.layer_channels = {4, 8};
    nn::BackgroundDiscriminator<double> db(cfg);
    db.init(rng);

    const auto real = testutil::random_tensor<double>({6, 8, 8}, rng);
    const auto fake = testutil::random_tensor<double>({6, 8, 8}, rng);

    auto loss = [&] {
        const auto mr = db.forward(real, true);
        const auto mf = db.forward(fake, true);
        return static_cast<double>(loss::lsgan_d_loss(mr, mf));
    };

    db.zero_grad();
    {
        const auto mr = db.forward(real, true);
        Tensor<double> dmr;
        loss::mse_vs_grad(mr, 1.0, 1.0, dmr);
        db.backward(dmr);
        const auto mf = db.forward(fake, true);
        Tensor<double> dmf;
        loss::mse_vs_grad(mf, 0.0, 1.0, dmf);
        db.backward(dmf);
    }
    Report r;
    r.worst_rel_err = testutil::check_param_grads(db.params(), loss, rng,
                                                  samples_per_tensor, &r.checked);
    return r;
}

/// Pedestrian discriminator (conv stack, SPP, sigmoid head) on 3x16x16
/// crops under the log-likelihood loss.
inline Report check_pedestrian_discriminator(int samples_per_tensor = 16) {
    using namespace psgan;
    Rng rng(223);
    DpConfig cfg;
    cfg.layer_channels = {4, 8, 8};  // 16 -> 8 -> 4 -> 2; every BN map >= 2x2
    nn::PedestrianDiscriminator<double> dp(cfg);
    dp.init(rng);

    const auto real = testutil::random_tensor<double>({3, 16, 16}, rng);
    const auto fake = testutil::random_tensor<double>({3, 16, 16}, rng);

    auto loss = [&] {
        const auto pr = dp.forward(real, true);
        const auto pf = dp.forward(fake, true);
        return static_cast<double>(loss::nll_dp_loss(pr, pf));
    };

    dp.zero_grad();
    {
        const auto pr = dp.forward(real, true);
        Tensor<double> dpr;
        loss::nll_accept_grad(pr, 1.0, dpr);
        dp.backward(dpr);
        const auto pf = dp.forward(fake, true);
        Tensor<double> dpf;
        loss::nll_reject_grad(pf, 1.0, dpf);
        dp.backward(dpf);
    }
    Report r;
    r.worst_rel_err = testutil::check_param_grads(dp.params(), loss, rng,
                                                  samples_per_tensor, &r.checked);
    return r;
}

/// Generator at P=8 (levels 3, base 4) under the full combined objective,
/// backpropagated through tiny frozen discriminators exactly as in a
/// training step: least-squares via the stacked-pair map, log-likelihood
/// via the cropped-box probability, plus the weighted L1 term.
inline Report check_generator(int samples_per_tensor = 9) {
    using namespace psgan;
    Rng rng(227);
    GeneratorConfig gcfg;
    gcfg.levels = 3;
    gcfg.base_channels = 4;
    nn::UNetGenerator<double> gen(gcfg);
    gen.init(rng);

    DbConfig dbcfg;
    dbcfg.layer_channels = {4, 8};
    nn::BackgroundDiscriminator<double> db(dbcfg);
    db.init(rng);

    DpConfig dpcfg;
    dpcfg.layer_channels = {8};  // single conv keeps the 6x5 crop gradient live
    dpcfg.min_input = 4;
    nn::PedestrianDiscriminator<double> dp(dpcfg);
    dp.init(rng);

    const auto x = testutil::random_tensor<double>({3, 8, 8}, rng);
    const auto y = testutil::random_tensor<double>({3, 8, 8}, rng);
    const BBox z{2, 1, 5, 6};
    LossWeights weights;  // lambda 100, least-squares D_b, log-likelihood D_p

    auto loss = [&] {
        const auto fake = gen.forward(x, true);
        const auto map = db.forward(concat_channels(x, fake), true);
        const auto prob = dp.forward(crop_region_t(fake, z), true);
        const double adv_db = loss::lsgan_g_loss(map);
        const double adv_dp = loss::nll_g_dp_loss(prob);
        const double l1 = loss::l1_loss(fake, y);
        return loss::total_g_loss(adv_db, adv_dp, l1, weights);
    };

    gen.zero_grad();
    {
        const auto fake = gen.forward(x, true);
        const auto map = db.forward(concat_channels(x, fake), true);
        Tensor<double> dmap;
        loss::mse_vs_grad(map, 1.0, 1.0, dmap);
        auto dfake = split_channels(db.backward(dmap, false), 3).second;

        const auto prob = dp.forward(crop_region_t(fake, z), true);
        Tensor<double> dprob;
        loss::nll_accept_grad(prob, 1.0, dprob);
        const auto dcrop = dp.backward(dprob, false);
        for (int c = 0; c < 3; ++c)
            for (int r = 0; r < z.h; ++r)
                for (int col = 0; col < z.w; ++col)
                    dfake.at(c, z.y + r, z.x + col) += dcrop.at(c, r, col);

        Tensor<double> dl1;
        loss::l1_loss_grad(fake, y, dl1);
        for (std::size_t i = 0; i < dfake.numel(); ++i)
            dfake[i] += weights.lambda_l1 * dl1[i];
        gen.backward(dfake);
    }
    Report r;
    r.worst_rel_err = testutil::check_param_grads(gen.params(), loss, rng,
                                                  samples_per_tensor, &r.checked);
    return r;
}

}  // namespace gradcheck
