#include <doctest.h>

#include "psgan/toyscapes.hpp"
#include "test_util.hpp"

using namespace psgan;

TEST_CASE("toy scenes: boxes tightly bound rendered figures") {
    // Render the same seed with and without the pedestrian; the changed
    // pixels are exactly the figure, whose extent must equal the box.
    for (uint64_t seed = 1; seed <= 12; ++seed) {
        ToyConfig cfg;
        cfg.n_peds = 1;
        Rng r_with(seed), r_without(seed);
        ToyConfig empty_cfg = cfg;
        empty_cfg.n_peds = 0;
        const Scene with = gen_toy_scene(r_with, cfg);
        const Scene without = gen_toy_scene(r_without, empty_cfg);
        REQUIRE(with.boxes.size() == 1);

        int min_x = cfg.width, max_x = -1, min_y = cfg.height, max_y = -1;
        for (int r = 0; r < cfg.height; ++r)
            for (int c = 0; c < cfg.width; ++c)
                for (int ch = 0; ch < 3; ++ch)
                    if (with.image.at(ch, r, c) != without.image.at(ch, r, c)) {
                        min_x = std::min(min_x, c);
                        max_x = std::max(max_x, c);
                        min_y = std::min(min_y, r);
                        max_y = std::max(max_y, r);
                    }
        const BBox& b = with.boxes[0];
        CHECK(b.x == min_x);
        CHECK(b.y == min_y);
        CHECK(b.w == max_x - min_x + 1);
        CHECK(b.h == max_y - min_y + 1);
    }
}

TEST_CASE("toy scenes: deterministic, valid, wide enough for the crop minimum") {
    ToyConfig cfg;
    cfg.n_peds = 2;
    for (uint64_t seed = 100; seed < 140; ++seed) {
        Rng r1(seed), r2(seed);
        const Scene a = gen_toy_scene(r1, cfg);
        const Scene b = gen_toy_scene(r2, cfg);
        for (std::size_t i = 0; i < a.image.numel(); ++i)
            REQUIRE(a.image[i] == b.image[i]);
        a.validate();
        for (const BBox& box : a.boxes) {
            CHECK(box.w >= 16);
            CHECK(box.h >= 16);
        }
        // figures never overlap
        for (std::size_t i = 0; i < a.boxes.size(); ++i)
            for (std::size_t j = i + 1; j < a.boxes.size(); ++j)
                CHECK(iou(a.boxes[i], a.boxes[j]) == 0.0f);
    }
}

TEST_CASE("toy scenes: n_peds=0 gives a pedestrian-free background") {
    Rng rng(141);
    ToyConfig cfg;
    cfg.n_peds = 0;
    const Scene s = gen_toy_scene(rng, cfg);
    CHECK(s.boxes.empty());
}

TEST_CASE("toy config validation") {
    ToyConfig cfg;
    cfg.ped_h_max = 90;  // taller than 2/3 of a 96-high scene
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    ToyConfig tiny;
    tiny.width = 16;
    CHECK_THROWS_AS(tiny.validate(), ConfigError);
}

TEST_CASE("eval_generator: identity stub scores zero, noise pass-through scores high inside") {
    Rng rng(149);
    ToyConfig cfg;
    std::vector<Scene> scenes;
    for (int i = 0; i < 4; ++i) scenes.push_back(gen_toy_scene(rng, cfg));
    Rng asm_rng(5);
    auto pairs = assemble_dataset(scenes, 64, asm_rng);
    REQUIRE(!pairs.empty());

    DpConfig dpc;
    dpc.layer_channels = {4, 8, 8, 8, 8};
    nn::PedestrianDiscriminator<float> dp(dpc);
    dp.init(rng);

    // identity stub: output equals the ground-truth patch
    std::size_t at = 0;
    GeneratorFn identity = [&](const Tensorf&) { return pairs[at++].y_truth; };
    const EvalMetrics ideal = eval_generator(identity, pairs, dp);
    CHECK(ideal.outside_l1 == 0.0);
    CHECK(ideal.inside_l1 == 0.0);
    CHECK(ideal.n_pairs == static_cast<int>(pairs.size()));

    // pass-through stub: emits the noisy input unchanged; the inside error
    // equals the noise-vs-pedestrian L1, computed directly per pair
    GeneratorFn pass_through = [](const Tensorf& x) { return x; };
    const EvalMetrics nm = eval_generator(pass_through, pairs, dp);
    CHECK(nm.outside_l1 == 0.0);
    double want_inside = 0;
    for (const auto& p : pairs) {
        double d = 0;
        for (int c = 0; c < 3; ++c)
            for (int r = 0; r < p.z_box.h; ++r)
                for (int col = 0; col < p.z_box.w; ++col)
                    d += std::abs(p.x_noisy.at(c, p.z_box.y + r, p.z_box.x + col) -
                                  p.y_truth.at(c, p.z_box.y + r, p.z_box.x + col));
        want_inside += d / (3.0 * p.z_box.w * p.z_box.h);
    }
    want_inside /= static_cast<double>(pairs.size());
    CHECK(nm.inside_l1 == doctest::Approx(want_inside).epsilon(1e-9));
    CHECK(nm.inside_l1 > 0.2);  // noise vs figure is a large error
    CHECK(nm.dp_fool_rate >= 0.0);
    CHECK(nm.dp_fool_rate <= 1.0);

    GeneratorFn none = [](const Tensorf& x) { return x; };
    CHECK_THROWS_AS(eval_generator(none, {}, dp), EmptyDataset);
}
