#include "psgan/toyscapes.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "psgan/errors.hpp"

namespace psgan {

void ToyConfig::validate() const {
    if (width < 32 || height < 32) throw ConfigError("toy scene smaller than 32x32");
    if (n_peds < 0) throw ConfigError("n_peds must be >= 0");
    if (ped_h_min < 16 || ped_h_min > ped_h_max)
        throw ConfigError("bad pedestrian height range");
    if (ped_h_max > height * 2 / 3)
        throw ConfigError("pedestrians taller than 2/3 of the scene do not fit the road band");
}

namespace {

using Color = std::array<float, 3>;

struct Painter {
    Tensorf& img;
    int min_x, max_x = -1, min_y, max_y = -1;
    bool any = false;

    explicit Painter(Tensorf& image) : img(image), min_x(image.dim(2)), min_y(image.dim(1)) {}

    void set(int r, int c, const Color& color) {
        if (r < 0 || c < 0 || r >= img.dim(1) || c >= img.dim(2)) return;
        for (int ch = 0; ch < 3; ++ch) img.at(ch, r, c) = color[ch];
        min_x = std::min(min_x, c);
        max_x = std::max(max_x, c);
        min_y = std::min(min_y, r);
        max_y = std::max(max_y, r);
        any = true;
    }

    BBox tight_box() const {
        BBox b;
        b.x = min_x;
        b.y = min_y;
        b.w = max_x - min_x + 1;
        b.h = max_y - min_y + 1;
        return b;
    }
};

void fill_disc(Painter& p, float cx, float cy, float radius, const Color& color) {
    const int r0 = static_cast<int>(std::floor(cy - radius));
    const int r1 = static_cast<int>(std::ceil(cy + radius));
    const int c0 = static_cast<int>(std::floor(cx - radius));
    const int c1 = static_cast<int>(std::ceil(cx + radius));
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
            const float dx = c - cx, dy = r - cy;
            if (dx * dx + dy * dy <= radius * radius) p.set(r, c, color);
        }
}

void thick_line(Painter& p, float x0, float y0, float x1, float y1, float thickness,
                const Color& color) {
    const float half = thickness * 0.5f;
    const int r0 = static_cast<int>(std::floor(std::min(y0, y1) - half));
    const int r1 = static_cast<int>(std::ceil(std::max(y0, y1) + half));
    const int c0 = static_cast<int>(std::floor(std::min(x0, x1) - half));
    const int c1 = static_cast<int>(std::ceil(std::max(x0, x1) + half));
    const float dx = x1 - x0, dy = y1 - y0;
    const float len2 = dx * dx + dy * dy;
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
            const float px = c - x0, py = r - y0;
            float t = len2 > 0 ? (px * dx + py * dy) / len2 : 0.0f;
            t = std::clamp(t, 0.0f, 1.0f);
            const float ex = px - t * dx, ey = py - t * dy;
            if (ex * ex + ey * ey <= half * half) p.set(r, c, color);
        }
}

float clampf(float v) { return std::clamp(v, -1.0f, 1.0f); }

const Color kPalette[4] = {
    {0.85f, -0.55f, -0.55f},   // red coat
    {-0.60f, -0.10f, 0.90f},   // blue coat
    {0.90f, 0.70f, -0.60f},    // yellow coat
    {-0.70f, 0.75f, -0.45f},   // green coat
};

/// Draws one figure anchored at (cx, feet_y) with height h; returns its
/// tight pixel box via the painter. Pose and color are functions of the
/// (randomly sampled) height, so appearance varies across figures but is
/// predictable from the box geometry alone; that keeps the
/// noise-box-to-pedestrian mapping learnable at desk scale.
void draw_figure(Painter& p, Rng& rng, int cx, int feet_y, int h) {
    auto frac = [](double x) { return static_cast<float>(x - std::floor(x)); };
    Color color = kPalette[h % 4];
    for (float& ch : color) ch = clampf(ch + static_cast<float>(rng.uniform(-0.04, 0.04)));

    const float fh = static_cast<float>(h);
    const float top = static_cast<float>(feet_y) - fh + 1.0f;
    const float t = std::max(2.0f, 0.07f * fh);
    const float head_r = 0.11f * fh;
    const float shoulder_y = top + 0.26f * fh;
    const float hip_y = top + 0.55f * fh;

    fill_disc(p, static_cast<float>(cx), top + head_r, head_r, color);
    thick_line(p, static_cast<float>(cx), top + 2.0f * head_r, static_cast<float>(cx),
               hip_y, t, color);
    // Arms: horizontal reach at least 0.24*h per side so figures stay wide
    // enough for the pedestrian discriminator's minimum crop.
    const float ax = (0.24f + 0.09f * frac(h * 0.37)) * fh;
    const float ay[2] = {(0.02f + 0.14f * frac(h * 0.59)) * fh,
                         (0.02f + 0.14f * frac(h * 0.83)) * fh};
    for (int side : {0, 1})
        thick_line(p, static_cast<float>(cx), shoulder_y,
                   static_cast<float>(cx) + (side ? ax : -ax), shoulder_y + ay[side], t,
                   color);
    const float lx[2] = {(0.10f + 0.12f * frac(h * 0.41)) * fh,
                         (0.10f + 0.12f * frac(h * 0.67)) * fh};
    for (int side : {0, 1})
        thick_line(p, static_cast<float>(cx), hip_y,
                   static_cast<float>(cx) + (side ? lx[1] : -lx[0]),
                   static_cast<float>(feet_y), t, color);
}

bool intersects_any(const BBox& b, const std::vector<BBox>& others) {
    for (const BBox& o : others)
        if (iou(b, o) > 0.0f) return true;
    return false;
}

}  // namespace

Scene gen_toy_scene(Rng& rng, const ToyConfig& cfg) {
    cfg.validate();
    const int W = cfg.width, H = cfg.height;
    Scene scene;
    scene.image = Tensorf({3, H, W});

    const int horizon = static_cast<int>(std::lround(H * rng.uniform(0.42, 0.50)));

    // Sky band: light, slightly blue, darkening toward the horizon.
    for (int r = 0; r < horizon; ++r) {
        const float f = static_cast<float>(r) / static_cast<float>(horizon);
        const float base = 0.55f - 0.25f * f;
        for (int c = 0; c < W; ++c) {
            const float n = static_cast<float>(rng.uniform(-0.04, 0.04));
            scene.image.at(0, r, c) = clampf(base - 0.15f + n);
            scene.image.at(1, r, c) = clampf(base - 0.05f + n);
            scene.image.at(2, r, c) = clampf(base + 0.20f + n);
        }
    }
    // Road band: gray, darkening toward the bottom edge.
    for (int r = horizon; r < H; ++r) {
        const float f = static_cast<float>(r - horizon) / static_cast<float>(H - horizon);
        const float base = -0.05f - 0.40f * f;
        for (int c = 0; c < W; ++c)
            for (int ch = 0; ch < 3; ++ch)
                scene.image.at(ch, r, c) =
                    clampf(base + static_cast<float>(rng.uniform(-0.05, 0.05)));
    }
    // Lamp posts.
    const int n_posts = rng.uniform_int(0, 3);
    for (int i = 0; i < n_posts; ++i) {
        const int pw = rng.uniform_int(2, 3);
        const int x0 = rng.uniform_int(2, W - pw - 3);
        const int top_y = rng.uniform_int(2, std::max(3, horizon - 10));
        const int base_y = horizon + rng.uniform_int(0, (H - horizon) / 3);
        const float shade = -0.60f + static_cast<float>(rng.uniform(-0.15, 0.15));
        const Color post{shade, shade, shade};
        Painter p(scene.image);
        for (int r = top_y; r <= base_y; ++r)
            for (int c = x0; c < x0 + pw; ++c) p.set(r, c, post);
        for (int r = top_y; r < top_y + 3; ++r)
            for (int c = x0 - 2; c < x0 + pw + 2; ++c) p.set(r, c, post);
    }

    // Pedestrians, feet on the road, boxes pairwise disjoint.
    const int margin = cfg.ped_h_max / 2 + 2;
    for (int k = 0; k < cfg.n_peds; ++k) {
        for (int attempt = 0; attempt < 50; ++attempt) {
            const int h = rng.uniform_int(cfg.ped_h_min, cfg.ped_h_max);
            const int feet_y = rng.uniform_int(std::max(horizon + 4, h), H - 2);
            const int cx = rng.uniform_int(margin, W - margin - 1);

            Tensorf backup = scene.image;
            Painter p(scene.image);
            draw_figure(p, rng, cx, feet_y, h);
            const BBox box = p.tight_box();
            if (!p.any || !box.valid_within(W, H) || intersects_any(box, scene.boxes)) {
                scene.image = std::move(backup);
                continue;
            }
            scene.boxes.push_back(box);
            break;
        }
    }
    scene.validate();
    return scene;
}

EvalMetrics eval_generator(const GeneratorFn& gen_forward,
                           const std::vector<PatchPair>& pairs,
                           nn::PedestrianDiscriminator<float>& dp) {
    if (pairs.empty()) throw EmptyDataset("eval_generator: no pairs");
    EvalMetrics m;
    for (const PatchPair& pair : pairs) {
        const Tensorf g = gen_forward(pair.x_noisy);
        const BBox& z = pair.z_box;
        double inside = 0, outside = 0;
        const long long in_count = 3LL * z.w * z.h;
        const long long out_count = static_cast<long long>(g.numel()) - in_count;
        for (int c = 0; c < 3; ++c)
            for (int r = 0; r < g.dim(1); ++r)
                for (int col = 0; col < g.dim(2); ++col) {
                    const double d = std::abs(static_cast<double>(g.at(c, r, col)) -
                                              pair.y_truth.at(c, r, col));
                    const bool in_box = r >= z.y && r < z.y + z.h && col >= z.x && col < z.x + z.w;
                    (in_box ? inside : outside) += d;
                }
        m.inside_l1 += inside / static_cast<double>(in_count);
        m.outside_l1 += out_count > 0 ? outside / static_cast<double>(out_count) : 0.0;
        const Tensorf p = dp.forward(crop_region(g, z), /*training=*/false);
        if (p[0] > 0.5f) m.dp_fool_rate += 1.0;
    }
    const double n = static_cast<double>(pairs.size());
    m.outside_l1 /= n;
    m.inside_l1 /= n;
    m.dp_fool_rate /= n;
    m.n_pairs = static_cast<int>(pairs.size());
    return m;
}

EvalMetrics eval_generator(nn::UNetGenerator<float>& gen,
                           const std::vector<PatchPair>& pairs,
                           nn::PedestrianDiscriminator<float>& dp) {
    return eval_generator(
        [&gen](const Tensorf& x) { return gen.forward(x, /*training=*/false); },
        pairs, dp);
}

}  // namespace psgan
