#include "psgan/synthesis.hpp"

#include <cmath>
#include <cstdio>

#include "psgan/errors.hpp"

namespace psgan {

std::vector<BBox> propose_boxes(const Scene& scene, const Tensorf* placement_mask,
                                int n, const SizeRange& size, Rng& rng,
                                float max_iou, int attempt_budget) {
    scene.validate();
    if (placement_mask &&
        (placement_mask->dim(1) != scene.height() || placement_mask->dim(2) != scene.width()))
        throw ShapeError("placement mask size differs from scene");

    const int W = scene.width(), H = scene.height();
    std::vector<BBox> accepted;
    long long attempts_left = static_cast<long long>(attempt_budget) * n;
    while (static_cast<int>(accepted.size()) < n && attempts_left-- > 0) {
        const int h = rng.uniform_int(size.h_min, size.h_max);
        const int w = std::max(1, static_cast<int>(std::lround(
                                      h * rng.uniform(size.aspect_min, size.aspect_max))));
        const int cx = rng.uniform_int(0, W - 1);
        const int cy = rng.uniform_int(0, H - 1);
        if (placement_mask && placement_mask->at(0, cy, cx) <= 0.5f) continue;

        BBox b;
        b.x = cx - w / 2;
        b.y = cy - h / 2;
        b.w = w;
        b.h = h;
        b.label = BoxLabel::synthetic;
        if (!b.valid_within(W, H)) continue;

        bool overlaps = false;
        for (const BBox& other : scene.boxes)
            if (iou(b, other) > max_iou) {
                overlaps = true;
                break;
            }
        for (const BBox& other : accepted)
            if (!overlaps && iou(b, other) > max_iou) {
                overlaps = true;
                break;
            }
        if (!overlaps) accepted.push_back(b);
    }
    if (static_cast<int>(accepted.size()) < n)
        std::fprintf(stderr, "warning: placed %zu of %d boxes in %s before the attempt budget ran out\n",
                     accepted.size(), n, scene.source_id.c_str());
    return accepted;
}

SynthesizedPatch synthesize_patch(nn::UNetGenerator<float>& gen, const Scene& scene,
                                  const BBox& box, Rng& rng) {
    const int P = gen.cfg.patch_side();
    PatchGeometry geo = crop_patch(scene, box, P);
    const Tensorf noisy = mask_with_noise(geo.patch, geo.box, rng);
    SynthesizedPatch out;
    out.patch = gen.forward(noisy, /*training=*/false);
    out.offset_x = geo.offset_x;
    out.offset_y = geo.offset_y;
    out.box_in_patch = geo.box;
    return out;
}

Scene composite(const Scene& scene, const Tensorf& patch, int offset_x, int offset_y,
                const BBox& box_in_scene, bool full_patch) {
    const int P = patch.dim(1);
    if (patch.ndim() != 3 || patch.dim(0) != 3)
        throw ShapeError("composite: patch must be (3,P,P)");
    if (offset_x < 0 || offset_y < 0 || offset_x + patch.dim(2) > scene.width() ||
        offset_y + P > scene.height())
        throw OutOfBounds("composite: patch escapes scene");
    if (!box_in_scene.valid_within(scene.width(), scene.height()))
        throw OutOfBounds("composite: box escapes scene");
    if (box_in_scene.x < offset_x || box_in_scene.y < offset_y ||
        box_in_scene.x + box_in_scene.w > offset_x + patch.dim(2) ||
        box_in_scene.y + box_in_scene.h > offset_y + P)
        throw OutOfBounds("composite: box not covered by the patch");

    Scene out = scene;
    if (full_patch) {
        for (int c = 0; c < 3; ++c)
            for (int r = 0; r < P; ++r)
                for (int col = 0; col < patch.dim(2); ++col)
                    out.image.at(c, offset_y + r, offset_x + col) = patch.at(c, r, col);
    } else {
        for (int c = 0; c < 3; ++c)
            for (int r = 0; r < box_in_scene.h; ++r)
                for (int col = 0; col < box_in_scene.w; ++col) {
                    const int sy = box_in_scene.y + r, sx = box_in_scene.x + col;
                    out.image.at(c, sy, sx) = patch.at(c, sy - offset_y, sx - offset_x);
                }
    }
    BBox marked = box_in_scene;
    marked.label = BoxLabel::synthetic;
    out.boxes.push_back(marked);
    return out;
}

void export_annotations(const std::vector<Scene>& scenes,
                        const std::vector<std::string>& image_paths,
                        const std::filesystem::path& json_path) {
    if (scenes.size() != image_paths.size())
        throw ShapeError("export_annotations: one image path per scene required");
    std::vector<SceneRecord> records;
    records.reserve(scenes.size());
    for (std::size_t i = 0; i < scenes.size(); ++i)
        records.push_back({image_paths[i], scenes[i].boxes});
    save_annotations(json_path, records);
}

}  // namespace psgan
