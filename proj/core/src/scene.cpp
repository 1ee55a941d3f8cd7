#include "psgan/scene.hpp"

#include <algorithm>
#include <cstdio>

#include "psgan/errors.hpp"

namespace psgan {

const char* to_string(BoxLabel label) {
    return label == BoxLabel::real ? "real" : "synthetic";
}

BoxLabel box_label_from_string(const std::string& s) {
    if (s == "real") return BoxLabel::real;
    if (s == "synthetic") return BoxLabel::synthetic;
    throw InvalidBox("unknown box label: " + s);
}

float iou(const BBox& a, const BBox& b) {
    const int x0 = std::max(a.x, b.x);
    const int y0 = std::max(a.y, b.y);
    const int x1 = std::min(a.x + a.w, b.x + b.w);
    const int y1 = std::min(a.y + a.h, b.y + b.h);
    const long long inter = std::max(0, x1 - x0) * static_cast<long long>(std::max(0, y1 - y0));
    const long long uni = static_cast<long long>(a.w) * a.h + static_cast<long long>(b.w) * b.h - inter;
    return uni > 0 ? static_cast<float>(inter) / static_cast<float>(uni) : 0.0f;
}

void Scene::validate() const {
    if (image.ndim() != 3 || image.dim(0) != 3)
        throw ShapeError("scene image must be (3,H,W), got " + image.shape_string());
    for (const BBox& b : boxes)
        if (!b.valid_within(width(), height()))
            throw InvalidBox("box (" + std::to_string(b.x) + "," + std::to_string(b.y) +
                             "," + std::to_string(b.w) + "," + std::to_string(b.h) +
                             ") outside " + std::to_string(width()) + "x" +
                             std::to_string(height()) + " scene " + source_id);
}

std::vector<BBox> filter_boxes(const std::vector<BBox>& boxes, int min_h, int min_w) {
    std::vector<BBox> kept;
    for (const BBox& b : boxes)
        if (b.h >= min_h && b.w >= min_w) kept.push_back(b);
    return kept;
}

PatchGeometry crop_patch(const Scene& scene, const BBox& box, int P) {
    const int W = scene.width(), H = scene.height();
    if (P > W || P > H)
        throw SceneTooSmall("scene " + std::to_string(W) + "x" + std::to_string(H) +
                            " smaller than patch " + std::to_string(P));
    if (box.w > P || box.h > P)
        throw BoxTooLarge("box " + std::to_string(box.w) + "x" + std::to_string(box.h) +
                          " exceeds patch " + std::to_string(P));
    if (!box.valid_within(W, H)) throw InvalidBox("crop_patch: box outside scene");

    const int cx = box.x + box.w / 2;
    const int cy = box.y + box.h / 2;
    int left = std::clamp(cx - P / 2, 0, W - P);
    int top = std::clamp(cy - P / 2, 0, H - P);
    // Centering keeps the box inside; clamping can only move the patch
    // toward the box, never past it.
    PatchGeometry out;
    out.offset_x = left;
    out.offset_y = top;
    out.box = box;
    out.box.x = box.x - left;
    out.box.y = box.y - top;
    out.patch = Tensorf({3, P, P});
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < P; ++r) {
            const float* src = &scene.image.at(c, top + r, left);
            std::copy(src, src + P, &out.patch.at(c, r, 0));
        }
    return out;
}

Tensorf mask_with_noise(const Tensorf& patch, const BBox& box, Rng& rng) {
    if (!box.valid_within(patch.dim(2), patch.dim(1)))
        throw OutOfBounds("mask_with_noise: box escapes patch");
    Tensorf out = patch;
    for (int c = 0; c < patch.dim(0); ++c)
        for (int r = box.y; r < box.y + box.h; ++r)
            for (int col = box.x; col < box.x + box.w; ++col)
                out.at(c, r, col) = static_cast<float>(rng.uniform(-1.0, 1.0));
    return out;
}

Tensorf crop_region(const Tensorf& image, const BBox& box) {
    if (image.ndim() != 3) throw ShapeError("crop_region: need (C,H,W)");
    if (!box.valid_within(image.dim(2), image.dim(1)))
        throw OutOfBounds("crop_region: box (" + std::to_string(box.x) + "," +
                          std::to_string(box.y) + "," + std::to_string(box.w) + "," +
                          std::to_string(box.h) + ") escapes " + image.shape_string());
    Tensorf out({image.dim(0), box.h, box.w});
    for (int c = 0; c < image.dim(0); ++c)
        for (int r = 0; r < box.h; ++r) {
            const float* src = &image.at(c, box.y + r, box.x);
            std::copy(src, src + box.w, &out.at(c, r, 0));
        }
    return out;
}

std::vector<PatchPair> assemble_dataset(const std::vector<Scene>& scenes, int P,
                                        Rng& rng) {
    std::vector<PatchPair> pairs;
    for (const Scene& scene : scenes) {
        for (const BBox& box : scene.boxes) {
            PatchGeometry geo;
            try {
                geo = crop_patch(scene, box, P);
            } catch (const Error& e) {
                std::fprintf(stderr, "warning: skipping box in %s: %s\n",
                             scene.source_id.c_str(), e.what());
                continue;
            }
            PatchPair pair;
            pair.y_truth = geo.patch;
            pair.x_noisy = mask_with_noise(geo.patch, geo.box, rng);
            pair.z_box = geo.box;
            pair.patch = P;
            pair.scene_x = geo.offset_x;
            pair.scene_y = geo.offset_y;
            pair.source_id = scene.source_id;
            pairs.push_back(std::move(pair));
        }
    }
    return pairs;
}

}  // namespace psgan
