#pragma once

#include <optional>
#include <string>
#include <vector>

#include "psgan/rng.hpp"
#include "psgan/tensor.hpp"

namespace psgan {

enum class BoxLabel { real, synthetic };

const char* to_string(BoxLabel label);
BoxLabel box_label_from_string(const std::string& s);

/// Axis-aligned pixel rectangle. (x, y) is the top-left corner; the box
/// must lie fully inside its owning image and have positive extent.
struct BBox {
    int x = 0, y = 0, w = 0, h = 0;
    BoxLabel label = BoxLabel::real;
    std::optional<float> score;

    bool valid_within(int image_w, int image_h) const {
        return w >= 1 && h >= 1 && x >= 0 && y >= 0 && x + w <= image_w &&
               y + h <= image_h;
    }

    bool same_geometry(const BBox& o) const {
        return x == o.x && y == o.y && w == o.w && h == o.h;
    }
};

float iou(const BBox& a, const BBox& b);

/// Full RGB image (3,H,W in [-1,1]) plus its pedestrian boxes.
struct Scene {
    Tensorf image;
    std::vector<BBox> boxes;
    std::string source_id;

    int width() const { return image.dim(2); }
    int height() const { return image.dim(1); }

    void validate() const;
};

/// Training triple: noisy input patch, ground-truth patch, and the noise
/// box in patch coordinates. scene_x/scene_y record the patch top-left in
/// the source scene for later compositing.
struct PatchPair {
    Tensorf x_noisy;
    Tensorf y_truth;
    BBox z_box;
    int patch = 256;
    int scene_x = 0, scene_y = 0;
    std::string source_id;
};

/// Patch cropped around a box, before masking.
struct PatchGeometry {
    Tensorf patch;
    BBox box;          // in patch coordinates
    int offset_x = 0;  // patch top-left in the scene
    int offset_y = 0;
};

/// Keeps exactly the boxes with h >= min_h and w >= min_w ("smaller than"
/// rejection is strict, so the boundary is inclusive); order preserved.
std::vector<BBox> filter_boxes(const std::vector<BBox>& boxes, int min_h = 70,
                               int min_w = 25);

/// Crops a P x P patch centered on the box, translated the minimum amount
/// to stay inside the image (no padding pixels are ever produced).
PatchGeometry crop_patch(const Scene& scene, const BBox& box, int P = 256);

/// Returns a copy of the patch with the box interior replaced by i.i.d.
/// uniform [-1,1] noise per channel; outside pixels are bit-identical.
Tensorf mask_with_noise(const Tensorf& patch, const BBox& box, Rng& rng);

/// Exact sub-tensor copy of the box region; no resizing.
Tensorf crop_region(const Tensorf& image, const BBox& box);

/// One PatchPair per box of every scene: crop_patch then mask_with_noise.
/// Boxes that cannot be cropped (larger than P) are skipped with a warning
/// on stderr.
std::vector<PatchPair> assemble_dataset(const std::vector<Scene>& scenes, int P,
                                        Rng& rng);

}  // namespace psgan
