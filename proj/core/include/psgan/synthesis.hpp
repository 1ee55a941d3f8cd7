#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "psgan/annotations.hpp"
#include "psgan/nn/generator.hpp"
#include "psgan/rng.hpp"
#include "psgan/scene.hpp"

namespace psgan {

/// Sampling ranges for proposed noise boxes: height uniform in
/// [h_min, h_max], width = round(height * aspect) with aspect uniform in
/// [aspect_min, aspect_max].
struct SizeRange {
    int h_min = 70;
    int h_max = 180;
    double aspect_min = 0.3;
    double aspect_max = 0.45;
};

/// Samples up to n boxes anchored (box center) uniformly over pixels where
/// placement_mask is set (whole image when absent), rejecting candidates
/// whose IoU with any existing or already-accepted box exceeds max_iou.
/// Gives up after attempt_budget * n draws and returns a short list with a
/// warning on stderr.
std::vector<BBox> propose_boxes(const Scene& scene, const Tensorf* placement_mask,
                                int n, const SizeRange& size, Rng& rng,
                                float max_iou = 0.3f, int attempt_budget = 1000);

/// Generated patch plus its top-left offset in the scene.
struct SynthesizedPatch {
    Tensorf patch;
    int offset_x = 0;
    int offset_y = 0;
    BBox box_in_patch;
};

/// crop_patch -> mask_with_noise -> generator forward (eval mode).
SynthesizedPatch synthesize_patch(nn::UNetGenerator<float>& gen, const Scene& scene,
                                  const BBox& box, Rng& rng);

/// Pastes a generated patch back into the scene and appends the box with
/// label "synthetic". Default mode pastes only the box interior so every
/// pixel outside the box keeps its original value exactly; full_patch
/// pastes the whole generated patch.
Scene composite(const Scene& scene, const Tensorf& patch, int offset_x, int offset_y,
                const BBox& box_in_scene, bool full_patch = false);

/// Writes the annotation JSON document for a set of scenes (geometry and
/// real/synthetic labels preserved). Images are not written here.
void export_annotations(const std::vector<Scene>& scenes,
                        const std::vector<std::string>& image_paths,
                        const std::filesystem::path& json_path);

}  // namespace psgan
