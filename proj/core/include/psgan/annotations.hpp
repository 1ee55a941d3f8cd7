#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "psgan/scene.hpp"

namespace psgan {

/// One scene entry of the annotation document: an image path (relative to
/// the document) and its boxes.
struct SceneRecord {
    std::string image_path;
    std::vector<BBox> boxes;
};

/// Reads {"scenes":[{"image":..., "boxes":[{"x","y","w","h","label"}]}]}.
std::vector<SceneRecord> load_annotations(const std::filesystem::path& json_path);

/// Writes the same schema; geometry, labels and optional scores round-trip
/// exactly.
void save_annotations(const std::filesystem::path& json_path,
                      const std::vector<SceneRecord>& records);

/// Loads annotation records plus their PNG images into scenes. Image paths
/// resolve relative to the document's directory. Box invariants are
/// validated against each image.
std::vector<Scene> load_scenes(const std::filesystem::path& json_path);

/// Writes scene PNGs under dir/images/ and an annotation document at
/// dir/<json_name> referencing them.
void save_scenes(const std::filesystem::path& dir, const std::vector<Scene>& scenes,
                 const std::string& json_name = "annotations.json");

/// Adapter for Cityscapes-style polygon ground truth: scans gt_dir
/// recursively for *_gtFine_polygons.json, converts every polygon labeled
/// "person" to its tight bounding box, and pairs each file with the
/// sibling *_leftImg8bit.png image path.
std::vector<SceneRecord> cityscapes_to_records(const std::filesystem::path& gt_dir);

}  // namespace psgan
