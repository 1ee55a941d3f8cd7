#include "psgan/annotations.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "psgan/errors.hpp"
#include "psgan/image_io.hpp"

namespace psgan {

using nlohmann::json;

namespace {

json box_to_json(const BBox& b) {
    json j{{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}, {"label", to_string(b.label)}};
    if (b.score) j["score"] = *b.score;
    return j;
}

BBox box_from_json(const json& j) {
    BBox b;
    b.x = j.at("x").get<int>();
    b.y = j.at("y").get<int>();
    b.w = j.at("w").get<int>();
    b.h = j.at("h").get<int>();
    b.label = j.contains("label") ? box_label_from_string(j.at("label").get<std::string>())
                                  : BoxLabel::real;
    if (j.contains("score")) b.score = j.at("score").get<float>();
    return b;
}

json parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("bad JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

}  // namespace

std::vector<SceneRecord> load_annotations(const std::filesystem::path& json_path) {
    const json doc = parse_file(json_path);
    if (!doc.contains("scenes"))
        throw IoError("annotation document " + json_path.string() + " has no \"scenes\"");
    std::vector<SceneRecord> out;
    for (const json& s : doc.at("scenes")) {
        SceneRecord rec;
        rec.image_path = s.at("image").get<std::string>();
        for (const json& b : s.value("boxes", json::array()))
            rec.boxes.push_back(box_from_json(b));
        out.push_back(std::move(rec));
    }
    return out;
}

void save_annotations(const std::filesystem::path& json_path,
                      const std::vector<SceneRecord>& records) {
    json scenes = json::array();
    for (const SceneRecord& rec : records) {
        json boxes = json::array();
        for (const BBox& b : rec.boxes) boxes.push_back(box_to_json(b));
        scenes.push_back({{"image", rec.image_path}, {"boxes", std::move(boxes)}});
    }
    std::ofstream out(json_path);
    if (!out) throw IoError("cannot write " + json_path.string());
    out << json{{"scenes", std::move(scenes)}}.dump(2) << "\n";
}

std::vector<Scene> load_scenes(const std::filesystem::path& json_path) {
    const auto records = load_annotations(json_path);
    const auto base = json_path.parent_path();
    std::vector<Scene> scenes;
    scenes.reserve(records.size());
    for (const SceneRecord& rec : records) {
        Scene s;
        s.image = read_png(base / rec.image_path);
        s.boxes = rec.boxes;
        s.source_id = rec.image_path;
        s.validate();
        scenes.push_back(std::move(s));
    }
    return scenes;
}

void save_scenes(const std::filesystem::path& dir, const std::vector<Scene>& scenes,
                 const std::string& json_name) {
    std::filesystem::create_directories(dir / "images");
    std::vector<SceneRecord> records;
    int index = 0;
    for (const Scene& s : scenes) {
        char name[64];
        std::snprintf(name, sizeof(name), "images/scene_%05d.png", index++);
        write_png(dir / name, s.image);
        records.push_back({name, s.boxes});
    }
    save_annotations(dir / json_name, records);
}

std::vector<SceneRecord> cityscapes_to_records(const std::filesystem::path& gt_dir) {
    const std::string gt_suffix = "_gtFine_polygons.json";
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(gt_dir))
        if (entry.is_regular_file() && entry.path().filename().string().ends_with(gt_suffix))
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    std::vector<SceneRecord> out;
    for (const auto& file : files) {
        const json doc = parse_file(file);
        SceneRecord rec;
        std::string name = std::filesystem::relative(file, gt_dir).string();
        name.replace(name.size() - gt_suffix.size(), gt_suffix.size(), "_leftImg8bit.png");
        rec.image_path = name;

        const int img_w = doc.value("imgWidth", 0);
        const int img_h = doc.value("imgHeight", 0);
        for (const json& obj : doc.value("objects", json::array())) {
            if (obj.value("label", "") != "person") continue;
            const json& poly = obj.at("polygon");
            if (poly.empty()) continue;
            int x0 = img_w, y0 = img_h, x1 = 0, y1 = 0;
            for (const json& pt : poly) {
                const int px = pt.at(0).get<int>();
                const int py = pt.at(1).get<int>();
                x0 = std::min(x0, px);
                y0 = std::min(y0, py);
                x1 = std::max(x1, px);
                y1 = std::max(y1, py);
            }
            // Clip to the image; polygons occasionally overshoot a border.
            x0 = std::max(x0, 0);
            y0 = std::max(y0, 0);
            if (img_w > 0) x1 = std::min(x1, img_w - 1);
            if (img_h > 0) y1 = std::min(y1, img_h - 1);
            if (x1 <= x0 || y1 <= y0) continue;
            BBox b;
            b.x = x0;
            b.y = y0;
            b.w = x1 - x0 + 1;
            b.h = y1 - y0 + 1;
            b.label = BoxLabel::real;
            rec.boxes.push_back(b);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace psgan
