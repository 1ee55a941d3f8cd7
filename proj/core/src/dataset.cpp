#include "psgan/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "psgan/errors.hpp"
#include "psgan/image_io.hpp"

namespace psgan {

using nlohmann::json;

void save_pairs_dataset(const std::filesystem::path& dir,
                        const std::vector<PatchPair>& pairs, int patch,
                        std::uint64_t seed, double test_frac, Rng& split_rng) {
    std::filesystem::create_directories(dir / "pairs");

    // Deterministic split: shuffle indices, first round(frac*N) become test.
    std::vector<int> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    split_rng.shuffle(order.begin(), order.end());
    const int n_test = static_cast<int>(std::lround(test_frac * static_cast<double>(pairs.size())));
    std::vector<char> is_test(pairs.size(), 0);
    for (int i = 0; i < n_test; ++i) is_test[order[i]] = 1;

    json entries = json::array();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        char xn[64], yn[64];
        std::snprintf(xn, sizeof(xn), "pairs/%06zu_x.png", i);
        std::snprintf(yn, sizeof(yn), "pairs/%06zu_y.png", i);
        write_png(dir / xn, pairs[i].x_noisy);
        write_png(dir / yn, pairs[i].y_truth);
        const BBox& z = pairs[i].z_box;
        entries.push_back({{"x", xn},
                           {"y", yn},
                           {"box", {{"x", z.x}, {"y", z.y}, {"w", z.w}, {"h", z.h}}},
                           {"scene_x", pairs[i].scene_x},
                           {"scene_y", pairs[i].scene_y},
                           {"source", pairs[i].source_id},
                           {"split", is_test[i] ? "test" : "train"}});
    }
    json doc{{"patch_size", patch}, {"seed", seed}, {"pairs", std::move(entries)}};
    std::ofstream out(dir / "dataset.json");
    if (!out) throw IoError("cannot write " + (dir / "dataset.json").string());
    out << doc.dump(2) << "\n";
}

namespace {

json load_dataset_doc(const std::filesystem::path& dir) {
    const auto path = dir / "dataset.json";
    std::ifstream in(path);
    if (!in) throw IoError("no dataset.json under " + dir.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw IoError("bad dataset.json: " + std::string(e.what()));
    }
    return doc;
}

}  // namespace

std::vector<PatchPair> load_pairs_dataset(const std::filesystem::path& dir,
                                          const std::string& split) {
    const json doc = load_dataset_doc(dir);
    const int patch = doc.at("patch_size").get<int>();
    std::vector<PatchPair> out;
    for (const json& e : doc.at("pairs")) {
        if (!split.empty() && e.value("split", "train") != split) continue;
        PatchPair p;
        p.x_noisy = read_png(dir / e.at("x").get<std::string>());
        p.y_truth = read_png(dir / e.at("y").get<std::string>());
        const json& b = e.at("box");
        p.z_box.x = b.at("x").get<int>();
        p.z_box.y = b.at("y").get<int>();
        p.z_box.w = b.at("w").get<int>();
        p.z_box.h = b.at("h").get<int>();
        p.patch = patch;
        p.scene_x = e.value("scene_x", 0);
        p.scene_y = e.value("scene_y", 0);
        p.source_id = e.value("source", "");
        if (!p.z_box.valid_within(patch, patch))
            throw InvalidBox("dataset box escapes patch in " + e.at("x").get<std::string>());
        out.push_back(std::move(p));
    }
    return out;
}

int dataset_patch_size(const std::filesystem::path& dir) {
    return load_dataset_doc(dir).at("patch_size").get<int>();
}

}  // namespace psgan
