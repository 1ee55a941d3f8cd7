// psgan: pedestrian-synthesis pipeline CLI.
//
// Subcommands: prep (annotations -> patch dataset), train (dataset ->
// checkpoint + metrics), synth (checkpoint + scenes -> augmented scenes),
// eval (checkpoint + dataset -> quality metrics), toygen (procedural toy
// dataset). Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "psgan/annotations.hpp"
#include "psgan/dataset.hpp"
#include "psgan/errors.hpp"
#include "psgan/image_io.hpp"
#include "psgan/synthesis.hpp"
#include "psgan/toyscapes.hpp"
#include "psgan/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct PrepArgs {
    std::string annotations;
    std::string cityscapes;
    std::string include_list;
    std::string out;
    int min_h = 70;
    int min_w = 25;
    int patch = 256;
    double test_frac = 0.2;
    std::uint64_t seed = 1;
};

struct TrainArgs {
    std::string data;
    std::string out;
    std::string metrics;
    int epochs = 200;
    int batch = 1;
    std::uint64_t seed = 1;
    double lambda = 100.0;
    double lr = 2e-4;
    int base = 64;
    int dp_layers = 5;
    bool no_spp = false;
    std::string db_loss = "ls";
    std::string dp_loss = "nll";
    int ckpt_every = 0;
    std::string split = "train";
};

struct SynthArgs {
    std::string ckpt;
    std::string scenes;
    std::string mask_dir;
    std::string out;
    int n_per_scene = 1;
    std::uint64_t seed = 1;
    bool full_patch = false;
    std::string h_range = "70:180";
    std::string aspect_range = "0.3:0.45";
    double max_iou = 0.3;
};

struct EvalArgs {
    std::string ckpt;
    std::string data;
    std::string out;
    std::string split = "test";
};

struct ToygenArgs {
    std::string out;
    int scenes = 64;
    std::uint64_t seed = 1;
    int width = 160;
    int height = 96;
    int peds = 1;
    std::string ped_h = "32:52";
};

std::pair<double, double> parse_range(const std::string& s, const char* what) {
    const auto colon = s.find(':');
    if (colon == std::string::npos)
        throw psgan::ConfigError(std::string(what) + ": expected lo:hi, got " + s);
    try {
        return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
    } catch (const std::exception&) {
        throw psgan::ConfigError(std::string(what) + ": expected lo:hi, got " + s);
    }
}

fs::path annotations_path(const std::string& scenes) {
    fs::path p(scenes);
    if (fs::is_directory(p)) return p / "annotations.json";
    return p;
}

int run_prep(const PrepArgs& a) {
    std::vector<psgan::Scene> scenes;
    if (!a.cityscapes.empty()) {
        const auto records = psgan::cityscapes_to_records(a.cityscapes);
        fs::create_directories(a.out);
        psgan::save_annotations(fs::path(a.out) / "converted_annotations.json", records);
        std::fprintf(stderr, "converted %zu ground-truth files; images load from %s\n",
                     records.size(), a.cityscapes.c_str());
        scenes.reserve(records.size());
        for (const auto& rec : records) {
            psgan::Scene s;
            s.image = psgan::read_png(fs::path(a.cityscapes) / rec.image_path);
            s.boxes = rec.boxes;
            s.source_id = rec.image_path;
            s.validate();
            scenes.push_back(std::move(s));
        }
    } else {
        if (a.annotations.empty())
            throw psgan::ConfigError("prep: need --annotations or --cityscapes");
        scenes = psgan::load_scenes(annotations_path(a.annotations));
    }

    if (!a.include_list.empty()) {
        // Curation stand-in: keep only listed scenes ("<image path>") or
        // single boxes ("<image path> <box index>"), one entry per line.
        std::ifstream in(a.include_list);
        if (!in) throw psgan::IoError("cannot open include list " + a.include_list);
        std::map<std::string, std::vector<int>> wanted;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            std::string id;
            ls >> id;
            int box = -1;
            ls >> box;
            wanted[id].push_back(box);
        }
        std::vector<psgan::Scene> curated;
        for (auto& s : scenes) {
            const auto it = wanted.find(s.source_id);
            if (it == wanted.end()) continue;
            if (std::find(it->second.begin(), it->second.end(), -1) == it->second.end()) {
                std::vector<psgan::BBox> keep;
                for (int idx : it->second)
                    if (idx >= 0 && idx < static_cast<int>(s.boxes.size()))
                        keep.push_back(s.boxes[idx]);
                s.boxes = std::move(keep);
            }
            curated.push_back(std::move(s));
        }
        std::fprintf(stderr, "include list kept %zu of %zu scenes\n", curated.size(),
                     scenes.size());
        scenes = std::move(curated);
    }

    std::size_t total = 0, kept = 0;
    for (auto& s : scenes) {
        total += s.boxes.size();
        s.boxes = psgan::filter_boxes(s.boxes, a.min_h, a.min_w);
        kept += s.boxes.size();
    }
    std::fprintf(stderr, "%zu scenes, %zu boxes, %zu after the %dx%d (w x h) filter\n",
                 scenes.size(), total, kept, a.min_w, a.min_h);

    psgan::Rng rng(a.seed);
    const auto pairs = psgan::assemble_dataset(scenes, a.patch, rng);
    if (pairs.empty()) throw psgan::EmptyDataset("prep: no usable pedestrian boxes");

    psgan::Rng split_rng(a.seed ^ 0x5eedULL);
    psgan::save_pairs_dataset(a.out, pairs, a.patch, a.seed, a.test_frac, split_rng);
    std::fprintf(stderr, "wrote %zu pairs to %s\n", pairs.size(), a.out.c_str());
    return 0;
}

int run_train(const TrainArgs& a) {
    psgan::TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.seed = a.seed;
    cfg.lr = a.lr;
    cfg.base_channels = a.base;
    cfg.weights.lambda_l1 = a.lambda;
    cfg.weights.db_kind = a.db_loss == "nll" ? psgan::GanLossKind::log_likelihood
                                             : psgan::GanLossKind::least_squares;
    cfg.weights.dp_kind = a.dp_loss == "ls" ? psgan::GanLossKind::least_squares
                                            : psgan::GanLossKind::log_likelihood;
    cfg.spp_enabled = !a.no_spp;
    cfg.checkpoint_every = a.ckpt_every;
    if (a.dp_layers < 1 || a.dp_layers > 8)
        throw psgan::ConfigError("--dp-layers must be in [1, 8]");
    cfg.dp_channels.clear();
    for (int i = 0; i < a.dp_layers; ++i)
        cfg.dp_channels.push_back(a.base * std::min(1 << i, 8));

    cfg.patch = psgan::dataset_patch_size(a.data);
    cfg.gen_levels = static_cast<int>(std::lround(std::log2(cfg.patch)));

    const auto pairs = psgan::load_pairs_dataset(a.data, a.split);
    std::fprintf(stderr, "training on %zu pairs (split=%s), patch %d, %d epochs\n",
                 pairs.size(), a.split.c_str(), cfg.patch, cfg.epochs);

    const std::string metrics = a.metrics.empty() ? a.out + ".metrics.csv" : a.metrics;
    auto state = psgan::init_train_state(cfg);
    psgan::train(state, pairs, metrics, a.out, [](const psgan::EpochMetrics& em) {
        std::fprintf(stderr,
                     "epoch %4d  db %.4f  dp %.4f  g_adv_db %.4f  g_adv_dp %.4f  g_l1 %.4f\n",
                     em.epoch, em.mean.db_loss, em.mean.dp_loss, em.mean.g_adv_db,
                     em.mean.g_adv_dp, em.mean.g_l1);
    });
    std::fprintf(stderr, "checkpoint: %s\nmetrics: %s\n", a.out.c_str(), metrics.c_str());
    return 0;
}

int run_synth(const SynthArgs& a) {
    auto state = psgan::load_checkpoint(a.ckpt);
    auto scenes = psgan::load_scenes(annotations_path(a.scenes));
    const auto [h_lo, h_hi] = parse_range(a.h_range, "--h-range");
    const auto [as_lo, as_hi] = parse_range(a.aspect_range, "--aspect-range");
    psgan::SizeRange size;
    size.h_min = static_cast<int>(h_lo);
    size.h_max = static_cast<int>(h_hi);
    size.aspect_min = as_lo;
    size.aspect_max = as_hi;

    fs::create_directories(fs::path(a.out) / "images");
    std::vector<psgan::Scene> augmented;
    std::vector<std::string> image_names;
    json manifest_scenes = json::array();

    for (std::size_t i = 0; i < scenes.size(); ++i) {
        psgan::Rng rng = psgan::Rng::substream(a.seed, i);
        psgan::Scene scene = scenes[i];

        std::optional<psgan::Tensorf> mask;
        if (!a.mask_dir.empty()) {
            const auto mask_path =
                fs::path(a.mask_dir) / fs::path(scene.source_id).filename();
            if (fs::exists(mask_path)) mask = psgan::read_png(mask_path);
        }
        const auto boxes = psgan::propose_boxes(scene, mask ? &*mask : nullptr,
                                                a.n_per_scene, size, rng,
                                                static_cast<float>(a.max_iou));
        for (const auto& box : boxes) {
            const auto sp = psgan::synthesize_patch(state.gen, scene, box, rng);
            scene = psgan::composite(scene, sp.patch, sp.offset_x, sp.offset_y, box,
                                     a.full_patch);
        }

        char name[64];
        std::snprintf(name, sizeof(name), "images/synth_%05zu.png", i);
        psgan::write_png(fs::path(a.out) / name, scene.image);
        image_names.emplace_back(name);
        manifest_scenes.push_back({{"image", name},
                                   {"source", scenes[i].source_id},
                                   {"synthesized", boxes.size()}});
        augmented.push_back(std::move(scene));
    }

    psgan::export_annotations(augmented, image_names, fs::path(a.out) / "annotations.json");
    std::ofstream manifest(fs::path(a.out) / "manifest.json");
    manifest << json{{"seed", std::to_string(a.seed)},
                     {"checkpoint", a.ckpt},
                     {"scenes", std::move(manifest_scenes)}}
                    .dump(2)
             << "\n";
    std::fprintf(stderr, "wrote %zu augmented scenes to %s\n", augmented.size(),
                 a.out.c_str());
    return 0;
}

int run_eval(const EvalArgs& a) {
    auto state = psgan::load_checkpoint(a.ckpt);
    const auto pairs = psgan::load_pairs_dataset(a.data, a.split == "all" ? "" : a.split);
    const auto m = psgan::eval_generator(state.gen, pairs, state.dp);

    // Untrained baseline from the same config and seed, for the
    // reconstruction-improvement comparison.
    auto fresh = psgan::init_train_state(state.cfg);
    const auto base = psgan::eval_generator(fresh.gen, pairs, state.dp);

    const json out{{"outside_l1", m.outside_l1},
                   {"inside_l1", m.inside_l1},
                   {"dp_fool_rate", m.dp_fool_rate},
                   {"n_pairs", m.n_pairs},
                   {"untrained_outside_l1", base.outside_l1},
                   {"untrained_inside_l1", base.inside_l1}};
    std::ofstream f(a.out);
    if (!f) throw psgan::IoError("cannot write " + a.out);
    f << out.dump(2) << "\n";
    std::cout << out.dump(2) << "\n";
    return 0;
}

int run_toygen(const ToygenArgs& a) {
    const auto [h_lo, h_hi] = parse_range(a.ped_h, "--ped-h");
    psgan::ToyConfig cfg;
    cfg.width = a.width;
    cfg.height = a.height;
    cfg.n_peds = a.peds;
    cfg.ped_h_min = static_cast<int>(h_lo);
    cfg.ped_h_max = static_cast<int>(h_hi);
    cfg.validate();

    std::vector<psgan::Scene> scenes;
    scenes.reserve(a.scenes);
    for (int i = 0; i < a.scenes; ++i) {
        psgan::Rng rng = psgan::Rng::substream(a.seed, static_cast<std::uint64_t>(i));
        scenes.push_back(psgan::gen_toy_scene(rng, cfg));
        scenes.back().source_id = "toy_" + std::to_string(i);
    }
    psgan::save_scenes(a.out, scenes);
    std::size_t boxes = 0;
    for (const auto& s : scenes) boxes += s.boxes.size();
    std::fprintf(stderr, "wrote %d toy scenes (%zu boxes) to %s\n", a.scenes, boxes,
                 a.out.c_str());
    return 0;
}

// --config file: a flat JSON object whose keys are long option names;
// values become defaults, explicit flags still override.
json load_config_json(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") {
            std::ifstream in(argv[i + 1]);
            if (!in) throw psgan::IoError(std::string("cannot open config ") + argv[i + 1]);
            try {
                json j;
                in >> j;
                return j;
            } catch (const json::exception& e) {
                throw psgan::IoError("bad config JSON: " + std::string(e.what()));
            }
        }
    return json::object();
}

template <typename T>
void from_config(const json& j, const char* key, T& var) {
    if (j.contains(key)) var = j.at(key).get<T>();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pedestrian synthesis pipeline: noise-box inpainting GAN with "
                 "dual discriminators, plus dataset preparation, synthesis and "
                 "annotation export"};
    app.require_subcommand(1);
    app.fallthrough();  // parent options (--config) legal after the subcommand
    std::string config_path;
    app.add_option("--config", config_path, "JSON file with option defaults");

    json cfg;
    try {
        cfg = load_config_json(argc, argv);
    } catch (const psgan::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }

    PrepArgs prep;
    from_config(cfg, "annotations", prep.annotations);
    from_config(cfg, "min-h", prep.min_h);
    from_config(cfg, "min-w", prep.min_w);
    from_config(cfg, "patch", prep.patch);
    from_config(cfg, "test-frac", prep.test_frac);
    auto* prep_cmd = app.add_subcommand("prep", "filter boxes, crop patches, add noise");
    prep_cmd->add_option("--annotations", prep.annotations, "annotation JSON or dataset dir");
    prep_cmd->add_option("--cityscapes", prep.cityscapes,
                         "Cityscapes gtFine directory (polygon adapter input)");
    prep_cmd->add_option("--out", prep.out, "output dataset directory")->required();
    prep_cmd->add_option("--include-list", prep.include_list,
                         "curation file: keep only listed scenes/boxes");
    prep_cmd->add_option("--min-h", prep.min_h, "minimum box height")->capture_default_str();
    prep_cmd->add_option("--min-w", prep.min_w, "minimum box width")->capture_default_str();
    prep_cmd->add_option("--patch", prep.patch, "patch side in pixels")->capture_default_str();
    prep_cmd->add_option("--test-frac", prep.test_frac, "held-out fraction")->capture_default_str();
    prep_cmd->add_option("--seed", prep.seed, "noise + split seed")->capture_default_str();

    TrainArgs tr;
    from_config(cfg, "epochs", tr.epochs);
    from_config(cfg, "batch", tr.batch);
    from_config(cfg, "lambda", tr.lambda);
    from_config(cfg, "lr", tr.lr);
    from_config(cfg, "base", tr.base);
    from_config(cfg, "dp-layers", tr.dp_layers);
    from_config(cfg, "db-loss", tr.db_loss);
    from_config(cfg, "dp-loss", tr.dp_loss);
    auto* train_cmd = app.add_subcommand("train", "alternating GAN training");
    train_cmd->add_option("--data", tr.data, "dataset directory from prep")->required();
    train_cmd->add_option("--out", tr.out, "checkpoint path")->required();
    train_cmd->add_option("--metrics", tr.metrics,
                          "metrics CSV path (default <out>.metrics.csv)");
    train_cmd->add_option("--epochs", tr.epochs, "training epochs")->capture_default_str();
    train_cmd->add_option("--batch", tr.batch, "pairs per optimizer step")->capture_default_str();
    train_cmd->add_option("--seed", tr.seed, "init + shuffle seed")->capture_default_str();
    train_cmd->add_option("--lambda", tr.lambda, "reconstruction weight")->capture_default_str();
    train_cmd->add_option("--lr", tr.lr, "optimizer step size")->capture_default_str();
    train_cmd->add_option("--base", tr.base, "base channel width for all nets")->capture_default_str();
    train_cmd->add_option("--dp-layers", tr.dp_layers,
                          "conv layers in the pedestrian discriminator (small crops need "
                          "fewer so no feature map collapses to a single cell)")
        ->capture_default_str();
    train_cmd->add_flag("--no-spp", tr.no_spp, "replace the pyramid by one global bin");
    train_cmd->add_option("--db-loss", tr.db_loss, "background adversarial loss")->capture_default_str()
        ->check(CLI::IsMember({"ls", "nll"}));
    train_cmd->add_option("--dp-loss", tr.dp_loss, "pedestrian adversarial loss")->capture_default_str()
        ->check(CLI::IsMember({"ls", "nll"}));
    train_cmd->add_option("--ckpt-every", tr.ckpt_every, "checkpoint period in epochs")->capture_default_str();
    train_cmd->add_option("--split", tr.split, "dataset split to train on")->capture_default_str();

    SynthArgs sy;
    from_config(cfg, "n-per-scene", sy.n_per_scene);
    from_config(cfg, "h-range", sy.h_range);
    from_config(cfg, "aspect-range", sy.aspect_range);
    from_config(cfg, "max-iou", sy.max_iou);
    auto* synth_cmd =
        app.add_subcommand("synth", "place noise boxes and synthesize pedestrians");
    synth_cmd->add_option("--ckpt", sy.ckpt, "trained checkpoint")->required();
    synth_cmd->add_option("--scenes", sy.scenes, "scene annotation JSON or directory")
        ->required();
    synth_cmd->add_option("--mask", sy.mask_dir, "placement mask directory (white = allowed)");
    synth_cmd->add_option("--out", sy.out, "output directory")->required();
    synth_cmd->add_option("--n-per-scene", sy.n_per_scene, "boxes per scene")->capture_default_str();
    synth_cmd->add_option("--seed", sy.seed, "placement + noise seed")->capture_default_str();
    synth_cmd->add_flag("--full-patch", sy.full_patch,
                        "paste the whole generated patch instead of the box interior");
    synth_cmd->add_option("--h-range", sy.h_range, "box height range lo:hi")->capture_default_str();
    synth_cmd->add_option("--aspect-range", sy.aspect_range, "box aspect range lo:hi")->capture_default_str();
    synth_cmd->add_option("--max-iou", sy.max_iou, "overlap rejection threshold")->capture_default_str();

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "generator quality metrics");
    eval_cmd->add_option("--ckpt", ev.ckpt, "trained checkpoint")->required();
    eval_cmd->add_option("--data", ev.data, "dataset directory from prep")->required();
    eval_cmd->add_option("--out", ev.out, "metrics JSON path")->required();
    eval_cmd->add_option("--split", ev.split, "train|test|all")->capture_default_str();

    ToygenArgs tg;
    from_config(cfg, "scenes", tg.scenes);
    from_config(cfg, "width", tg.width);
    from_config(cfg, "height", tg.height);
    from_config(cfg, "peds", tg.peds);
    from_config(cfg, "ped-h", tg.ped_h);
    auto* toy_cmd = app.add_subcommand("toygen", "procedural toy street scenes");
    toy_cmd->add_option("--out", tg.out, "output dataset directory")->required();
    toy_cmd->add_option("--scenes", tg.scenes, "number of scenes")->capture_default_str();
    toy_cmd->add_option("--seed", tg.seed, "generation seed")->capture_default_str();
    toy_cmd->add_option("--width", tg.width, "scene width")->capture_default_str();
    toy_cmd->add_option("--height", tg.height, "scene height")->capture_default_str();
    toy_cmd->add_option("--peds", tg.peds, "pedestrians per scene")->capture_default_str();
    toy_cmd->add_option("--ped-h", tg.ped_h, "pedestrian height range lo:hi")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // help requests exit 0; every other parse problem is a usage error
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (prep_cmd->parsed()) return run_prep(prep);
        if (train_cmd->parsed()) return run_train(tr);
        if (synth_cmd->parsed()) return run_synth(sy);
        if (eval_cmd->parsed()) return run_eval(ev);
        if (toy_cmd->parsed()) return run_toygen(tg);
    } catch (const psgan::NanDetected& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    } catch (const psgan::ConfigError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const psgan::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
