#include "psgan/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "psgan/errors.hpp"

namespace psgan {

using nlohmann::json;

GeneratorConfig TrainConfig::generator_config() const {
    GeneratorConfig g;
    g.levels = gen_levels;
    g.base_channels = base_channels;
    return g;
}

DbConfig TrainConfig::db_config() const {
    DbConfig c;
    if (!db_channels.empty())
        c.layer_channels = db_channels;
    else
        c.layer_channels = {base_channels, 2 * base_channels, 4 * base_channels,
                            8 * base_channels};
    return c;
}

DpConfig TrainConfig::dp_config() const {
    DpConfig c;
    if (!dp_channels.empty())
        c.layer_channels = dp_channels;
    else
        c.layer_channels = {base_channels, 2 * base_channels, 4 * base_channels,
                            8 * base_channels, 8 * base_channels};
    c.spp_enabled = spp_enabled;
    return c;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
    weights.validate();
    generator_config().validate(patch);
}

TrainState init_train_state(const TrainConfig& cfg) {
    cfg.validate();
    TrainState st;
    st.cfg = cfg;
    st.gen = nn::UNetGenerator<float>(cfg.generator_config());
    st.db = nn::BackgroundDiscriminator<float>(cfg.db_config());
    st.dp = nn::PedestrianDiscriminator<float>(cfg.dp_config());
    st.rng = Rng(cfg.seed);
    st.gen.init(st.rng);
    st.db.init(st.rng);
    st.dp.init(st.rng);
    st.opt_gen = Adam<float>(cfg.lr, cfg.beta1, cfg.beta2);
    st.opt_db = Adam<float>(cfg.lr, cfg.beta1, cfg.beta2);
    st.opt_dp = Adam<float>(cfg.lr, cfg.beta1, cfg.beta2);
    st.opt_gen.shape_to(st.gen.params());
    st.opt_db.shape_to(st.db.params());
    st.opt_dp.shape_to(st.dp.params());
    return st;
}

namespace {

// Loss of one discriminator pass plus the gradient w.r.t. the raw network
// output, `scale`-weighted for batch averaging. `is_prob` marks outputs
// that are already probabilities (the pedestrian head); otherwise the
// log-likelihood kind squashes the raw score first.
double d_side_loss(const Tensorf& score, bool as_real, GanLossKind kind,
                   bool is_prob, float scale, Tensorf& dscore) {
    if (kind == GanLossKind::least_squares) {
        const float target = as_real ? 1.0f : 0.0f;
        const double v = loss::mse_vs(score, target);
        loss::mse_vs_grad(score, target, scale, dscore);
        return v;
    }
    Tensorf p = score;
    if (!is_prob)
        for (std::size_t i = 0; i < p.numel(); ++i)
            p[i] = 1.0f / (1.0f + std::exp(-p[i]));
    double v;
    Tensorf dp;
    if (as_real) {
        v = loss::nll_accept(p);
        loss::nll_accept_grad(p, scale, dp);
    } else {
        v = loss::nll_reject(p);
        loss::nll_reject_grad(p, scale, dp);
    }
    if (is_prob) {
        dscore = std::move(dp);
    } else {
        dscore = Tensorf(score.shape());
        for (std::size_t i = 0; i < p.numel(); ++i)
            dscore[i] = dp[i] * p[i] * (1.0f - p[i]);
    }
    return v;
}

// Generator-side adversarial loss (non-saturating forms) and gradient.
double g_side_loss(const Tensorf& score, GanLossKind kind, bool is_prob,
                   float scale, Tensorf& dscore) {
    if (kind == GanLossKind::least_squares) {
        const double v = loss::mse_vs(score, 1.0f);
        loss::mse_vs_grad(score, 1.0f, scale, dscore);
        return v;
    }
    Tensorf p = score;
    if (!is_prob)
        for (std::size_t i = 0; i < p.numel(); ++i)
            p[i] = 1.0f / (1.0f + std::exp(-p[i]));
    const double v = loss::nll_accept(p);
    Tensorf dp;
    loss::nll_accept_grad(p, scale, dp);
    if (is_prob) {
        dscore = std::move(dp);
    } else {
        dscore = Tensorf(score.shape());
        for (std::size_t i = 0; i < p.numel(); ++i)
            dscore[i] = dp[i] * p[i] * (1.0f - p[i]);
    }
    return v;
}

void scatter_add_box(Tensorf& dst, const Tensorf& src, const BBox& box) {
    for (int c = 0; c < src.dim(0); ++c)
        for (int r = 0; r < src.dim(1); ++r)
            for (int col = 0; col < src.dim(2); ++col)
                dst.at(c, box.y + r, box.x + col) += src.at(c, r, col);
}

void check_finite(double v, const char* component) {
    if (!std::isfinite(v))
        throw NanDetected(std::string("non-finite loss component: ") + component);
}

void check_output_finite(const Tensorf& t, const char* component) {
    if (!t.all_finite())
        throw NanDetected(std::string("non-finite values in ") + component);
}

template <typename Net>
void check_params_finite(Net& net, const char* name) {
    for (const auto& p : net.params())
        if (!p.value->all_finite())
            throw NanDetected(std::string(name) + " parameter " + p.name +
                              " is non-finite");
}

}  // namespace

StepMetrics train_step(TrainState& st, std::span<const PatchPair> batch) {
    if (batch.empty()) throw EmptyDataset("train_step: empty batch");
    const float inv_b = 1.0f / static_cast<float>(batch.size());
    const GanLossKind db_kind = st.cfg.weights.db_kind;
    const GanLossKind dp_kind = st.cfg.weights.dp_kind;
    StepMetrics m;

    for (const PatchPair& pair : batch) {
        const int P = st.cfg.patch;
        pair.x_noisy.require_shape({3, P, P}, "train_step x_noisy");
        pair.y_truth.require_shape({3, P, P}, "train_step y_truth");
        if (!pair.z_box.valid_within(P, P))
            throw InvalidBox("train_step: noise box escapes patch");
    }

    // Background discriminator on (noise image, candidate) stacks: the real
    // pair is (x, y), the fake pair is (x, G(x)).
    std::vector<Tensorf> fakes(batch.size());
    st.db.zero_grad();
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const PatchPair& pair = batch[i];
        Tensorf dmap;
        Tensorf map_real = st.db.forward(concat_channels(pair.x_noisy, pair.y_truth), true);
        m.db_loss += d_side_loss(map_real, true, db_kind, false, inv_b, dmap) * inv_b;
        st.db.backward(dmap);
        fakes[i] = st.gen.forward(pair.x_noisy, true);
        check_output_finite(fakes[i], "generator output");
        Tensorf map_fake = st.db.forward(concat_channels(pair.x_noisy, fakes[i]), true);
        check_output_finite(map_fake, "background discriminator score map");
        m.db_loss += d_side_loss(map_fake, false, db_kind, false, inv_b, dmap) * inv_b;
        st.db.backward(dmap);
    }
    st.opt_db.step(st.db.params());

    // Pedestrian discriminator on crops at the noise box.
    st.dp.zero_grad();
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const PatchPair& pair = batch[i];
        Tensorf dprob;
        Tensorf p_real = st.dp.forward(crop_region(pair.y_truth, pair.z_box), true);
        check_output_finite(p_real, "pedestrian discriminator probability");
        m.dp_loss += d_side_loss(p_real, true, dp_kind, true, inv_b, dprob) * inv_b;
        st.dp.backward(dprob);
        Tensorf p_fake = st.dp.forward(crop_region(fakes[i], pair.z_box), true);
        check_output_finite(p_fake, "pedestrian discriminator probability");
        m.dp_loss += d_side_loss(p_fake, false, dp_kind, true, inv_b, dprob) * inv_b;
        st.dp.backward(dprob);
    }
    st.opt_dp.step(st.dp.params());

    // Generator, with discriminator scores recomputed after their updates.
    st.gen.zero_grad();
    for (const PatchPair& pair : batch) {
        Tensorf fake = st.gen.forward(pair.x_noisy, true);
        check_output_finite(fake, "generator output");

        Tensorf dmap;
        Tensorf map = st.db.forward(concat_channels(pair.x_noisy, fake), true);
        const double adv_db = g_side_loss(map, db_kind, false, inv_b, dmap);
        Tensorf dpair = st.db.backward(dmap, /*param_grads=*/false);
        Tensorf dfake = split_channels(dpair, 3).second;

        Tensorf dprob;
        Tensorf prob = st.dp.forward(crop_region(fake, pair.z_box), true);
        check_output_finite(prob, "pedestrian discriminator probability");
        const double adv_dp = g_side_loss(prob, dp_kind, true, inv_b, dprob);
        Tensorf dcrop = st.dp.backward(dprob, /*param_grads=*/false);
        scatter_add_box(dfake, dcrop, pair.z_box);

        const double l1 = loss::l1_loss(fake, pair.y_truth);
        Tensorf dl1;
        loss::l1_loss_grad(fake, pair.y_truth, dl1);
        const float lw = static_cast<float>(st.cfg.weights.lambda_l1) * inv_b;
        for (std::size_t j = 0; j < dfake.numel(); ++j) dfake[j] += lw * dl1[j];

        st.gen.backward(dfake);
        m.g_adv_db += adv_db * inv_b;
        m.g_adv_dp += adv_dp * inv_b;
        m.g_l1 += l1 * inv_b;
    }
    st.opt_gen.step(st.gen.params());
    m.g_total = loss::total_g_loss(m.g_adv_db, m.g_adv_dp, m.g_l1, st.cfg.weights);

    check_finite(m.db_loss, "db_loss");
    check_finite(m.dp_loss, "dp_loss");
    check_finite(m.g_adv_db, "g_adv_db");
    check_finite(m.g_adv_dp, "g_adv_dp");
    check_finite(m.g_l1, "g_l1");
    check_params_finite(st.gen, "generator");
    check_params_finite(st.db, "background discriminator");
    check_params_finite(st.dp, "pedestrian discriminator");

    ++st.step;
    return m;
}

StepMetrics train_step(TrainState& st, const PatchPair& pair) {
    return train_step(st, std::span<const PatchPair>(&pair, 1));
}

namespace {

class MetricsCsv {
public:
    explicit MetricsCsv(const std::string& path) {
        if (path.empty()) return;
        out_.open(path);
        if (!out_) throw IoError("cannot write metrics CSV " + path);
        out_ << "epoch,step,db_loss,dp_loss,g_adv_db,g_adv_dp,g_l1,g_total\n";
    }

    void row(long long epoch, long long step, const StepMetrics& m) {
        if (!out_.is_open()) return;
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%lld,%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                      epoch, step, m.db_loss, m.dp_loss, m.g_adv_db, m.g_adv_dp,
                      m.g_l1, m.g_total);
        out_ << buf;
    }

private:
    std::ofstream out_;
};

void accumulate(StepMetrics& acc, const StepMetrics& m) {
    acc.db_loss += m.db_loss;
    acc.dp_loss += m.dp_loss;
    acc.g_adv_db += m.g_adv_db;
    acc.g_adv_dp += m.g_adv_dp;
    acc.g_l1 += m.g_l1;
    acc.g_total += m.g_total;
}

void scale(StepMetrics& m, double s) {
    m.db_loss *= s;
    m.dp_loss *= s;
    m.g_adv_db *= s;
    m.g_adv_dp *= s;
    m.g_l1 *= s;
    m.g_total *= s;
}

}  // namespace

std::vector<EpochMetrics> train(TrainState& st, const std::vector<PatchPair>& pairs,
                                const std::string& metrics_path,
                                const std::string& checkpoint_path,
                                const std::function<void(const EpochMetrics&)>& on_epoch) {
    if (pairs.empty()) throw EmptyDataset("train: no pairs");
    st.cfg.validate();
    const int min_side = st.dp.cfg.min_input;
    for (const PatchPair& p : pairs)
        if (p.z_box.h < min_side || p.z_box.w < min_side)
            throw CropTooSmall("train: noise box " + std::to_string(p.z_box.w) + "x" +
                               std::to_string(p.z_box.h) + " below discriminator minimum " +
                               std::to_string(min_side));

    MetricsCsv csv(metrics_path);
    std::vector<EpochMetrics> log;
    std::vector<int> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);

    const int b = st.cfg.batch_size;
    for (long long e = st.epoch + 1; e <= st.cfg.epochs; ++e) {
        st.rng.shuffle(order.begin(), order.end());
        StepMetrics epoch_acc;
        int steps_in_epoch = 0;
        for (std::size_t at = 0; at < order.size(); at += b) {
            StepMetrics m;
            const std::size_t take = std::min<std::size_t>(b, order.size() - at);
            if (take == 1) {
                m = train_step(st, pairs[order[at]]);
            } else {
                std::vector<PatchPair> chunk(take);
                for (std::size_t i = 0; i < take; ++i) chunk[i] = pairs[order[at + i]];
                m = train_step(st, std::span<const PatchPair>(chunk));
            }
            csv.row(e, st.step, m);
            accumulate(epoch_acc, m);
            ++steps_in_epoch;
        }
        st.epoch = e;
        scale(epoch_acc, 1.0 / steps_in_epoch);
        EpochMetrics em{static_cast<int>(e), epoch_acc};
        log.push_back(em);
        if (on_epoch) on_epoch(em);
        if (!checkpoint_path.empty() && st.cfg.checkpoint_every > 0 &&
            e % st.cfg.checkpoint_every == 0 && e != st.cfg.epochs)
            save_checkpoint(st, checkpoint_path);
    }
    if (!checkpoint_path.empty()) save_checkpoint(st, checkpoint_path);
    return log;
}

std::vector<EpochMetrics> train(const TrainConfig& cfg, const std::vector<PatchPair>& pairs,
                                TrainState& out_state, const std::string& metrics_path,
                                const std::string& checkpoint_path) {
    out_state = init_train_state(cfg);
    return train(out_state, pairs, metrics_path, checkpoint_path);
}

// ---------------------------------------------------------------------------
// Checkpoint container

namespace {

constexpr char kMagic[5] = {'P', 'S', 'G', 'N', '1'};

json config_to_json(const TrainConfig& c) {
    return json{{"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"lr", c.lr},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"seed", std::to_string(c.seed)},
                {"lambda_l1", c.weights.lambda_l1},
                {"db_loss", c.weights.db_kind == GanLossKind::least_squares ? "ls" : "nll"},
                {"dp_loss", c.weights.dp_kind == GanLossKind::least_squares ? "ls" : "nll"},
                {"spp_enabled", c.spp_enabled},
                {"patch", c.patch},
                {"gen_levels", c.gen_levels},
                {"base_channels", c.base_channels},
                {"db_channels", c.db_channels},
                {"dp_channels", c.dp_channels},
                {"checkpoint_every", c.checkpoint_every}};
}

GanLossKind kind_from_string(const std::string& s) {
    if (s == "ls") return GanLossKind::least_squares;
    if (s == "nll") return GanLossKind::log_likelihood;
    throw ConfigError("unknown GAN loss kind: " + s + " (want ls|nll)");
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.lr = j.at("lr").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    const json& seed = j.at("seed");
    c.seed = seed.is_string() ? std::stoull(seed.get<std::string>())
                              : seed.get<std::uint64_t>();
    c.weights.lambda_l1 = j.at("lambda_l1").get<double>();
    c.weights.db_kind = kind_from_string(j.at("db_loss").get<std::string>());
    c.weights.dp_kind = kind_from_string(j.at("dp_loss").get<std::string>());
    c.spp_enabled = j.at("spp_enabled").get<bool>();
    c.patch = j.at("patch").get<int>();
    c.gen_levels = j.at("gen_levels").get<int>();
    c.base_channels = j.at("base_channels").get<int>();
    c.db_channels = j.at("db_channels").get<std::vector<int>>();
    c.dp_channels = j.at("dp_channels").get<std::vector<int>>();
    c.checkpoint_every = j.at("checkpoint_every").get<int>();
    return c;
}

struct NamedTensor {
    std::string name;
    Tensor<float>* t;
};

// Fixed enumeration order; checkpoints store and restore tensors in exactly
// this sequence so round-trips are byte-identical.
std::vector<NamedTensor> state_tensor_list(TrainState& st) {
    std::vector<NamedTensor> out;
    auto add_params = [&out](const std::string& net, auto refs) {
        for (auto& r : refs) out.push_back({net + "." + r.name, r.value});
    };
    auto add_buffers = [&out](const std::string& net, auto refs) {
        for (auto& r : refs) out.push_back({net + "." + r.name, r.value});
    };
    add_params("gen", st.gen.params());
    add_buffers("gen", st.gen.buffers());
    add_params("db", st.db.params());
    add_buffers("db", st.db.buffers());
    add_params("dp", st.dp.params());
    add_buffers("dp", st.dp.buffers());

    auto add_moments = [&out](const std::string& net, auto refs, Adam<float>& opt) {
        auto& m = opt.moments1();
        auto& v = opt.moments2();
        for (std::size_t i = 0; i < refs.size(); ++i) {
            out.push_back({"opt." + net + "." + refs[i].name + ".m", &m[i]});
            out.push_back({"opt." + net + "." + refs[i].name + ".v", &v[i]});
        }
    };
    add_moments("gen", st.gen.params(), st.opt_gen);
    add_moments("db", st.db.params(), st.opt_db);
    add_moments("dp", st.dp.params(), st.opt_dp);
    return out;
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
    TrainState& st = const_cast<TrainState&>(state);  // enumeration only
    auto tensors = state_tensor_list(st);

    json dir = json::array();
    std::uint64_t offset = 0;
    for (const auto& nt : tensors) {
        dir.push_back({{"name", nt.name},
                       {"shape", nt.t->shape()},
                       {"offset", offset}});
        offset += nt.t->numel() * sizeof(float);
    }
    json rng = json::array();
    for (std::uint64_t w : st.rng.state()) rng.push_back(std::to_string(w));
    const json header{{"version", 1},
                      {"epoch", st.epoch},
                      {"step", st.step},
                      {"rng", std::move(rng)},
                      {"config", config_to_json(st.cfg)},
                      {"opt_steps",
                       {{"gen", st.opt_gen.step_count()},
                        {"db", st.opt_db.step_count()},
                        {"dp", st.opt_dp.step_count()}}},
                      {"tensors", std::move(dir)}};
    const std::string header_str = header.dump();

    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write checkpoint " + path.string());
        out.write(kMagic, 5);
        const std::uint64_t hlen = header_str.size();
        out.write(reinterpret_cast<const char*>(&hlen), 8);
        out.write(header_str.data(), static_cast<std::streamsize>(hlen));
        for (const auto& nt : tensors)
            out.write(reinterpret_cast<const char*>(nt.t->data()),
                      static_cast<std::streamsize>(nt.t->numel() * sizeof(float)));
        if (!out) throw IoError("short write on checkpoint " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    const std::uint64_t file_size = std::filesystem::file_size(path);

    char magic[5];
    std::uint64_t hlen = 0;
    if (!in.read(magic, 5) || std::memcmp(magic, kMagic, 5) != 0)
        throw CorruptCheckpoint("bad magic in " + path.string());
    if (!in.read(reinterpret_cast<char*>(&hlen), 8) || 13 + hlen > file_size)
        throw CorruptCheckpoint("truncated header in " + path.string());

    std::string header_str(hlen, '\0');
    if (!in.read(header_str.data(), static_cast<std::streamsize>(hlen)))
        throw CorruptCheckpoint("truncated header in " + path.string());
    json header;
    try {
        header = json::parse(header_str);
    } catch (const json::exception& e) {
        throw CorruptCheckpoint("bad header JSON: " + std::string(e.what()));
    }
    if (header.value("version", -1) != 1)
        throw CorruptCheckpoint("unsupported version " +
                                std::to_string(header.value("version", -1)));

    TrainConfig cfg;
    TrainState st;
    try {
        cfg = config_from_json(header.at("config"));
        st.cfg = cfg;
        st.gen = nn::UNetGenerator<float>(cfg.generator_config());
        st.db = nn::BackgroundDiscriminator<float>(cfg.db_config());
        st.dp = nn::PedestrianDiscriminator<float>(cfg.dp_config());
        st.opt_gen = Adam<float>(cfg.lr, cfg.beta1, cfg.beta2);
        st.opt_db = Adam<float>(cfg.lr, cfg.beta1, cfg.beta2);
        st.opt_dp = Adam<float>(cfg.lr, cfg.beta1, cfg.beta2);
        st.opt_gen.shape_to(st.gen.params());
        st.opt_db.shape_to(st.db.params());
        st.opt_dp.shape_to(st.dp.params());
        st.opt_gen.set_step_count(header.at("opt_steps").at("gen").get<long long>());
        st.opt_db.set_step_count(header.at("opt_steps").at("db").get<long long>());
        st.opt_dp.set_step_count(header.at("opt_steps").at("dp").get<long long>());
        st.epoch = header.at("epoch").get<long long>();
        st.step = header.at("step").get<long long>();
        std::array<std::uint64_t, 4> rng_state{};
        const json& rng = header.at("rng");
        if (rng.size() != 4) throw CorruptCheckpoint("bad rng state");
        for (int i = 0; i < 4; ++i) rng_state[i] = std::stoull(rng[i].get<std::string>());
        st.rng.set_state(rng_state);
    } catch (const json::exception& e) {
        throw CorruptCheckpoint("bad header fields: " + std::string(e.what()));
    }

    auto tensors = state_tensor_list(st);
    const json& dir = header.at("tensors");
    if (dir.size() != tensors.size())
        throw CorruptCheckpoint("tensor directory size mismatch");
    std::uint64_t payload = 0;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const json& e = dir[i];
        if (e.at("name").get<std::string>() != tensors[i].name)
            throw CorruptCheckpoint("tensor name mismatch at index " + std::to_string(i));
        if (e.at("shape").get<std::vector<int>>() != tensors[i].t->shape())
            throw CorruptCheckpoint("tensor shape mismatch for " + tensors[i].name);
        if (e.at("offset").get<std::uint64_t>() != payload)
            throw CorruptCheckpoint("tensor offset mismatch for " + tensors[i].name);
        payload += tensors[i].t->numel() * sizeof(float);
    }
    if (13 + hlen + payload != file_size)
        throw CorruptCheckpoint("payload size mismatch in " + path.string() +
                                " (file truncated or padded)");
    for (auto& nt : tensors)
        if (!in.read(reinterpret_cast<char*>(nt.t->data()),
                     static_cast<std::streamsize>(nt.t->numel() * sizeof(float))))
            throw CorruptCheckpoint("truncated payload at " + nt.name);
    return st;
}

}  // namespace psgan
