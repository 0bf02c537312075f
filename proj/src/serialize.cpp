#include "desate/serialize.hpp"

#include <fstream>
#include <string>

#include "desate/error.hpp"

namespace desate {

namespace {

template <typename T>
T get(const Json& j, const char* key, const char* where) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string(where) + ": key '" + key + "' has the wrong type");
    }
}

template <typename T>
void read(const Json& j, const char* key, T& out, const char* where) {
    if (j.contains(key)) out = get<T>(j, key, where);
}

void read_size(const Json& j, const char* key, std::size_t& out, const char* where) {
    if (!j.contains(key)) return;
    const Json& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError(std::string(where) + ": key '" + key + "' must be a nonnegative integer");
    out = v.get<std::size_t>();
}

}  // namespace

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const char* where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) {
            std::string msg = std::string(where) + ": unknown key '" + key + "' (allowed:";
            for (const char* a : allowed) msg += std::string(" ") + a;
            throw ConfigError(msg + ")");
        }
    }
}

Json to_json(const NoiseSpec& s) {
    return Json{{"family", std::string(to_string(s.family))},
                {"level", s.level},
                {"mu", s.mu},
                {"sigma", s.sigma},
                {"gamma", s.gamma},
                {"lambda", s.lambda},
                {"a", s.a},
                {"b", s.b},
                {"seed", s.seed}};
}

NoiseSpec noise_from_json(const Json& j, const NoiseSpec& defaults) {
    constexpr const char* where = "noise";
    check_keys(j, {"family", "level", "mu", "sigma", "gamma", "lambda", "a", "b", "seed"}, where);
    NoiseSpec s = defaults;
    if (j.contains("family")) s.family = parse_noise_family(get<std::string>(j, "family", where));
    read(j, "lambda", s.lambda, where);
    read(j, "seed", s.seed, where);
    // A level re-derives the family parameters; explicit parameters win over it.
    if (j.contains("level") || j.contains("family")) {
        double level = s.level;
        read(j, "level", level, where);
        s = NoiseSpec::at_level(s.family, level, s.seed, s.lambda);
    }
    read(j, "mu", s.mu, where);
    read(j, "sigma", s.sigma, where);
    read(j, "gamma", s.gamma, where);
    read(j, "a", s.a, where);
    read(j, "b", s.b, where);
    return s;
}

Json to_json(const WaveletConfig& c) {
    return Json{{"family", std::string(to_string(c.family))},
                {"levels", c.levels},
                {"mode", std::string(to_string(c.mode))},
                {"epsilon", c.epsilon},
                {"boundary", std::string(to_string(c.boundary))}};
}

WaveletConfig wavelet_from_json(const Json& j, const WaveletConfig& defaults) {
    constexpr const char* where = "wavelet";
    check_keys(j, {"family", "levels", "mode", "epsilon", "boundary"}, where);
    WaveletConfig c = defaults;
    if (j.contains("family")) c.family = parse_wavelet_family(get<std::string>(j, "family", where));
    read(j, "levels", c.levels, where);
    if (j.contains("mode")) c.mode = parse_threshold_mode(get<std::string>(j, "mode", where));
    read(j, "epsilon", c.epsilon, where);
    if (j.contains("boundary")) c.boundary = parse_boundary_mode(get<std::string>(j, "boundary", where));
    return c;
}

Json to_json(const EncoderConfig& c) {
    return Json{{"d_model", c.d_model},
                {"heads", c.heads},
                {"layers", c.layers},
                {"ffn_hidden", c.ffn_hidden},
                {"dropout", c.dropout},
                {"max_len", c.max_len},
                {"positional_encoding", c.positional_encoding},
                {"residual_norm", c.residual_norm}};
}

EncoderConfig encoder_from_json(const Json& j, const EncoderConfig& defaults) {
    constexpr const char* where = "encoder";
    check_keys(j,
               {"hidden", "d_model", "heads", "layers", "ffn_hidden", "dropout", "max_len", "positional_encoding",
                "residual_norm"},
               where);
    EncoderConfig c = defaults;
    std::size_t hidden = 0;
    read_size(j, "hidden", hidden, where);
    if (hidden > 0) c.d_model = c.ffn_hidden = hidden;
    read_size(j, "d_model", c.d_model, where);
    read_size(j, "heads", c.heads, where);
    read_size(j, "layers", c.layers, where);
    read_size(j, "ffn_hidden", c.ffn_hidden, where);
    read(j, "dropout", c.dropout, where);
    read_size(j, "max_len", c.max_len, where);
    read(j, "positional_encoding", c.positional_encoding, where);
    read(j, "residual_norm", c.residual_norm, where);
    return c;
}

Json to_json(const TrainConfig& c) {
    Json j{{"delta", c.delta},
           {"alpha", c.alpha},
           {"lr", c.lr},
           {"epochs", c.epochs},
           {"seed", c.seed},
           {"window", c.window},
           {"stride", c.stride},
           {"schedule", std::string(to_string(c.schedule))},
           {"pretrain_epochs", c.pretrain_epochs},
           {"dae_target", c.dae_literal_target ? "corrupted" : "clean"}};
    j["T"] = c.T ? Json(*c.T) : Json(nullptr);
    return j;
}

TrainConfig train_from_json(const Json& j, const TrainConfig& defaults) {
    constexpr const char* where = "train";
    check_keys(j,
               {"delta", "alpha", "lr", "epochs", "T", "seed", "window", "stride", "schedule", "pretrain_epochs",
                "dae_target"},
               where);
    TrainConfig c = defaults;
    read(j, "delta", c.delta, where);
    read(j, "alpha", c.alpha, where);
    read(j, "lr", c.lr, where);
    read(j, "epochs", c.epochs, where);
    if (j.contains("T")) {
        if (j.at("T").is_null()) {
            c.T.reset();
        } else {
            std::size_t t = 0;
            read_size(j, "T", t, where);
            c.T = t;
        }
    }
    read(j, "seed", c.seed, where);
    read_size(j, "window", c.window, where);
    read_size(j, "stride", c.stride, where);
    if (j.contains("schedule")) c.schedule = parse_schedule(get<std::string>(j, "schedule", where));
    read(j, "pretrain_epochs", c.pretrain_epochs, where);
    if (j.contains("dae_target")) {
        const auto t = get<std::string>(j, "dae_target", where);
        if (t != "clean" && t != "corrupted")
            throw ConfigError("train: dae_target must be 'clean' or 'corrupted', got '" + t + "'");
        c.dae_literal_target = t == "corrupted";
    }
    return c;
}

Json to_json(const BranchConfig& b) {
    return Json{{"id", b.id},
                {"noise", to_json(b.noise)},
                {"denoiser", std::string(to_string(b.denoiser))},
                {"dae", Json{{"hidden", b.dae_hidden}}},
                {"wavelet", to_json(b.wavelet)},
                {"encoder", to_json(b.encoder)},
                {"train", to_json(b.train)}};
}

BranchConfig branch_from_json(const Json& j, const BranchConfig& defaults) {
    constexpr const char* where = "branch";
    check_keys(j, {"id", "noise", "denoiser", "dae", "wavelet", "encoder", "train"}, where);
    BranchConfig b = defaults;
    read(j, "id", b.id, where);
    if (j.contains("noise")) b.noise = noise_from_json(j.at("noise"), b.noise);
    if (j.contains("wavelet")) b.wavelet = wavelet_from_json(j.at("wavelet"), b.wavelet);
    if (j.contains("denoiser")) apply_denoiser_label(b, get<std::string>(j, "denoiser", where));
    if (j.contains("dae")) {
        check_keys(j.at("dae"), {"hidden"}, "branch.dae");
        read_size(j.at("dae"), "hidden", b.dae_hidden, "branch.dae");
    }
    if (j.contains("encoder")) b.encoder = encoder_from_json(j.at("encoder"), b.encoder);
    if (j.contains("train")) b.train = train_from_json(j.at("train"), b.train);
    return b;
}

Json to_json(const GridSpec& g) {
    Json fam = Json::array();
    for (auto f : g.families) fam.push_back(std::string(to_string(f)));
    return Json{{"lr", g.lr},         {"layers", g.layers}, {"hidden", g.hidden},       {"noise_levels", g.noise_levels},
                {"alpha", g.alpha},   {"delta", g.delta},   {"families", fam},          {"denoisers", g.denoisers},
                {"repeats", g.repeats}};
}

GridSpec grid_from_json(const Json& j, const GridSpec& defaults) {
    constexpr const char* where = "grid";
    check_keys(j, {"lr", "layers", "hidden", "noise_levels", "alpha", "delta", "families", "denoisers", "repeats"},
               where);
    GridSpec g = defaults;
    read(j, "lr", g.lr, where);
    read(j, "layers", g.layers, where);
    read(j, "hidden", g.hidden, where);
    read(j, "noise_levels", g.noise_levels, where);
    read(j, "alpha", g.alpha, where);
    read(j, "delta", g.delta, where);
    if (j.contains("families")) {
        g.families.clear();
        for (const auto& name : get<std::vector<std::string>>(j, "families", where))
            g.families.push_back(parse_noise_family(name));
    }
    read(j, "denoisers", g.denoisers, where);
    read(j, "repeats", g.repeats, where);
    return g;
}

Json tensor_to_json(const Tensor& t) {
    return Json{{"shape", {t.rows(), t.cols()}}, {"values", std::vector<double>(t.values().begin(), t.values().end())}};
}

Tensor tensor_from_json(const Json& j, bool requires_grad) {
    try {
        const auto shape = j.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 2) throw ConfigError("tensor shape must have two dimensions");
        return Tensor::from(shape[0], shape[1], j.at("values").get<std::vector<double>>(), requires_grad);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed tensor: ") + e.what());
    } catch (const DimensionError& e) {
        throw ConfigError(std::string("malformed tensor: ") + e.what());
    }
}

namespace {

constexpr const char* kLayerNames[] = {"Wq", "Wk",       "Wv",       "Wo",       "W1",       "b1",
                                       "W2", "b2",       "ln1_gain", "ln1_bias", "ln2_gain", "ln2_bias"};

Tensor EncoderLayer::*layer_member(std::size_t i) {
    static Tensor EncoderLayer::*const members[] = {
        &EncoderLayer::Wq, &EncoderLayer::Wk,       &EncoderLayer::Wv,       &EncoderLayer::Wo,
        &EncoderLayer::W1, &EncoderLayer::b1,       &EncoderLayer::W2,       &EncoderLayer::b2,
        &EncoderLayer::ln1_gain, &EncoderLayer::ln1_bias, &EncoderLayer::ln2_gain, &EncoderLayer::ln2_bias};
    return members[i];
}

}  // namespace

Json checkpoint_to_json(const TrainedBranch& b) {
    Json tensors = Json::object();
    if (b.dae) {
        tensors["dae.W"] = tensor_to_json(b.dae->W);
        tensors["dae.b"] = tensor_to_json(b.dae->b);
        tensors["dae.W0"] = tensor_to_json(b.dae->W0);
        tensors["dae.b0"] = tensor_to_json(b.dae->b0);
    }
    const EncoderModel& e = b.encoder;
    tensors["encoder.embed_w"] = tensor_to_json(e.embed_w);
    tensors["encoder.embed_b"] = tensor_to_json(e.embed_b);
    for (std::size_t l = 0; l < e.layers.size(); ++l)
        for (std::size_t i = 0; i < std::size(kLayerNames); ++i)
            tensors["encoder.layer" + std::to_string(l) + "." + kLayerNames[i]] =
                tensor_to_json(e.layers[l].*layer_member(i));
    tensors["encoder.readout_w"] = tensor_to_json(e.readout_w);
    tensors["encoder.readout_b"] = tensor_to_json(e.readout_b);
    return Json{{"format", "desate-checkpoint"},
                {"version", 1},
                {"branch", to_json(b.config)},
                {"tensors", tensors},
                {"loss_curve", b.loss_curve}};
}

TrainedBranch checkpoint_from_json(const Json& j) {
    if (!j.is_object() || j.value("format", "") != "desate-checkpoint")
        throw ConfigError("not a desate checkpoint");
    if (j.value("version", 0) != 1)
        throw ConfigError("unsupported checkpoint version " + j.value("version", Json(0)).dump());
    TrainedBranch b;
    b.config = branch_from_json(j.at("branch"));
    const Json& t = j.at("tensors");
    auto tensor = [&](const std::string& name) {
        if (!t.contains(name)) throw ConfigError("checkpoint is missing tensor '" + name + "'");
        return tensor_from_json(t.at(name));
    };
    if (b.config.denoiser == DenoiserKind::Dae) {
        DaeModel d;
        d.W = tensor("dae.W");
        d.b = tensor("dae.b");
        d.W0 = tensor("dae.W0");
        d.b0 = tensor("dae.b0");
        d.hidden = d.W.rows();
        d.m = d.W.cols();
        try {
            d.check();
        } catch (const ContractError& e) {
            throw ConfigError(std::string("checkpoint: ") + e.what());
        }
        b.dae = std::move(d);
    }
    EncoderModel& e = b.encoder;
    e.cfg = b.config.encoder;
    e.cfg.validate();
    e.embed_w = tensor("encoder.embed_w");
    e.embed_b = tensor("encoder.embed_b");
    if (e.cfg.positional_encoding) e.pe = positional_encoding(e.cfg.max_len, e.cfg.d_model);
    for (std::size_t l = 0; l < e.cfg.layers; ++l) {
        EncoderLayer layer;
        for (std::size_t i = 0; i < std::size(kLayerNames); ++i)
            layer.*layer_member(i) = tensor("encoder.layer" + std::to_string(l) + "." + kLayerNames[i]);
        e.layers.push_back(std::move(layer));
    }
    e.readout_w = tensor("encoder.readout_w");
    e.readout_b = tensor("encoder.readout_b");
    const std::size_t d = e.cfg.d_model;
    if (e.embed_w.cols() != d || e.readout_w.rows() != d)
        throw ConfigError("checkpoint: encoder tensors disagree with d_model " + std::to_string(d));
    if (j.contains("loss_curve")) b.loss_curve = j.at("loss_curve").get<std::vector<double>>();
    return b;
}

void save_checkpoint(const TrainedBranch& b, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write checkpoint " + path.string());
    out << checkpoint_to_json(b).dump(1) << "\n";
    if (!out) throw ConfigError("failed writing checkpoint " + path.string());
}

TrainedBranch load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("checkpoint not found: " + path.string());
    try {
        return checkpoint_from_json(Json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("checkpoint " + path.string() + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError("checkpoint " + path.string() + ": " + e.what());
    }
}

}  // namespace desate
