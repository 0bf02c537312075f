#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "desate/cli.hpp"
#include "desate/error.hpp"

namespace desate::cli {

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

DatasetSpec parse_dataset(const Json& j, const std::filesystem::path& base_dir, std::uint64_t seed) {
    constexpr const char* where = "datasets[]";
    check_keys(j, {"id", "path", "source", "rated_capacity_ah", "cycle_column", "capacity_column", "synthetic"},
               where);
    DatasetSpec d;
    d.seed = seed;
    read(j, "id", d.id, where);
    if (d.id.empty()) throw ConfigError("datasets[]: every dataset needs an 'id'");
    read(j, "source", d.source, where);
    read(j, "rated_capacity_ah", d.rated_capacity_ah, where);
    if (j.contains("cycle_column")) d.columns.cycle = {get<std::string>(j, "cycle_column", where)};
    if (j.contains("capacity_column")) d.columns.capacity = {get<std::string>(j, "capacity_column", where)};
    if (j.contains("synthetic")) {
        if (j.contains("path")) throw ConfigError("dataset " + d.id + ": give either 'path' or 'synthetic', not both");
        const Json& s = j.at("synthetic");
        constexpr const char* sw = "datasets[].synthetic";
        check_keys(s,
                   {"model", "cycles", "rated_capacity_ah", "fade_rate", "initial", "decay_rate", "jump_prob",
                    "jump_size", "relaxation", "seed"},
                   sw);
        d.synthetic = true;
        if (s.contains("model")) d.model = parse_synthetic_model(get<std::string>(s, "model", sw));
        read(s, "cycles", d.cycles, sw);
        read(s, "rated_capacity_ah", d.params.rated_capacity_ah, sw);
        read(s, "fade_rate", d.params.fade_rate, sw);
        read(s, "initial", d.params.initial, sw);
        read(s, "decay_rate", d.params.decay_rate, sw);
        read(s, "jump_prob", d.params.jump_prob, sw);
        read(s, "jump_size", d.params.jump_size, sw);
        read(s, "relaxation", d.params.relaxation, sw);
        read(s, "seed", d.seed, sw);
        if (d.rated_capacity_ah > 0.0) d.params.rated_capacity_ah = d.rated_capacity_ah;
        d.rated_capacity_ah = d.params.rated_capacity_ah;
        return d;
    }
    if (!j.contains("path")) throw ConfigError("dataset " + d.id + ": needs 'path' or 'synthetic'");
    d.path = get<std::string>(j, "path", where);
    if (d.path.is_relative()) d.path = base_dir / d.path;
    if (!std::filesystem::exists(d.path))
        throw ConfigError("dataset " + d.id + ": file not found: " + d.path.string());
    if (d.rated_capacity_ah <= 0.0) {
        if (d.source.empty())
            throw ConfigError("dataset " + d.id + ": set 'rated_capacity_ah' or 'source' (nasa or calce)");
        d.rated_capacity_ah = default_rated_capacity(d.source);
    }
    return d;
}

std::vector<BranchConfig> default_branches(const BranchConfig& defaults) {
    std::vector<BranchConfig> out;
    for (NoiseFamily f : {NoiseFamily::Gaussian, NoiseFamily::Speckle, NoiseFamily::Poisson, NoiseFamily::Uniform}) {
        for (DenoiserKind k : {DenoiserKind::Dae, DenoiserKind::Wavelet}) {
            BranchConfig b = defaults;
            b.noise = NoiseSpec::at_level(f, defaults.noise.level, defaults.noise.seed, defaults.noise.lambda);
            b.denoiser = k;
            b.id = std::string(to_string(f)) + "-" + std::string(to_string(k));
            out.push_back(std::move(b));
        }
    }
    return out;
}

}  // namespace

std::string RunConfig::describe_split() const {
    std::ostringstream s;
    s << "split=" << (split.mode == SplitMode::Temporal ? "temporal" : "leave-one-out")
      << " train_fraction=" << split.train_fraction;
    if (!split.battery.empty()) s << " battery=" << split.battery;
    s << " eol_threshold=" << eol_threshold;
    return s.str();
}

RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir) {
    check_keys(j,
               {"seed", "output_dir", "datasets", "split", "eol_threshold", "noise", "wavelet", "encoder", "dae",
                "train", "branches", "grid"},
               "config");
    RunConfig c;
    c.resolved = j;
    read(j, "seed", c.seed, "config");
    if (j.contains("output_dir")) c.output_dir = get<std::string>(j, "output_dir", "config");
    read(j, "eol_threshold", c.eol_threshold, "config");
    if (!(c.eol_threshold > 0.0 && c.eol_threshold < 1.0)) throw ConfigError("config: eol_threshold must lie in (0, 1)");

    if (!j.contains("datasets") || !j.at("datasets").is_array() || j.at("datasets").empty())
        throw ConfigError("config: 'datasets' must be a nonempty array");
    std::set<std::string> ids;
    for (const auto& d : j.at("datasets")) {
        c.datasets.push_back(parse_dataset(d, base_dir, c.seed));
        if (!ids.insert(c.datasets.back().id).second)
            throw ConfigError("config: duplicate dataset id '" + c.datasets.back().id + "'");
    }

    if (j.contains("split")) {
        const Json& s = j.at("split");
        check_keys(s, {"mode", "train_fraction", "battery"}, "split");
        if (s.contains("mode")) {
            const auto mode = get<std::string>(s, "mode", "split");
            if (mode == "temporal")
                c.split.mode = SplitMode::Temporal;
            else if (mode == "leave-one-out" || mode == "leave_one_out")
                c.split.mode = SplitMode::LeaveOneOut;
            else
                throw ConfigError("split: mode must be 'temporal' or 'leave-one-out', got '" + mode + "'");
        }
        read(s, "train_fraction", c.split.train_fraction, "split");
        read(s, "battery", c.split.battery, "split");
    }
    if (!(c.split.train_fraction > 0.0 && c.split.train_fraction < 1.0))
        throw ConfigError("split: train_fraction must lie in (0, 1)");
    if (c.split.battery.empty())
        c.split.battery = c.split.mode == SplitMode::Temporal ? c.datasets.front().id : c.datasets.back().id;
    if (!ids.count(c.split.battery)) throw ConfigError("split: unknown battery '" + c.split.battery + "'");
    if (c.split.mode == SplitMode::LeaveOneOut && c.datasets.size() < 2)
        throw ConfigError("split: leave-one-out needs at least two datasets");

    BranchConfig& d = c.defaults;
    d.noise = NoiseSpec::at_level(NoiseFamily::Gaussian, 0.01, c.seed);
    d.train.seed = c.seed;
    if (j.contains("noise")) d.noise = noise_from_json(j.at("noise"), d.noise);
    if (j.contains("wavelet")) d.wavelet = wavelet_from_json(j.at("wavelet"), d.wavelet);
    if (j.contains("encoder")) d.encoder = encoder_from_json(j.at("encoder"), d.encoder);
    d.dae_hidden = d.encoder.d_model;
    if (j.contains("dae")) {
        check_keys(j.at("dae"), {"hidden"}, "dae");
        read(j.at("dae"), "hidden", d.dae_hidden, "dae");
    }
    if (j.contains("train")) d.train = train_from_json(j.at("train"), d.train);
    d.encoder.max_len = std::max(d.encoder.max_len, d.train.window);
    d.id = "default";

    if (j.contains("branches")) {
        if (!j.at("branches").is_array() || j.at("branches").empty())
            throw ConfigError("config: 'branches' must be a nonempty array");
        std::set<std::string> bids;
        for (const auto& bj : j.at("branches")) {
            BranchConfig b = branch_from_json(bj, d);
            if (!bj.contains("id")) throw ConfigError("branches[]: every branch needs an 'id'");
            if (!bids.insert(b.id).second) throw ConfigError("config: duplicate branch id '" + b.id + "'");
            c.branches.push_back(std::move(b));
        }
    } else {
        c.branches = default_branches(d);
    }
    for (const auto& b : c.branches) b.validate();
    if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"), c.grid);
    return c;
}

std::string config_hash(const Json& j) {
    const std::string text = j.dump();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("config_hash: SHA-256 failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

std::vector<CapacitySeries> load_datasets(const RunConfig& cfg) {
    std::vector<CapacitySeries> out;
    for (const auto& d : cfg.datasets) {
        if (d.synthetic)
            out.push_back(synthetic_series(d.model, d.cycles, d.params, d.seed, d.id));
        else
            out.push_back(load_capacity_csv(d.path, d.id, d.rated_capacity_ah, d.columns));
    }
    return out;
}

TrialData build_trial_data(const RunConfig& cfg) {
    const auto series = load_datasets(cfg);
    TrialData data;
    for (const auto& s : series) {
        auto x = normalize(s);
        const bool target = s.battery_id == cfg.split.battery;
        const auto start = static_cast<std::size_t>(std::floor(cfg.split.train_fraction * static_cast<double>(x.size())));
        if (cfg.split.mode == SplitMode::Temporal) {
            if (!target) continue;
            data.train_segments.emplace_back(x.begin(), x.begin() + static_cast<long>(start));
            data.test = TestSeries{s.battery_id, x, start};
        } else if (target) {
            data.test = TestSeries{s.battery_id, x, start};
        } else {
            data.train_segments.push_back(x);
        }
    }
    return data;
}

}  // namespace desate::cli
