#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstring>
#include <functional>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <boost/version.hpp>
#include <openssl/opensslv.h>

#include "desate/cli.hpp"
#include "desate/error.hpp"
#include "desate/kernels.hpp"
#include "desate/version.hpp"

namespace desate::cli {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
    std::optional<int> epochs;
    std::optional<double> lr;
    int jobs = 1;
};

struct DenoiseOptions {
    std::string config;
    std::string input;
    std::string method = "wavelet";
    std::string out;
    std::string checkpoint;
    std::string dataset = "nasa";
    std::optional<double> rated_capacity;
    std::string cycle_column = "cycle";
    std::string capacity_column = "capacity_ah";
    std::optional<std::string> family, mode, boundary;
    std::optional<int> levels;
    std::optional<double> epsilon;
};

struct EvaluateOptions {
    std::string checkpoints;
};

struct ReportOptions {
    std::vector<std::string> tables;
    std::string out;
    std::vector<std::string> families;
    std::vector<std::string> denoisers;
};

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out) throw ConfigError("failed writing " + path.string());
}

Json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
}

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("DE_SATE_SEED");
    if (!s || !*s) return std::nullopt;
    std::uint64_t v = 0;
    const char* end = s + std::strlen(s);
    auto [ptr, ec] = std::from_chars(s, end, v);
    if (ec != std::errc() || ptr != end) throw ConfigError(std::string("DE_SATE_SEED is not an unsigned integer: ") + s);
    return v;
}

// Config file plus overrides: DE_SATE_SEED beats the file, flags beat both.
RunConfig load_config(const CommonOptions& o) {
    const fs::path path = o.config;
    Json j = read_json_file(path);
    if (!j.is_object()) throw ConfigError("config " + path.string() + ": top level must be an object");
    if (auto s = env_seed()) j["seed"] = *s;
    if (o.seed) j["seed"] = *o.seed;
    if (o.output_dir) j["output_dir"] = *o.output_dir;
    if (o.epochs) j["train"]["epochs"] = *o.epochs;
    if (o.lr) j["train"]["lr"] = *o.lr;
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    return parse_run_config(j, base);
}

fs::path run_directory(const RunConfig& cfg) {
    fs::path dir = cfg.output_dir / config_hash(cfg.resolved).substr(0, 16);
    fs::create_directories(dir);
    return dir;
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

Json versions() {
    return Json{{"desate", std::string(kVersion)},
                {"compiler", std::string(__VERSION__)},
                {"boost", std::string(BOOST_LIB_VERSION)},
                {"openssl", std::string(OPENSSL_VERSION_TEXT)},
                {"kernels", std::string(kernels::isa_name(kernels::active().isa))},
                {"rng", std::string("boost::random::mt19937_64")}};
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& cfg, double wall,
                    const std::vector<std::string>& artifacts, const Json& extra = Json::object()) {
    Json m{{"command", command},
           {"config_hash", config_hash(cfg.resolved)},
           {"seed", cfg.seed},
           {"config", cfg.resolved},
           {"split", cfg.describe_split()},
           {"versions", versions()},
           {"started_utc", utc_now()},
           {"wall_seconds", wall},
           {"artifacts", artifacts}};
    for (const auto& [k, v] : extra.items()) m[k] = v;
    write_file(dir / ("manifest-" + command + ".json"), m.dump(2) + "\n");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename F>
void parallel_for(std::size_t n, int jobs, F&& body) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) body(i);
    };
    const std::size_t threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, std::max<std::size_t>(n, 1));
    if (threads == 1) {
        worker();
        return;
    }
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
}

// ---------------------------------------------------------------- denoise

int cmd_denoise(const DenoiseOptions& o, std::ostream& out, std::ostream& err) {
    WaveletConfig wcfg;
    if (!o.config.empty()) {
        Json j = read_json_file(o.config);
        if (j.contains("wavelet")) wcfg = wavelet_from_json(j.at("wavelet"));
    }
    if (o.family) wcfg.family = parse_wavelet_family(*o.family);
    if (o.mode) wcfg.mode = parse_threshold_mode(*o.mode);
    if (o.boundary) wcfg.boundary = parse_boundary_mode(*o.boundary);
    if (o.levels) wcfg.levels = *o.levels;
    if (o.epsilon) wcfg.epsilon = *o.epsilon;
    if (!(wcfg.epsilon >= 0.0)) throw ConfigError("denoise: epsilon must be >= 0");

    const DenoiserKind method = parse_denoiser_kind(o.method);
    std::optional<TrainedBranch> branch;
    if (method == DenoiserKind::Dae) {
        if (o.checkpoint.empty()) throw ConfigError("denoise: --method dae needs --checkpoint");
        branch = load_checkpoint(o.checkpoint);
        if (!branch->dae) throw ConfigError("denoise: checkpoint " + o.checkpoint + " holds no DAE");
    }
    const double rated = o.rated_capacity ? *o.rated_capacity : default_rated_capacity(o.dataset);
    if (!(rated > 0.0)) throw ConfigError("denoise: rated capacity must be positive");

    if (!fs::exists(o.input)) throw DataError("denoise: input not found: " + o.input);
    CsvColumns cols;
    cols.cycle = {o.cycle_column};
    cols.capacity = {o.capacity_column};
    if (o.capacity_column == "capacity_ah") cols.capacity.push_back("capacity");
    CapacitySeries series = load_capacity_csv(o.input, fs::path(o.input).stem().string(), rated, cols, false);
    std::vector<double> x = normalize(series);

    std::vector<double> y;
    Json params;
    if (method == DenoiserKind::Wavelet) {
        y = wavelet_denoise(x, wcfg);
        params = to_json(wcfg);
    } else {
        const DaeModel& dae = *branch->dae;
        if (x.size() < dae.m)
            throw DataError("denoise: series of length " + std::to_string(x.size()) + " is shorter than the DAE window " +
                            std::to_string(dae.m));
        // Overlap-average reconstructions of every stride-1 window.
        const std::size_t count = x.size() - dae.m + 1;
        std::vector<double> windows;
        for (std::size_t k = 0; k < count; ++k) windows.insert(windows.end(), x.begin() + k, x.begin() + k + dae.m);
        Tensor rec = reconstruct(dae, Tensor::from(count, dae.m, windows));
        std::vector<double> acc(x.size(), 0.0), hits(x.size(), 0.0);
        for (std::size_t k = 0; k < count; ++k)
            for (std::size_t i = 0; i < dae.m; ++i) {
                acc[k + i] += rec(k, i);
                hits[k + i] += 1.0;
            }
        y.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = acc[i] / hits[i];
        params = Json{{"checkpoint", o.checkpoint}, {"window", dae.m}, {"hidden", dae.hidden}};
    }

    CapacitySeries result = series;
    for (std::size_t i = 0; i < y.size(); ++i) result.capacity_ah[i] = y[i] * rated;
    CsvColumns out_cols;
    out_cols.cycle = {o.cycle_column};
    out_cols.capacity = {o.capacity_column};
    const fs::path out_path = o.out;
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    save_capacity_csv(result, out_path, out_cols);
    Json sidecar{{"method", std::string(to_string(method))},
                 {"parameters", params},
                 {"input", o.input},
                 {"rated_capacity_ah", rated},
                 {"cycles", series.size()},
                 {"versions", versions()}};
    write_file(out_path.string() + ".json", sidecar.dump(2) + "\n");
    out << "denoised " << series.size() << " cycles with " << to_string(method) << " -> " << out_path.string() << "\n";
    (void)err;
    return kExitOk;
}

// ---------------------------------------------------------------- train

std::string loss_csv(const TrainedBranch& b) {
    std::string s = "epoch,loss\n";
    for (std::size_t i = 0; i < b.loss_curve.size(); ++i) s += std::to_string(i) + "," + fmt(b.loss_curve[i]) + "\n";
    return s;
}

int cmd_train(const CommonOptions& o, std::ostream& out, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = load_config(o);
    TrialData data = build_trial_data(cfg);
    const fs::path dir = run_directory(cfg);
    fs::create_directories(dir / "checkpoints");
    fs::create_directories(dir / "loss");

    const std::size_t n = cfg.branches.size();
    std::vector<std::string> failures(n);
    std::mutex io;
    parallel_for(n, o.jobs, [&](std::size_t i) {
        const BranchConfig& b = cfg.branches[i];
        try {
            TrainedBranch t = train_branch(b, data.train_segments);
            save_checkpoint(t, dir / "checkpoints" / (b.id + ".json"));
            write_file(dir / "loss" / (b.id + ".csv"), loss_csv(t));
            std::lock_guard lock(io);
            out << "trained " << b.id << ": loss " << t.loss_curve.front() << " -> " << t.loss_curve.back() << "\n";
        } catch (const std::exception& e) {
            failures[i] = e.what();
            std::lock_guard lock(io);
            err << "branch " << b.id << " failed: " << e.what() << "\n";
        }
    });

    std::vector<std::string> artifacts;
    Json failed = Json::object();
    for (std::size_t i = 0; i < n; ++i) {
        if (failures[i].empty()) {
            artifacts.push_back("checkpoints/" + cfg.branches[i].id + ".json");
            artifacts.push_back("loss/" + cfg.branches[i].id + ".csv");
        } else {
            failed[cfg.branches[i].id] = failures[i];
        }
    }
    write_manifest(dir, "train", cfg, seconds_since(t0), artifacts, Json{{"failures", failed}});
    out << "run directory: " << dir.string() << "\n";
    return failed.size() == n ? kExitAllFailed : kExitOk;
}

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(const CommonOptions& o, const EvaluateOptions& e, std::ostream& out, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = load_config(o);
    TrialData data = build_trial_data(cfg);
    const fs::path dir = run_directory(cfg);
    const fs::path ckdir = e.checkpoints.empty() ? dir / "checkpoints" : fs::path(e.checkpoints);

    std::vector<TrainedBranch> branches;
    for (const auto& b : cfg.branches) branches.push_back(load_checkpoint(ckdir / (b.id + ".json")));
    const EvalConfig ecfg{cfg.eol_threshold, cfg.seed};
    std::vector<BranchEvaluation> details;
    MetricsReport report = evaluate(branches, data.test, ecfg, &details);

    std::ostringstream metrics;
    metrics << "branch_id,noise_family,denoiser_kind,RE,MAE,RMSE,RE_capacity,MAE_teacher,RMSE_teacher,"
               "predicted_eol,actual_eol,selected\n";
    for (const auto& b : branches) {
        const BranchMetrics& m = report.per_branch.at(b.config.id);
        metrics << b.config.id << "," << to_string(b.config.noise.family) << "," << denoiser_label(b.config) << ","
                << fmt(m.re) << "," << fmt(m.mae) << "," << fmt(m.rmse) << "," << fmt(m.re_capacity) << ","
                << fmt(m.mae_teacher) << "," << fmt(m.rmse_teacher) << "," << m.predicted_eol << ","
                << m.actual_eol << "," << (b.config.id == report.selected ? 1 : 0) << "\n";
    }
    std::ostringstream traj;
    traj << "branch_id,cycle_index,actual,autoregressive,teacher_forced\n";
    for (const auto& d : details)
        for (std::size_t i = 0; i < d.actual.size(); ++i)
            traj << d.id << "," << data.test.forecast_start + i << "," << fmt(d.actual[i]) << ","
                 << fmt(d.autoregressive[i]) << "," << fmt(d.teacher_forced[i]) << "\n";
    Json selection{{"selected", report.selected},
                   {"argmin", report.argmin_branch},
                   {"split", cfg.describe_split()},
                   {"test_battery", data.test.battery_id},
                   {"forecast_start", data.test.forecast_start},
                   {"tie_break", "lexicographic branch id"}};
    write_file(dir / "metrics.csv", metrics.str());
    write_file(dir / "trajectories.csv", traj.str());
    write_file(dir / "selection.json", selection.dump(2) + "\n");
    write_manifest(dir, "evaluate", cfg, seconds_since(t0), {"metrics.csv", "trajectories.csv", "selection.json"});

    out << "# " << cfg.describe_split() << " test=" << data.test.battery_id
        << " forecast_start=" << data.test.forecast_start << "\n";
    out << std::left << std::setw(24) << "branch" << std::setw(12) << "RE" << std::setw(12) << "MAE" << "RMSE\n";
    for (const auto& [id, m] : report.per_branch)
        out << std::setw(24) << id << std::setw(12) << m.re << std::setw(12) << m.mae << m.rmse
            << (id == report.selected ? "  <- selected" : "") << "\n";
    out << "run directory: " << dir.string() << "\n";
    (void)err;
    return kExitOk;
}

// ---------------------------------------------------------------- grid-search

int cmd_grid(const CommonOptions& o, std::ostream& out, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = load_config(o);
    if (!cfg.resolved.contains("grid")) throw ConfigError("grid-search: config has no 'grid' section");
    cfg.grid.validate();
    TrialData data = build_trial_data(cfg);
    const fs::path dir = run_directory(cfg);
    const EvalConfig ecfg{cfg.eol_threshold, cfg.seed};
    out << "# " << cfg.describe_split() << "; " << cfg.grid.count() << " trials\n";
    std::vector<TrialRow> rows = grid_search(cfg.grid, cfg.defaults, data, ecfg, o.jobs, &err);
    write_file(dir / "trials.csv", format_trial_csv(rows));
    std::size_t failed = 0;
    Json failures = Json::object();
    for (const auto& r : rows)
        if (r.failed()) {
            ++failed;
            failures[r.trial_id] = r.error;
        }
    write_manifest(dir, "grid-search", cfg, seconds_since(t0), {"trials.csv"},
                   Json{{"trials", rows.size()}, {"failures", failures}});
    if (!rows.empty() && !rows.front().failed())
        out << "best " << rows.front().trial_id << " RE=" << rows.front().re << " MAE=" << rows.front().mae
            << " RMSE=" << rows.front().rmse << "\n";
    out << rows.size() - failed << "/" << rows.size() << " trials succeeded; table: " << (dir / "trials.csv").string()
        << "\n";
    return failed == rows.size() ? kExitAllFailed : kExitOk;
}

// ---------------------------------------------------------------- report

int cmd_report(const ReportOptions& o, std::ostream& out, std::ostream& err) {
    std::vector<TrialRow> rows;
    for (const auto& path : o.tables) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("report: cannot open " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        try {
            auto part = parse_trial_csv(buf.str());
            rows.insert(rows.end(), part.begin(), part.end());
        } catch (const DataError& e) {
            throw DataError(path + ": " + e.what());
        }
    }
    auto keep = [&](const TrialRow& r) {
        if (r.failed()) return false;
        if (!o.families.empty() && std::find(o.families.begin(), o.families.end(), r.noise_family) == o.families.end())
            return false;
        if (!o.denoisers.empty()) {
            const std::string kind = r.denoiser_kind.substr(0, r.denoiser_kind.find(':'));
            if (std::find(o.denoisers.begin(), o.denoisers.end(), r.denoiser_kind) == o.denoisers.end() &&
                std::find(o.denoisers.begin(), o.denoisers.end(), kind) == o.denoisers.end())
                return false;
        }
        return true;
    };
    std::vector<TrialRow> sel;
    std::copy_if(rows.begin(), rows.end(), std::back_inserter(sel), keep);
    if (sel.empty())
        throw DataError("report: no successful trials match the selection (" + std::to_string(rows.size()) +
                        " rows read)");

    struct Acc {
        std::size_t n = 0;
        double re = 0, mae = 0, rmse = 0;
    };
    std::map<std::string, std::map<double, Acc>> by_level;
    std::map<std::string, Acc> by_family;
    for (const auto& r : sel) {
        for (Acc* a : {&by_level[r.noise_family][r.noise_level], &by_family[r.noise_family]}) {
            ++a->n;
            a->re += r.re;
            a->mae += r.mae;
            a->rmse += r.rmse;
        }
    }
    std::ostringstream summary, plot;
    summary << "noise_family,NL,trials,RE,MAE,RMSE\n";
    plot << "family,level,metric,value\n";
    for (const auto& [family, levels] : by_level) {
        for (const auto& [level, a] : levels) {
            const double n = static_cast<double>(a.n);
            summary << family << "," << fmt(level) << "," << a.n << "," << fmt(a.re / n) << "," << fmt(a.mae / n) << ","
                    << fmt(a.rmse / n) << "\n";
            plot << family << "," << fmt(level) << ",RE," << fmt(a.re / n) << "\n"
                 << family << "," << fmt(level) << ",MAE," << fmt(a.mae / n) << "\n"
                 << family << "," << fmt(level) << ",RMSE," << fmt(a.rmse / n) << "\n";
        }
        const Acc& a = by_family.at(family);
        const double n = static_cast<double>(a.n);
        summary << family << ",all," << a.n << "," << fmt(a.re / n) << "," << fmt(a.mae / n) << "," << fmt(a.rmse / n)
                << "\n";
    }

    std::ostringstream best;
    best << "metric,trial_id,noise_family,denoiser_kind,LR,NoL,HD,alpha,NL,Result\n";
    for (auto [name, field] : {std::pair{"RE", &TrialRow::re}, {"MAE", &TrialRow::mae}, {"RMSE", &TrialRow::rmse}}) {
        const TrialRow* b = &sel.front();
        for (const auto& r : sel)
            if (r.*field < b->*field || (r.*field == b->*field && r.trial_id < b->trial_id)) b = &r;
        best << name << "," << b->trial_id << "," << b->noise_family << "," << b->denoiser_kind << "," << fmt(b->lr)
             << "," << b->layers << "," << b->hidden << "," << fmt(b->alpha) << "," << fmt(b->noise_level) << ","
             << fmt(b->*field) << "\n";
    }

    const fs::path dir = o.out;
    fs::create_directories(dir);
    write_file(dir / "summary.csv", summary.str());
    write_file(dir / "plot_data.csv", plot.str());
    write_file(dir / "best.csv", best.str());
    out << "summarized " << sel.size() << " of " << rows.size() << " trials -> " << dir.string() << "\n";
    out << best.str();
    (void)err;
    return kExitOk;
}

int guarded(const std::function<int()>& body, std::ostream& err) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const nlohmann::json::exception& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitUnexpected;
    }
}

void add_common(CLI::App* cmd, CommonOptions& o, bool jobs) {
    cmd->add_option("-c,--config", o.config, "Run-config JSON file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Override the global seed (beats DE_SATE_SEED and the config)");
    cmd->add_option("-o,--output-dir", o.output_dir, "Override the output root (config default: runs)");
    cmd->add_option("--epochs", o.epochs, "Override train.epochs (config default: 2000)");
    cmd->add_option("--lr", o.lr, "Override train.lr (config default: 0.001)");
    if (jobs) cmd->add_option("-j,--jobs", o.jobs, "Concurrent trainings")->capture_default_str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Battery capacity forecasting with noise-specific denoisers and transformer encoders", "desate"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    DenoiseOptions dn;
    auto* denoise = app.add_subcommand("denoise", "Denoise one capacity CSV with a wavelet or a trained DAE");
    denoise->add_option("-i,--input", dn.input, "Input CSV")->required();
    denoise->add_option("-o,--out", dn.out, "Output CSV (a .json sidecar is written next to it)")->required();
    denoise->add_option("-m,--method", dn.method, "wavelet or dae")
        ->check(CLI::IsMember({"wavelet", "dae"}))
        ->capture_default_str();
    denoise->add_option("--checkpoint", dn.checkpoint, "Branch checkpoint holding the DAE (method dae)");
    denoise->add_option("-c,--config", dn.config, "Optional run config supplying wavelet defaults");
    denoise->add_option("--dataset", dn.dataset, "Rated-capacity default: nasa (2.0 Ah) or calce (1.1 Ah)")
        ->capture_default_str();
    denoise->add_option("--rated-capacity", dn.rated_capacity, "Rated capacity C0 in Ah (overrides --dataset)");
    denoise->add_option("--cycle-column", dn.cycle_column, "Cycle column header")->capture_default_str();
    denoise->add_option("--capacity-column", dn.capacity_column, "Capacity column header")->capture_default_str();
    denoise->add_option("--family", dn.family, "Wavelet family: haar or db4 (default: db4)");
    denoise->add_option("--levels", dn.levels, "Decomposition levels (default: 2)");
    denoise->add_option("--mode", dn.mode, "Threshold rule: soft, hard or garrote (default: hard)");
    denoise->add_option("--epsilon", dn.epsilon, "Threshold epsilon (default: 0.01)");
    denoise->add_option("--boundary", dn.boundary, "Boundary handling: symmetric or periodic (default: symmetric)");

    CommonOptions tr, ev, gs;
    EvaluateOptions evo;
    auto* train = app.add_subcommand("train", "Train every configured branch and write checkpoints");
    add_common(train, tr, true);
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate trained branches and select the minimum-RE branch");
    add_common(evaluate, ev, false);
    evaluate->add_option("--checkpoints", evo.checkpoints,
                         "Checkpoint directory (default: <run directory>/checkpoints)");
    auto* grid = app.add_subcommand("grid-search", "Run the configured hyperparameter grid");
    add_common(grid, gs, true);

    ReportOptions rp;
    auto* report = app.add_subcommand("report", "Summarize one or more trial tables");
    report->add_option("-t,--tables", rp.tables, "Trial table CSVs")->required()->expected(1, -1);
    report->add_option("-o,--out", rp.out, "Output directory")->required();
    report->add_option("--family", rp.families, "Keep only these noise families (default: all)");
    report->add_option("--denoiser", rp.denoisers, "Keep only these denoiser kinds: dae, wavelet or full labels (default: all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (denoise->parsed()) return guarded([&] { return cmd_denoise(dn, out, err); }, err);
    if (train->parsed()) return guarded([&] { return cmd_train(tr, out, err); }, err);
    if (evaluate->parsed()) return guarded([&] { return cmd_evaluate(ev, evo, out, err); }, err);
    if (grid->parsed()) return guarded([&] { return cmd_grid(gs, out, err); }, err);
    if (report->parsed()) return guarded([&] { return cmd_report(rp, out, err); }, err);
    return kExitConfig;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"desate"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace desate::cli
