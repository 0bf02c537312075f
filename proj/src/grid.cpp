#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <boost/algorithm/string.hpp>

#include "desate/error.hpp"
#include "desate/pipeline.hpp"
#include "desate/rng.hpp"

namespace desate {

namespace {

constexpr std::uint64_t kRepeatStream = 0x5245500007;

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

template <typename T>
void require_nonempty(const std::vector<T>& v, const char* axis) {
    if (v.empty()) throw ConfigError(std::string("grid: axis '") + axis + "' is empty");
}

}  // namespace

std::size_t GridSpec::count() const {
    return lr.size() * layers.size() * hidden.size() * noise_levels.size() * alpha.size() * delta.size() *
           families.size() * denoisers.size() * static_cast<std::size_t>(std::max(repeats, 0));
}

void GridSpec::validate() const {
    require_nonempty(lr, "lr");
    require_nonempty(layers, "layers");
    require_nonempty(hidden, "hidden");
    require_nonempty(noise_levels, "noise_levels");
    require_nonempty(alpha, "alpha");
    require_nonempty(delta, "delta");
    require_nonempty(families, "families");
    require_nonempty(denoisers, "denoisers");
    if (repeats < 1) throw ConfigError("grid: repeats must be >= 1");
}

BranchConfig grid_trial(const GridSpec& g, const BranchConfig& base, std::size_t index, TrialRow* row) {
    if (index >= g.count()) throw ContractError("grid_trial: index out of range");
    std::size_t i = index;
    auto take = [&i](std::size_t n) {
        const std::size_t k = i % n;
        i /= n;
        return k;
    };
    // Innermost axis first.
    const std::size_t rep = take(static_cast<std::size_t>(g.repeats));
    const std::size_t den = take(g.denoisers.size());
    const std::size_t fam = take(g.families.size());
    const std::size_t del = take(g.delta.size());
    const std::size_t alp = take(g.alpha.size());
    const std::size_t lvl = take(g.noise_levels.size());
    const std::size_t hd = take(g.hidden.size());
    const std::size_t nol = take(g.layers.size());
    const std::size_t lr = take(g.lr.size());

    BranchConfig b = base;
    b.train.lr = g.lr[lr];
    b.encoder.layers = g.layers[nol];
    b.encoder.d_model = g.hidden[hd];
    b.encoder.ffn_hidden = g.hidden[hd];
    b.dae_hidden = g.hidden[hd];
    b.train.alpha = g.alpha[alp];
    b.train.delta = g.delta[del];
    b.train.seed = derive_seed(base.train.seed, kRepeatStream + rep);
    b.noise = NoiseSpec::at_level(g.families[fam], g.noise_levels[lvl], base.noise.seed, base.noise.lambda);
    apply_denoiser_label(b, g.denoisers[den]);

    const int width = static_cast<int>(std::to_string(g.count()).size());
    std::ostringstream id;
    id << 't' << std::setw(std::max(width, 4)) << std::setfill('0') << index + 1;
    b.id = id.str();

    if (row) {
        *row = TrialRow{};
        row->trial_id = b.id;
        row->noise_family = std::string(to_string(b.noise.family));
        row->denoiser_kind = denoiser_label(b);
        row->lr = b.train.lr;
        row->layers = b.encoder.layers;
        row->hidden = b.encoder.d_model;
        row->alpha = b.train.alpha;
        row->noise_level = b.noise.level;
        row->delta = b.train.delta;
        row->seed = b.train.seed;
    }
    return b;
}

void sort_trials(std::vector<TrialRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const TrialRow& a, const TrialRow& b) {
        const bool an = std::isnan(a.re), bn = std::isnan(b.re);
        if (an != bn) return bn;
        if (!an && a.re != b.re) return a.re < b.re;
        return a.trial_id < b.trial_id;
    });
}

std::vector<TrialRow> grid_search(const GridSpec& grid, const BranchConfig& base, const TrialData& data,
                                  const EvalConfig& eval, int jobs, std::ostream* log) {
    grid.validate();
    const std::size_t n = grid.count();
    std::vector<TrialRow> rows(n);
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;

    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            TrialRow& row = rows[i];
            const auto t0 = std::chrono::steady_clock::now();
            try {
                BranchConfig b = grid_trial(grid, base, i, &row);
                TrainedBranch trained = train_branch(b, data.train_segments);
                BranchMetrics m = summarize(evaluate_branch(trained, data.test, eval));
                row.re = m.re;
                row.mae = m.mae;
                row.rmse = m.rmse;
            } catch (const std::exception& e) {
                row.error = e.what();
                row.re = row.mae = row.rmse = std::numeric_limits<double>::quiet_NaN();
            }
            row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (log) {
                std::lock_guard lock(log_mutex);
                if (row.failed())
                    *log << "trial " << row.trial_id << " failed: " << row.error << "\n";
                else
                    *log << "trial " << row.trial_id << " RE=" << row.re << " MAE=" << row.mae << " RMSE=" << row.rmse
                         << " (" << std::lround(row.wall_seconds * 10) / 10.0 << "s)\n";
            }
        }
    };

    const std::size_t threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, n);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    sort_trials(rows);
    return rows;
}

std::string format_trial_csv(const std::vector<TrialRow>& rows) {
    std::string out = std::string(kTrialCsvHeader) + "\n";
    for (const auto& r : rows) {
        out += r.trial_id + "," + r.noise_family + "," + r.denoiser_kind + "," + fmt(r.lr) + "," +
               std::to_string(r.layers) + "," + std::to_string(r.hidden) + "," + fmt(r.alpha) + "," +
               fmt(r.noise_level) + "," + fmt(r.delta) + "," + std::to_string(r.seed) + "," + fmt(r.re) + "," +
               fmt(r.mae) + "," + fmt(r.rmse) + "," + fmt(r.wall_seconds) + "\n";
    }
    return out;
}

namespace {

double cell_double(const std::string& s, std::size_t line, const char* col) {
    if (boost::algorithm::iequals(s, "nan")) return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError("line " + std::to_string(line) + ": column " + col + " value '" + s + "' is not a number");
    return v;
}

template <typename T>
T cell_unsigned(const std::string& s, std::size_t line, const char* col) {
    T v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError("line " + std::to_string(line) + ": column " + col + " value '" + s +
                         "' is not a nonnegative integer");
    return v;
}

}  // namespace

std::vector<TrialRow> parse_trial_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::vector<TrialRow> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (boost::algorithm::trim_copy(line).empty() || line.front() == '#') continue;
        if (!header_seen) {
            if (boost::algorithm::trim_copy(line) != kTrialCsvHeader)
                throw SchemaError("line " + std::to_string(line_no) + ": unexpected trial table header '" + line +
                                  "'");
            header_seen = true;
            continue;
        }
        std::vector<std::string> c;
        boost::algorithm::split(c, line, boost::algorithm::is_any_of(","));
        if (c.size() != 14)
            throw ParseError("line " + std::to_string(line_no) + ": expected 14 columns, found " +
                             std::to_string(c.size()));
        for (auto& s : c) boost::algorithm::trim(s);
        TrialRow r;
        r.trial_id = c[0];
        r.noise_family = c[1];
        r.denoiser_kind = c[2];
        if (r.trial_id.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty trial_id");
        r.lr = cell_double(c[3], line_no, "LR");
        r.layers = cell_unsigned<std::size_t>(c[4], line_no, "NoL");
        r.hidden = cell_unsigned<std::size_t>(c[5], line_no, "HD");
        r.alpha = cell_double(c[6], line_no, "alpha");
        r.noise_level = cell_double(c[7], line_no, "NL");
        r.delta = cell_double(c[8], line_no, "delta");
        r.seed = cell_unsigned<std::uint64_t>(c[9], line_no, "seed");
        r.re = cell_double(c[10], line_no, "RE");
        r.mae = cell_double(c[11], line_no, "MAE");
        r.rmse = cell_double(c[12], line_no, "RMSE");
        r.wall_seconds = cell_double(c[13], line_no, "wall_seconds");
        if (std::isnan(r.re)) r.error = "failed";
        rows.push_back(std::move(r));
    }
    if (!header_seen) throw SchemaError("trial table has no header row");
    return rows;
}

}  // namespace desate
