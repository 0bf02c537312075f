#include "desate/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/random/bernoulli_distribution.hpp>

#include "desate/error.hpp"
#include "desate/rng.hpp"

namespace desate {

namespace {

std::string normalize_header(std::string_view s) {
    std::string out = boost::algorithm::trim_copy(std::string(s));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
    boost::algorithm::to_lower(out);
    return out;
}

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> cells;
    boost::algorithm::split(cells, line, boost::algorithm::is_any_of(","));
    for (auto& c : cells) {
        boost::algorithm::trim(c);
        if (c.size() >= 2 && c.front() == '"' && c.back() == '"') c = c.substr(1, c.size() - 2);
    }
    return cells;
}

std::size_t find_column(const std::vector<std::string>& header, const std::vector<std::string>& names,
                        const char* role) {
    for (const auto& name : names) {
        const std::string want = normalize_header(name);
        for (std::size_t i = 0; i < header.size(); ++i)
            if (normalize_header(header[i]) == want) return i;
    }
    std::string msg = std::string("no ") + role + " column (accepted: ";
    msg += boost::algorithm::join(names, ", ");
    msg += "); headers found: ";
    msg += header.empty() ? std::string("<none>") : boost::algorithm::join(header, ", ");
    throw SchemaError(msg);
}

template <typename T>
T parse_number(const std::string& cell, std::size_t line, const char* what) {
    T value{};
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (cell.empty() || ec != std::errc() || ptr != last)
        throw ParseError("line " + std::to_string(line) + ": " + what + " cell '" + cell +
                         "' is not a number");
    return value;
}

int parse_cycle(const std::string& cell, std::size_t line) {
    // Some exports write integral cycles as "12.0".
    const double v = parse_number<double>(cell, line, "cycle");
    if (!std::isfinite(v) || v != std::floor(v) || std::abs(v) > 1e9)
        throw ParseError("line " + std::to_string(line) + ": cycle cell '" + cell +
                         "' is not an integer");
    return static_cast<int>(v);
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

void CapacitySeries::validate(bool require_fade) const {
    const std::string who = battery_id.empty() ? std::string("series") : "series " + battery_id;
    if (!(rated_capacity_ah > 0.0) || !std::isfinite(rated_capacity_ah))
        throw DataError(who + ": rated capacity must be positive");
    if (cycles.size() != capacity_ah.size())
        throw DataError(who + ": cycle and capacity columns differ in length");
    if (cycles.size() < 2) throw DataError(who + ": needs at least 2 cycles, has " + std::to_string(cycles.size()));
    for (std::size_t i = 0; i < cycles.size(); ++i) {
        if (i > 0 && cycles[i] <= cycles[i - 1])
            throw DataError(who + ": cycles not strictly increasing at index " + std::to_string(i));
        if (!std::isfinite(capacity_ah[i]) || capacity_ah[i] <= 0.0)
            throw DataError(who + ": nonpositive or non-finite capacity at cycle " + std::to_string(cycles[i]));
    }
    if (require_fade && !(capacity_ah.back() < capacity_ah.front()))
        throw DataError(who + ": no capacity fade (last value is not below the first)");
}

CapacitySeries parse_capacity_csv(std::string_view text, std::string battery_id, double rated_capacity_ah,
                                  const CsvColumns& columns, bool require_fade) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    std::size_t cycle_col = 0, cap_col = 0;
    bool have_header = false;
    std::map<int, std::pair<double, int>> rows;  // cycle -> (sum, count)

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        const std::string trimmed = boost::algorithm::trim_copy(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        auto cells = split_cells(line);
        if (!have_header) {
            header = cells;
            cycle_col = find_column(header, columns.cycle, "cycle");
            cap_col = find_column(header, columns.capacity, "capacity");
            have_header = true;
            continue;
        }
        const std::size_t need = std::max(cycle_col, cap_col) + 1;
        if (cells.size() < need)
            throw ParseError("line " + std::to_string(line_no) + ": expected at least " + std::to_string(need) +
                             " cells, found " + std::to_string(cells.size()));
        const int cycle = parse_cycle(cells[cycle_col], line_no);
        const double cap = parse_number<double>(cells[cap_col], line_no, "capacity");
        if (!std::isfinite(cap))
            throw ParseError("line " + std::to_string(line_no) + ": capacity is not finite");
        auto& slot = rows[cycle];
        slot.first += cap;
        slot.second += 1;
    }
    if (!have_header) throw SchemaError("no header row; headers found: <none>");
    if (rows.empty()) throw DataError("no data rows after removing comments and blank lines");

    CapacitySeries s;
    s.battery_id = std::move(battery_id);
    s.rated_capacity_ah = rated_capacity_ah;
    for (const auto& [cycle, acc] : rows) {
        s.cycles.push_back(cycle);
        s.capacity_ah.push_back(acc.first / acc.second);
    }
    s.validate(require_fade);
    return s;
}

CapacitySeries load_capacity_csv(const std::filesystem::path& path, std::string battery_id,
                                 double rated_capacity_ah, const CsvColumns& columns, bool require_fade) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_capacity_csv(buf.str(), std::move(battery_id), rated_capacity_ah, columns, require_fade);
    } catch (const SchemaError& e) {
        throw SchemaError(path.string() + ": " + e.what());
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string format_capacity_csv(const CapacitySeries& series, const CsvColumns& columns) {
    std::string out = columns.cycle.front() + "," + columns.capacity.front() + "\n";
    for (std::size_t i = 0; i < series.size(); ++i)
        out += std::to_string(series.cycles[i]) + "," + format_double(series.capacity_ah[i]) + "\n";
    return out;
}

void save_capacity_csv(const CapacitySeries& series, const std::filesystem::path& path,
                       const CsvColumns& columns) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << format_capacity_csv(series, columns);
    if (!out) throw DataError("write failed: " + path.string());
}

double default_rated_capacity(std::string_view dataset) {
    const std::string d = normalize_header(dataset);
    if (d == "nasa") return 2.0;
    if (d == "calce") return 1.1;
    throw ConfigError("no default rated capacity for dataset '" + std::string(dataset) +
                      "' (known: nasa, calce)");
}

SyntheticModel parse_synthetic_model(std::string_view name) {
    const std::string n = normalize_header(name);
    if (n == "linear") return SyntheticModel::Linear;
    if (n == "exponential" || n == "exponential-regeneration" || n == "exponential_regeneration")
        return SyntheticModel::ExponentialRegeneration;
    throw ConfigError("unknown synthetic model '" + std::string(name) + "' (expected linear or exponential)");
}

std::string_view to_string(SyntheticModel m) {
    return m == SyntheticModel::Linear ? "linear" : "exponential";
}

CapacitySeries synthetic_series(SyntheticModel model, std::size_t n_cycles, const SyntheticParams& p,
                                std::uint64_t seed, std::string battery_id) {
    if (n_cycles < 2) throw ConfigError("synthetic_series: need at least 2 cycles");
    if (!(p.rated_capacity_ah > 0.0)) throw ConfigError("synthetic_series: rated capacity must be positive");
    CapacitySeries s;
    s.battery_id = std::move(battery_id);
    s.rated_capacity_ah = p.rated_capacity_ah;
    s.cycles.resize(n_cycles);
    s.capacity_ah.resize(n_cycles);
    const double c0 = p.rated_capacity_ah;

    if (model == SyntheticModel::Linear) {
        for (std::size_t i = 0; i < n_cycles; ++i) {
            s.cycles[i] = static_cast<int>(i + 1);
            s.capacity_ah[i] = c0 * (1.0 - p.fade_rate * static_cast<double>(i));
        }
    } else {
        if (p.jump_prob < 0.0 || p.jump_prob > 1.0)
            throw ConfigError("synthetic_series: jump_prob must lie in [0, 1]");
        Rng rng(seed);
        boost::random::bernoulli_distribution<double> jump(p.jump_prob);
        double bump = 0.0;
        for (std::size_t i = 0; i < n_cycles; ++i) {
            if (i > 0) {
                bump *= p.relaxation;
                if (jump(rng)) bump += p.jump_size;
            }
            s.cycles[i] = static_cast<int>(i + 1);
            s.capacity_ah[i] = c0 * (p.initial * std::exp(-p.decay_rate * static_cast<double>(i)) + bump);
        }
    }
    for (std::size_t i = 0; i < n_cycles; ++i)
        if (!(s.capacity_ah[i] > 0.0) || !std::isfinite(s.capacity_ah[i]))
            throw ConfigError("synthetic_series: parameters give nonpositive capacity at cycle " +
                              std::to_string(i + 1));
    return s;
}

}  // namespace desate
