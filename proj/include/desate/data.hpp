#pragma once
// Capacity-per-cycle series: CSV ingest/export and synthetic degradation curves.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace desate {

struct CapacitySeries {
    std::string battery_id;
    std::vector<int> cycles;  // strictly increasing
    std::vector<double> capacity_ah;
    double rated_capacity_ah = 1.0;

    std::size_t size() const noexcept { return cycles.size(); }

    // Throws DataError on any violated invariant. The fade check (last value
    // below the first) can be skipped for inputs that are not full histories.
    void validate(bool require_fade = true) const;
};

// Header names accepted for each column, matched case-insensitively after
// trimming. The first configured name is the one written on export.
struct CsvColumns {
    std::vector<std::string> cycle{"cycle"};
    std::vector<std::string> capacity{"capacity_ah", "capacity"};
};

// Parses a header-first CSV (LF or CRLF, '#' comment lines, blank lines
// ignored). Rows are sorted by cycle and duplicate cycles averaged.
// Errors: SchemaError (columns missing), ParseError (bad cell, with the
// 1-based file line), DataError (empty or invariant violation).
CapacitySeries load_capacity_csv(const std::filesystem::path& path, std::string battery_id,
                                 double rated_capacity_ah, const CsvColumns& columns = {},
                                 bool require_fade = true);
CapacitySeries parse_capacity_csv(std::string_view text, std::string battery_id,
                                  double rated_capacity_ah, const CsvColumns& columns = {},
                                  bool require_fade = true);

// Writes cycle and capacity columns with round-trip precision.
void save_capacity_csv(const CapacitySeries& series, const std::filesystem::path& path,
                       const CsvColumns& columns = {});
std::string format_capacity_csv(const CapacitySeries& series, const CsvColumns& columns = {});

// Nominal capacities: "nasa" -> 2.0 Ah, "calce" -> 1.1 Ah.
double default_rated_capacity(std::string_view dataset);

enum class SyntheticModel { Linear, ExponentialRegeneration };

SyntheticModel parse_synthetic_model(std::string_view name);
std::string_view to_string(SyntheticModel m);

struct SyntheticParams {
    double rated_capacity_ah = 2.0;
    // linear: c_i = C0 * (1 - fade_rate * i)
    double fade_rate = 0.001;
    // exponential: c_i = C0 * (initial * exp(-decay_rate * i) + bump_i), where
    // bump_i jumps by jump_size with probability jump_prob per cycle and
    // relaxes by the factor `relaxation` each cycle.
    double initial = 0.95;
    double decay_rate = 0.002;
    double jump_prob = 0.05;
    double jump_size = 0.02;
    double relaxation = 0.85;
};

// Deterministic per seed. Cycles are numbered from 1. Throws ConfigError
// when the parameters produce a nonpositive capacity.
CapacitySeries synthetic_series(SyntheticModel model, std::size_t n_cycles,
                                const SyntheticParams& params, std::uint64_t seed,
                                std::string battery_id = "synthetic");

}  // namespace desate
