#pragma once
// Run configuration and the command-line front end.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 every
// trial/branch failed, 1 anything unexpected.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "desate/data.hpp"
#include "desate/pipeline.hpp"
#include "desate/serialize.hpp"

namespace desate::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUnexpected = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitAllFailed = 4;

struct DatasetSpec {
    std::string id;
    std::filesystem::path path;  // empty for synthetic series
    std::string source;          // "nasa", "calce" or empty
    double rated_capacity_ah = 0.0;
    CsvColumns columns;
    bool synthetic = false;
    SyntheticModel model = SyntheticModel::ExponentialRegeneration;
    std::size_t cycles = 168;
    SyntheticParams params;
    std::uint64_t seed = 0;
};

enum class SplitMode { Temporal, LeaveOneOut };

struct SplitSpec {
    SplitMode mode = SplitMode::Temporal;
    double train_fraction = 0.5;
    // Temporal: the battery split in time. Leave-one-out: the held-out
    // battery. Empty means the first (temporal) or last (leave-one-out) dataset.
    std::string battery;
};

struct RunConfig {
    Json resolved;  // config after overrides; hashed for the output directory
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "runs";
    std::vector<DatasetSpec> datasets;
    SplitSpec split;
    double eol_threshold = 0.7;
    BranchConfig defaults;
    std::vector<BranchConfig> branches;
    GridSpec grid;

    std::string describe_split() const;
};

// Parses a run config. Relative dataset paths resolve against `base_dir`.
// Unknown keys, bad values and missing dataset files raise ConfigError.
RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir);

// SHA-256 of the canonical (sorted-key, compact) JSON dump, lowercase hex.
std::string config_hash(const Json& j);

std::vector<CapacitySeries> load_datasets(const RunConfig& cfg);
// Normalizes the datasets and applies the split.
TrialData build_trial_data(const RunConfig& cfg);

// Entry point shared by the `desate` binary and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace desate::cli
