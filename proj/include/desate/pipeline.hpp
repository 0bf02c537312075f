#pragma once
// Branch training, evaluation, the minimization layer and the grid harness.
//
// A branch pairs one noise spec with one denoiser (DAE or wavelet) and one
// transformer encoder. Training minimizes
//
//   L = sum_{t > T} (x_t - xhat_t)^2
//     + delta * sum_windows mean((x_clean - x_rec)^2)
//     + alpha * sum ||W||_F^2          (weight matrices of every trained model)
//
// with Adam. Wavelet branches have no learnable denoiser and drop the middle
// term. Evaluation forecasts the held-out tail both teacher-forced and
// autoregressively; RE is measured on remaining-useful-life cycles, MAE and
// RMSE on the autoregressive capacity trajectory.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "desate/dae.hpp"
#include "desate/data.hpp"
#include "desate/encoder.hpp"
#include "desate/noise.hpp"
#include "desate/tensor.hpp"
#include "desate/wavelet.hpp"

namespace desate {

// ---------------------------------------------------------------- metrics

// |Y - Yhat| / |Y|. Throws ContractError when Y == 0.
double relative_error(double actual, double predicted);
double mean_relative_error(std::span<const double> actual, std::span<const double> predicted);
double mae(std::span<const double> actual, std::span<const double> predicted);
double rmse(std::span<const double> actual, std::span<const double> predicted);

struct Metrics {
    double re = 0.0;
    double mae = 0.0;
    double rmse = 0.0;
};

// RE as the mean per-sample relative error. Checks RMSE >= MAE.
Metrics compute_metrics(std::span<const double> actual, std::span<const double> predicted);

// ---------------------------------------------------------------- RUL

struct RulEstimate {
    double eol_threshold = 0.7;
    std::size_t forecast_start = 0;
    // Indices into the trajectories; equal to the trajectory length (one past
    // the last cycle) when the threshold is never crossed.
    std::size_t predicted_eol_cycle = 0;
    std::size_t actual_eol_cycle = 0;
    std::size_t rul_error_cycles = 0;
    bool predicted_censored = false;
    bool actual_censored = false;
    // |Y - Yhat| / max(|Y|, 1) with Y, Yhat the RUL in cycles counted from
    // forecast_start; the floor keeps an EOL at the forecast start finite.
    double re = 0.0;
};

// First index whose value is below `threshold`, or size() if none.
std::size_t first_crossing(std::span<const double> trajectory, double threshold);

RulEstimate estimate_rul(std::span<const double> predicted, std::span<const double> actual, double threshold,
                         std::size_t forecast_start = 0);

// ---------------------------------------------------------------- series

// x / C0. Logs a warning to std::clog for values above 1.05.
std::vector<double> normalize(const CapacitySeries& series);

struct WindowSet {
    std::size_t m = 0;
    std::vector<double> inputs;  // row-major [count x m]
    std::vector<double> targets;
    std::vector<std::size_t> target_index;  // index of each target in the source sequence

    std::size_t count() const noexcept { return targets.size(); }
    Tensor input_tensor() const;
    Tensor target_tensor() const;  // [count x 1]
};

// Window k covers [k*stride, k*stride + m) and targets index k*stride + m.
WindowSet make_windows(std::span<const double> x, std::size_t m, std::size_t stride = 1);

// ---------------------------------------------------------------- branches

enum class DenoiserKind { Dae, Wavelet };
enum class Schedule { Joint, Sequential };

std::string_view to_string(DenoiserKind k);
DenoiserKind parse_denoiser_kind(std::string_view s);
std::string_view to_string(Schedule s);
Schedule parse_schedule(std::string_view s);

struct TrainConfig {
    double delta = 1.0;
    double alpha = 1e-5;
    double lr = 1e-3;
    int epochs = 2000;
    // Forecast term covers 1-based positions t > T of each training segment.
    // Unset means T = window length, i.e. every supervised target.
    std::optional<std::size_t> T;
    std::uint64_t seed = 0;
    std::size_t window = 16;
    std::size_t stride = 1;
    Schedule schedule = Schedule::Joint;
    // DAE pretraining epochs for the sequential schedule (0 = `epochs`).
    int pretrain_epochs = 0;
    bool dae_literal_target = false;

    void validate() const;
};

struct BranchConfig {
    std::string id;
    NoiseSpec noise;
    DenoiserKind denoiser = DenoiserKind::Dae;
    std::size_t dae_hidden = 16;
    WaveletConfig wavelet;
    EncoderConfig encoder;
    TrainConfig train;

    void validate() const;
};

// "dae" or "wavelet:<mode>:<epsilon>:<family>:<levels>" (trailing parts optional).
std::string denoiser_label(const BranchConfig& b);
void apply_denoiser_label(BranchConfig& b, std::string_view label);

struct TrainedBranch {
    BranchConfig config;
    std::optional<DaeModel> dae;
    EncoderModel encoder;
    std::vector<double> loss_curve;      // joint (or encoder-phase) loss per epoch
    std::vector<double> dae_loss_curve;  // sequential schedule only
};

// Noise draw used for segment `segment` at training epoch `epoch`.
NoiseSpec training_noise(const BranchConfig& b, int epoch, std::size_t segment);
// Seed streams for the model initializers.
std::uint64_t dae_init_seed(const BranchConfig& b);
std::uint64_t encoder_init_seed(const BranchConfig& b);

// Windows of `corrupted` denoised causally: the window ending before index
// t is cut from the wavelet reconstruction of corrupted[0, t). Levels are
// clamped to what each prefix admits.
std::vector<double> causal_wavelet_windows(std::span<const double> corrupted, const WindowSet& windows,
                                           const WaveletConfig& cfg);

// predictions/targets [n x 1]; residuals [n x m] or undefined to drop the
// reconstruction term.
Tensor joint_loss(const Tensor& predictions, const Tensor& targets, const Tensor& residuals,
                  const std::vector<Tensor>& weight_matrices, double delta, double alpha);

// `segments` are clean normalized training sequences. Throws TrainingDiverged
// naming the branch id and epoch on a non-finite loss.
TrainedBranch train_branch(const BranchConfig& branch, const std::vector<std::vector<double>>& segments);

// ---------------------------------------------------------------- evaluation

struct TestSeries {
    std::string battery_id;
    std::vector<double> clean;  // full normalized series
    std::size_t forecast_start = 0;
};

struct EvalConfig {
    double eol_threshold = 0.7;
    std::uint64_t seed = 0;  // fixes the evaluation corruption
};

struct BranchEvaluation {
    std::string id;
    std::vector<double> actual;          // clean values over the test horizon
    std::vector<double> autoregressive;  // rollout from forecast_start
    std::vector<double> teacher_forced;  // one-step predictions from corrupted history
    Metrics capacity;                    // autoregressive, capacity units
    Metrics teacher;                     // teacher-forced, capacity units
    RulEstimate rul;
};

BranchEvaluation evaluate_branch(const TrainedBranch& branch, const TestSeries& test, const EvalConfig& cfg);

struct BranchMetrics {
    double re = 0.0;    // RUL relative error
    double mae = 0.0;   // autoregressive capacity
    double rmse = 0.0;  // autoregressive capacity
    double re_capacity = 0.0;
    double mae_teacher = 0.0;
    double rmse_teacher = 0.0;
    std::size_t predicted_eol = 0;
    std::size_t actual_eol = 0;
};

struct MetricsReport {
    std::map<std::string, BranchMetrics> per_branch;
    std::map<std::string, std::string> argmin_branch;  // "re", "mae", "rmse" -> id
    std::string selected;                              // argmin RE
};

// Minimization layer. NaN counts as worse than any number; ties go to the
// lexicographically smallest branch id.
MetricsReport select_branch(std::map<std::string, BranchMetrics> per_branch);

BranchMetrics summarize(const BranchEvaluation& e);
MetricsReport evaluate(const std::vector<TrainedBranch>& branches, const TestSeries& test, const EvalConfig& cfg,
                       std::vector<BranchEvaluation>* details = nullptr);

// ---------------------------------------------------------------- grid search

struct GridSpec {
    std::vector<double> lr{1e-3, 1e-2};
    std::vector<std::size_t> layers{1, 2};
    std::vector<std::size_t> hidden{16, 32};
    std::vector<double> noise_levels{0.001, 0.01, 0.05};
    std::vector<double> alpha{1e-5};
    std::vector<double> delta{1.0};
    std::vector<NoiseFamily> families{NoiseFamily::Gaussian};
    std::vector<std::string> denoisers{"dae"};
    int repeats = 1;

    std::size_t count() const;
    void validate() const;
};

struct TrialRow {
    std::string trial_id;
    std::string noise_family;
    std::string denoiser_kind;
    double lr = 0.0;
    std::size_t layers = 0;
    std::size_t hidden = 0;
    double alpha = 0.0;
    double noise_level = 0.0;
    double delta = 0.0;
    std::uint64_t seed = 0;
    double re = 0.0;
    double mae = 0.0;
    double rmse = 0.0;
    double wall_seconds = 0.0;
    std::string error;  // empty on success; metrics are NaN otherwise

    bool failed() const { return !error.empty(); }
};

// Branch config of trial `index` in Cartesian order (lr slowest, repeat fastest).
BranchConfig grid_trial(const GridSpec& grid, const BranchConfig& base, std::size_t index, TrialRow* row = nullptr);

struct TrialData {
    std::vector<std::vector<double>> train_segments;
    TestSeries test;
};

// Runs every trial (up to `jobs` concurrently), records failures without
// aborting, and returns rows sorted by RE (failures last, ties by id).
// Progress and failures are logged to `log` when given.
std::vector<TrialRow> grid_search(const GridSpec& grid, const BranchConfig& base, const TrialData& data,
                                  const EvalConfig& eval, int jobs = 1, std::ostream* log = nullptr);

void sort_trials(std::vector<TrialRow>& rows);

inline constexpr const char* kTrialCsvHeader =
    "trial_id,noise_family,denoiser_kind,LR,NoL,HD,alpha,NL,delta,seed,RE,MAE,RMSE,wall_seconds";

std::string format_trial_csv(const std::vector<TrialRow>& rows);
// Throws ParseError naming the 1-based line for malformed rows and
// SchemaError for a wrong header.
std::vector<TrialRow> parse_trial_csv(std::string_view text);

}  // namespace desate
