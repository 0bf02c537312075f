#include "desate/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <boost/algorithm/string.hpp>

#include "desate/error.hpp"
#include "desate/optim.hpp"
#include "desate/rng.hpp"

namespace desate {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kDaeInitStream = 0x4441450001;
constexpr std::uint64_t kEncoderInitStream = 0x454e430002;
constexpr std::uint64_t kNoiseStream = 0x4e4f490003;
constexpr std::uint64_t kDropoutStream = 0x44524f0004;
constexpr std::uint64_t kPretrainStream = 0x5052450005;
constexpr std::uint64_t kEvalStream = 0x4556410006;

std::vector<double> denoise_prefix(std::span<const double> x, const WaveletConfig& cfg) {
    WaveletConfig c = cfg;
    c.levels = std::min(cfg.levels, max_levels(x.size(), cfg.family));
    if (c.levels < 1) return {x.begin(), x.end()};
    return wavelet_denoise(x, c);
}

double parse_double(std::string_view s, std::string_view what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError("invalid " + std::string(what) + " '" + std::string(s) + "'");
    return v;
}

std::string lower(std::string_view s) { return boost::algorithm::to_lower_copy(std::string(s)); }

}  // namespace

std::string_view to_string(DenoiserKind k) { return k == DenoiserKind::Dae ? "dae" : "wavelet"; }

DenoiserKind parse_denoiser_kind(std::string_view s) {
    const std::string v = lower(s);
    if (v == "dae") return DenoiserKind::Dae;
    if (v == "wavelet") return DenoiserKind::Wavelet;
    throw ConfigError("unknown denoiser '" + std::string(s) + "' (expected dae or wavelet)");
}

std::string_view to_string(Schedule s) { return s == Schedule::Joint ? "joint" : "sequential"; }

Schedule parse_schedule(std::string_view s) {
    const std::string v = lower(s);
    if (v == "joint") return Schedule::Joint;
    if (v == "sequential") return Schedule::Sequential;
    throw ConfigError("unknown schedule '" + std::string(s) + "' (expected joint or sequential)");
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (pretrain_epochs < 0) throw ConfigError("train: pretrain_epochs must be >= 0");
    if (!(delta >= 0.0)) throw ConfigError("train: delta must be >= 0");
    if (!(alpha >= 0.0)) throw ConfigError("train: alpha must be >= 0");
    if (window == 0 || stride == 0) throw ConfigError("train: window and stride must be positive");
}

void BranchConfig::validate() const {
    if (id.empty()) throw ConfigError("branch: id must not be empty");
    noise.validate();
    train.validate();
    EncoderConfig e = encoder;
    e.max_len = std::max(e.max_len, train.window);
    e.validate();
    if (denoiser == DenoiserKind::Dae && dae_hidden == 0) throw ConfigError("branch " + id + ": dae hidden must be positive");
    if (denoiser == DenoiserKind::Wavelet) {
        if (wavelet.levels < 1) throw ConfigError("branch " + id + ": wavelet levels must be >= 1");
        if (!(wavelet.epsilon >= 0.0)) throw ConfigError("branch " + id + ": wavelet epsilon must be >= 0");
    }
}

std::string denoiser_label(const BranchConfig& b) {
    if (b.denoiser == DenoiserKind::Dae) return "dae";
    char eps[32];
    auto [ptr, ec] = std::to_chars(eps, eps + sizeof eps, b.wavelet.epsilon);
    return "wavelet:" + std::string(to_string(b.wavelet.mode)) + ":" + std::string(eps, ptr) + ":" +
           std::string(to_string(b.wavelet.family)) + ":" + std::to_string(b.wavelet.levels);
}

void apply_denoiser_label(BranchConfig& b, std::string_view label) {
    std::vector<std::string> parts;
    boost::algorithm::split(parts, label, boost::algorithm::is_any_of(":"));
    b.denoiser = parse_denoiser_kind(parts[0]);
    if (b.denoiser == DenoiserKind::Dae) {
        if (parts.size() > 1) throw ConfigError("denoiser 'dae' takes no options: '" + std::string(label) + "'");
        return;
    }
    if (parts.size() > 5) throw ConfigError("too many wavelet options in '" + std::string(label) + "'");
    if (parts.size() > 1) b.wavelet.mode = parse_threshold_mode(parts[1]);
    if (parts.size() > 2) b.wavelet.epsilon = parse_double(parts[2], "wavelet epsilon");
    if (parts.size() > 3) b.wavelet.family = parse_wavelet_family(parts[3]);
    if (parts.size() > 4) b.wavelet.levels = static_cast<int>(parse_double(parts[4], "wavelet levels"));
}

NoiseSpec training_noise(const BranchConfig& b, int epoch, std::size_t segment) {
    const std::uint64_t base = derive_seed(derive_seed(b.train.seed, kNoiseStream), b.noise.seed);
    return b.noise.with_seed(derive_seed(derive_seed(base, static_cast<std::uint64_t>(epoch)), segment));
}

std::uint64_t dae_init_seed(const BranchConfig& b) { return derive_seed(b.train.seed, kDaeInitStream); }
std::uint64_t encoder_init_seed(const BranchConfig& b) { return derive_seed(b.train.seed, kEncoderInitStream); }

std::vector<double> causal_wavelet_windows(std::span<const double> corrupted, const WindowSet& windows,
                                           const WaveletConfig& cfg) {
    const std::size_t m = windows.m;
    std::vector<double> out;
    out.reserve(windows.count() * m);
    for (std::size_t k = 0; k < windows.count(); ++k) {
        const std::size_t end = windows.target_index[k];
        if (end < m || end > corrupted.size())
            throw ContractError("causal_wavelet_windows: window " + std::to_string(k) + " outside the sequence");
        auto den = denoise_prefix(corrupted.subspan(0, end), cfg);
        out.insert(out.end(), den.end() - static_cast<long>(m), den.end());
    }
    return out;
}

Tensor joint_loss(const Tensor& predictions, const Tensor& targets, const Tensor& residuals,
                  const std::vector<Tensor>& weight_matrices, double delta, double alpha) {
    if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols())
        throw DimensionError("joint_loss: predictions " + predictions.shape().str() + " vs targets " +
                             targets.shape().str());
    Tensor loss = sum_squares(sub(targets, predictions));
    if (residuals.defined() && delta != 0.0)
        loss = add(loss, scale(sum_squares(residuals), delta / static_cast<double>(residuals.cols())));
    if (alpha != 0.0 && !weight_matrices.empty()) {
        Tensor penalty = sum_squares(weight_matrices.front());
        for (std::size_t i = 1; i < weight_matrices.size(); ++i) penalty = add(penalty, sum_squares(weight_matrices[i]));
        loss = add(loss, scale(penalty, alpha));
    }
    return loss;
}

namespace {

struct SegmentWindows {
    std::vector<WindowSet> per_segment;
    Tensor clean;    // [N x m]
    Tensor targets;  // forecast-region targets [F x 1]
    std::vector<std::size_t> forecast_rows;
};

SegmentWindows prepare_windows(const BranchConfig& b, const std::vector<std::vector<double>>& segments) {
    SegmentWindows sw;
    const std::size_t m = b.train.window;
    const std::size_t T = b.train.T.value_or(m);
    std::vector<double> clean, targets;
    std::size_t row = 0;
    for (const auto& seg : segments) {
        if (b.train.T && T >= seg.size())
            throw ConfigError("branch " + b.id + ": T = " + std::to_string(T) + " must be below the segment length " +
                              std::to_string(seg.size()));
        WindowSet ws = make_windows(seg, m, b.train.stride);
        clean.insert(clean.end(), ws.inputs.begin(), ws.inputs.end());
        for (std::size_t k = 0; k < ws.count(); ++k, ++row) {
            if (ws.target_index[k] + 1 > T) {
                sw.forecast_rows.push_back(row);
                targets.push_back(ws.targets[k]);
            }
        }
        sw.per_segment.push_back(std::move(ws));
    }
    if (sw.forecast_rows.empty()) throw ConfigError("branch " + b.id + ": no training targets beyond T");
    sw.clean = Tensor::from(row, m, std::move(clean));
    sw.targets = Tensor::from(sw.forecast_rows.size(), 1, std::move(targets));
    return sw;
}

// Network input for one epoch: corrupted windows (DAE) or their causal
// wavelet reconstructions.
Tensor epoch_inputs(const BranchConfig& b, const std::vector<std::vector<double>>& segments,
                    const SegmentWindows& sw, int epoch) {
    std::vector<double> values;
    values.reserve(sw.clean.size());
    for (std::size_t s = 0; s < segments.size(); ++s) {
        auto corr = corrupt(segments[s], training_noise(b, epoch, s));
        const WindowSet& ws = sw.per_segment[s];
        if (b.denoiser == DenoiserKind::Wavelet) {
            auto den = causal_wavelet_windows(corr, ws, b.wavelet);
            values.insert(values.end(), den.begin(), den.end());
        } else {
            for (std::size_t k = 0; k < ws.count(); ++k) {
                const std::size_t start = ws.target_index[k] - ws.m;
                values.insert(values.end(), corr.begin() + static_cast<long>(start),
                              corr.begin() + static_cast<long>(start + ws.m));
            }
        }
    }
    return Tensor::from(sw.clean.rows(), sw.clean.cols(), std::move(values));
}

void check_finite(const BranchConfig& b, double value, int epoch) {
    if (!std::isfinite(value))
        throw TrainingDiverged("branch " + b.id + ": non-finite loss at epoch " + std::to_string(epoch), epoch);
}

}  // namespace

TrainedBranch train_branch(const BranchConfig& branch, const std::vector<std::vector<double>>& segments) {
    branch.validate();
    if (segments.empty()) throw DataError("branch " + branch.id + ": no training data");
    for (const auto& seg : segments)
        if (seg.size() < branch.train.window + 1)
            throw DataError("branch " + branch.id + ": training segment of length " + std::to_string(seg.size()) +
                            " is shorter than window + 1 = " + std::to_string(branch.train.window + 1));

    const TrainConfig& tc = branch.train;
    TrainedBranch out;
    out.config = branch;
    out.config.encoder.max_len = std::max(branch.encoder.max_len, tc.window);
    Rng enc_rng(encoder_init_seed(branch));
    out.encoder = EncoderModel::init(out.config.encoder, enc_rng);
    Rng drop_rng(derive_seed(tc.seed, kDropoutStream));
    Rng* drop = out.config.encoder.dropout > 0.0 ? &drop_rng : nullptr;

    const SegmentWindows sw = prepare_windows(branch, segments);
    const bool joint_dae = branch.denoiser == DenoiserKind::Dae && tc.schedule == Schedule::Joint;

    if (branch.denoiser == DenoiserKind::Dae) {
        if (joint_dae) {
            Rng dae_rng(dae_init_seed(branch));
            out.dae = DaeModel::init(tc.window, branch.dae_hidden, dae_rng);
        } else {
            DaeTrainConfig dc;
            dc.alpha = tc.alpha;
            dc.lr = tc.lr;
            dc.epochs = tc.pretrain_epochs > 0 ? tc.pretrain_epochs : tc.epochs;
            dc.seed = derive_seed(tc.seed, kPretrainStream);
            dc.hidden = branch.dae_hidden;
            dc.literal_target = tc.dae_literal_target;
            try {
                auto r = train_dae(sw.clean, branch.noise, dc);
                out.dae = std::move(r.model);
                out.dae_loss_curve = std::move(r.loss_curve);
            } catch (const TrainingDiverged& e) {
                throw TrainingDiverged("branch " + branch.id + ": DAE pretraining diverged at epoch " +
                                           std::to_string(e.epoch()),
                                       e.epoch());
            }
        }
    }

    std::vector<Tensor> params = out.encoder.parameters();
    std::vector<Tensor> weights = out.encoder.weight_matrices();
    if (joint_dae) {
        for (const auto& p : out.dae->parameters()) params.push_back(p);
        for (const auto& w : out.dae->weight_matrices()) weights.push_back(w);
    }
    Adam opt(params, AdamConfig{.lr = tc.lr});
    out.loss_curve.reserve(static_cast<std::size_t>(tc.epochs));

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        Tensor inputs = epoch_inputs(branch, segments, sw, epoch);
        if (branch.denoiser == DenoiserKind::Dae && !joint_dae) inputs = reconstruct(*out.dae, inputs);
        opt.zero_grad();
        Tape tape;
        Tape::Scope scope(tape);
        Tensor encoder_in = inputs;
        Tensor residual;
        if (joint_dae) {
            Tensor rec = reconstruct(*out.dae, inputs);
            if (tc.delta != 0.0) residual = sub(tc.dae_literal_target ? inputs : sw.clean, rec);
            encoder_in = rec;
        }
        Tensor pred = select_rows(forward(out.encoder, encoder_in, drop), sw.forecast_rows);
        Tensor loss = joint_loss(pred, sw.targets, residual, weights, joint_dae ? tc.delta : 0.0, tc.alpha);
        const double value = loss.item();
        check_finite(branch, value, epoch);
        out.loss_curve.push_back(value);
        tape.backward(loss);
        opt.step();
    }
    return out;
}

namespace {

// Denoised windows for a set of (end index) positions of one corrupted series.
Tensor denoised_windows(const TrainedBranch& b, std::span<const double> corrupted, const WindowSet& ws) {
    if (b.config.denoiser == DenoiserKind::Wavelet)
        return Tensor::from(ws.count(), ws.m, causal_wavelet_windows(corrupted, ws, b.config.wavelet));
    return reconstruct(*b.dae, ws.input_tensor());
}

WindowSet windows_ending_at(std::span<const double> x, std::size_t m, std::size_t first, std::size_t last) {
    WindowSet ws;
    ws.m = m;
    for (std::size_t t = first; t < last; ++t) {
        ws.inputs.insert(ws.inputs.end(), x.begin() + static_cast<long>(t - m), x.begin() + static_cast<long>(t));
        ws.targets.push_back(t < x.size() ? x[t] : 0.0);
        ws.target_index.push_back(t);
    }
    return ws;
}

}  // namespace

BranchEvaluation evaluate_branch(const TrainedBranch& branch, const TestSeries& test, const EvalConfig& cfg) {
    const std::size_t n = test.clean.size(), s = test.forecast_start, m = branch.config.train.window;
    if (s < m || s >= n)
        throw DataError("evaluate: forecast start " + std::to_string(s) + " must lie in [" + std::to_string(m) + ", " +
                        std::to_string(n) + ") for " + (test.battery_id.empty() ? "the test series" : test.battery_id));
    if (branch.config.denoiser == DenoiserKind::Dae && !branch.dae)
        throw ContractError("evaluate: branch " + branch.config.id + " has no DAE model");

    BranchEvaluation e;
    e.id = branch.config.id;
    e.actual.assign(test.clean.begin() + static_cast<long>(s), test.clean.end());
    const NoiseSpec noise = branch.config.noise.with_seed(derive_seed(cfg.seed, kEvalStream));
    const std::vector<double> corr = corrupt(test.clean, noise);

    // Teacher-forced: every test target predicted from its corrupted history.
    WindowSet tf = windows_ending_at(corr, m, s, n);
    Tensor pred = forward(branch.encoder, denoised_windows(branch, corr, tf));
    e.teacher_forced.assign(pred.values().begin(), pred.values().end());

    // Autoregressive: predictions are appended to the corrupted history.
    std::vector<double> buffer(corr.begin(), corr.begin() + static_cast<long>(s));
    for (std::size_t t = s; t < n; ++t) {
        WindowSet one = windows_ending_at(buffer, m, buffer.size(), buffer.size() + 1);
        const double p = forward(branch.encoder, denoised_windows(branch, buffer, one)).item();
        e.autoregressive.push_back(p);
        buffer.push_back(p);
    }

    e.capacity = compute_metrics(e.actual, e.autoregressive);
    e.teacher = compute_metrics(e.actual, e.teacher_forced);
    std::vector<double> trajectory(test.clean.begin(), test.clean.begin() + static_cast<long>(s));
    trajectory.insert(trajectory.end(), e.autoregressive.begin(), e.autoregressive.end());
    e.rul = estimate_rul(trajectory, test.clean, cfg.eol_threshold, s);
    return e;
}

BranchMetrics summarize(const BranchEvaluation& e) {
    BranchMetrics m;
    m.re = e.rul.re;
    m.mae = e.capacity.mae;
    m.rmse = e.capacity.rmse;
    m.re_capacity = e.capacity.re;
    m.mae_teacher = e.teacher.mae;
    m.rmse_teacher = e.teacher.rmse;
    m.predicted_eol = e.rul.predicted_eol_cycle;
    m.actual_eol = e.rul.actual_eol_cycle;
    return m;
}

MetricsReport evaluate(const std::vector<TrainedBranch>& branches, const TestSeries& test, const EvalConfig& cfg,
                       std::vector<BranchEvaluation>* details) {
    if (branches.empty()) throw ContractError("evaluate: no branches");
    std::map<std::string, BranchMetrics> per_branch;
    for (const auto& b : branches) {
        BranchEvaluation e = evaluate_branch(b, test, cfg);
        if (!per_branch.emplace(b.config.id, summarize(e)).second)
            throw ConfigError("evaluate: duplicate branch id '" + b.config.id + "'");
        if (details) details->push_back(std::move(e));
    }
    return select_branch(std::move(per_branch));
}

}  // namespace desate
