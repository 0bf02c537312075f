// Property-based acceptance gate. Prints one PASS/FAIL line per criterion
// and exits nonzero if any fails. Tolerances and limits are fixed here and are
// not configurable.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "desate/dae.hpp"
#include "desate/data.hpp"
#include "desate/encoder.hpp"
#include "desate/noise.hpp"
#include "desate/pipeline.hpp"
#include "desate/tensor.hpp"
#include "desate/wavelet.hpp"
#include "support.hpp"

using namespace desate;
using testing_support::random_tensor;
using testing_support::random_vector;

namespace {

constexpr double kRoundTripTol = 1e-9;
constexpr double kRoundTripSeconds = 60.0;
constexpr double kGradTol = 1e-4;
constexpr std::size_t kGradMaxParams = 500;
constexpr double kGradSeconds = 300.0;
constexpr double kAttentionTol = 1e-9;
constexpr double kMetricTol = 1e-12;
constexpr double kShrinkTol = 1e-12;
constexpr double kSigmaBand = 3.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s  %2d  %-34s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* format, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

// 1 ---------------------------------------------------------------------------

void wavelet_round_trip() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(1);
    std::uniform_int_distribution<std::size_t> len_dist(4, 4096);
    double worst = 0.0;
    std::size_t transforms = 0;
    for (int s = 0; s < 1000; ++s) {
        // Lengths cover both ends of the range explicitly.
        const std::size_t n = s == 0 ? 4 : s == 1 ? 4096 : len_dist(gen);
        const auto x = random_vector(n, 1000 + static_cast<std::uint64_t>(s), -2.0, 2.0);
        for (auto family : {WaveletFamily::Haar, WaveletFamily::Daubechies4}) {
            for (int levels = 1; levels <= max_levels(n, family); ++levels) {
                for (auto boundary : {BoundaryMode::SymmetricPad, BoundaryMode::PeriodicPad}) {
                    WaveletConfig cfg;
                    cfg.family = family;
                    cfg.levels = levels;
                    cfg.boundary = boundary;
                    const auto back = idwt(dwt(x, cfg), cfg, n);
                    worst = std::max(worst, testing_support::max_abs_diff(back, x));
                    ++transforms;
                }
            }
        }
    }
    const double secs = seconds_since(t0);
    report(1, "wavelet perfect reconstruction", worst <= kRoundTripTol && secs <= kRoundTripSeconds,
           fmt("max err %.3g (tol %.0e) over %zu transforms, %.1fs (limit %.0fs)", worst, kRoundTripTol, transforms,
               secs, kRoundTripSeconds));
}

// 2 ---------------------------------------------------------------------------

std::size_t count_params(const std::vector<Tensor>& ps) {
    std::size_t n = 0;
    for (const auto& p : ps) n += p.size();
    return n;
}

EncoderModel random_encoder(std::mt19937_64& gen, std::size_t len, std::uint64_t seed) {
    // Two layers at d_model 8 would exceed the parameter budget.
    EncoderConfig cfg;
    cfg.layers = 1 + gen() % 2;
    cfg.d_model = cfg.layers == 1 && gen() % 2 ? 8 : 4;
    cfg.heads = gen() % 2 ? 1 : 2;
    cfg.ffn_hidden = 4;
    cfg.max_len = len;
    cfg.positional_encoding = gen() % 4 != 0;
    Rng rng(seed);
    return EncoderModel::init(cfg, rng);
}

void gradient_correctness() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(2);
    double worst = 0.0;
    std::size_t components = 0, largest = 0;
    int networks = 0;
    for (int i = 0; i < 100; ++i, ++networks) {
        const auto seed = 5000 + static_cast<std::uint64_t>(i);
        const std::size_t len = 3 + gen() % 4;
        testing_support::GradCheck r;
        std::size_t params = 0;
        if (i % 3 == 0) {
            // DAE reconstruction loss.
            Rng rng(seed);
            auto d = DaeModel::init(len, 2 + gen() % 8, rng);
            auto xc = random_tensor(4, len, seed + 1, false, 0.5, 1.0);
            auto x = random_tensor(4, len, seed + 2, false, 0.5, 1.0);
            params = count_params(d.parameters());
            r = testing_support::check_gradients(d.parameters(), [&] { return dae_loss(d, xc, x, 1e-3); });
        } else if (i % 3 == 1) {
            // Encoder forecast loss.
            auto m = random_encoder(gen, len, seed);
            auto in = random_tensor(3, len, seed + 1, false, 0.5, 1.0);
            auto target = random_tensor(3, 1, seed + 2, false, 0.5, 1.0);
            params = count_params(m.parameters());
            r = testing_support::check_gradients(m.parameters(), [&] {
                return joint_loss(forward(m, in), target, Tensor{}, m.weight_matrices(), 0.0, 1e-3);
            });
        } else {
            // DAE feeding the encoder under the joint loss.
            Rng rng(seed);
            auto d = DaeModel::init(len, 2 + gen() % 4, rng);
            auto m = random_encoder(gen, len, seed + 7);
            auto clean = random_tensor(3, len, seed + 1, false, 0.5, 1.0);
            auto xc = random_tensor(3, len, seed + 2, false, 0.5, 1.0);
            auto target = random_tensor(3, 1, seed + 3, false, 0.5, 1.0);
            auto all = m.parameters();
            for (const auto& p : d.parameters()) all.push_back(p);
            params = count_params(all);
            r = testing_support::check_gradients(all, [&] {
                auto xh = reconstruct(d, xc);
                auto w = m.weight_matrices();
                w.push_back(d.W);
                w.push_back(d.W0);
                return joint_loss(forward(m, xh), target, sub(clean, xh), w, 0.7, 1e-3);
            });
        }
        if (params > kGradMaxParams) {
            report(2, "gradient correctness", false, fmt("network %d has %zu parameters", i, params));
            return;
        }
        largest = std::max(largest, params);
        worst = std::max(worst, r.worst_rel_err);
        components += r.components;
    }
    const double secs = seconds_since(t0);
    report(2, "gradient correctness", worst <= kGradTol && secs <= kGradSeconds,
           fmt("worst rel err %.3g (tol %.0e), %d networks, %zu components, <= %zu params, %.1fs (limit %.0fs)",
               worst, kGradTol, networks, components, largest, secs, kGradSeconds));
}

// 3 ---------------------------------------------------------------------------

void attention_normalization() {
    std::mt19937_64 gen(3);
    double worst_row = 0.0, worst_fused = 0.0;
    bool single_exact = true;
    for (int i = 0; i < 1000; ++i) {
        const auto seed = 9000 + static_cast<std::uint64_t>(i) * 4;
        const std::size_t len = 1 + gen() % 16, d = 1 + gen() % 8;
        // Wide value range so some rows are nearly one-hot.
        auto q = random_tensor(len, d, seed, false, -6.0, 6.0);
        auto k = random_tensor(len, d, seed + 1, false, -6.0, 6.0);
        auto w = attention_weights(q, k);
        for (std::size_t r = 0; r < len; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < len; ++c) s += w.values()[r * len + c];
            worst_row = std::max(worst_row, std::abs(s - 1.0));
        }
        // The fused path: a value matrix of ones returns the row sums.
        const std::size_t heads = d % 2 == 0 ? 2 : 1;
        const std::size_t blocks = 1 + gen() % 3;
        auto qb = random_tensor(blocks * len, d, seed + 2, false, -6.0, 6.0);
        auto kb = random_tensor(blocks * len, d, seed + 3, false, -6.0, 6.0);
        auto ones = Tensor::from(blocks * len, d, std::vector<double>(blocks * len * d, 1.0));
        const auto fused = block_attention(qb, kb, ones, len, heads);
        for (double v : fused.values())
            worst_fused = std::max(worst_fused, std::abs(v - 1.0));

        auto q1 = random_tensor(1, d, seed + 4, false, -6.0, 6.0);
        auto k1 = random_tensor(1, d, seed + 5, false, -6.0, 6.0);
        auto v1 = random_tensor(1, d, seed + 6, false, -6.0, 6.0);
        const auto want = testing_support::to_vec(v1.values());
        single_exact = single_exact && testing_support::to_vec(attention(q1, k1, v1).values()) == want &&
                       testing_support::to_vec(block_attention(q1, k1, v1, 1, 1).values()) == want;
    }
    const double worst = std::max(worst_row, worst_fused);
    report(3, "attention normalization", worst <= kAttentionTol && single_exact,
           fmt("max |row sum - 1| %.3g (composed) %.3g (fused), tol %.0e; single position returns V: %s", worst_row,
               worst_fused, kAttentionTol, single_exact ? "yes" : "no"));
}

// 4 ---------------------------------------------------------------------------

void metric_oracle() {
    std::mt19937_64 gen(4);
    double worst = 0.0;
    bool ordered = true;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 1 + gen() % 200;
        const auto seed = 20000 + static_cast<std::uint64_t>(i) * 2;
        // Targets bounded away from zero, where relative error is defined.
        auto y = random_vector(n, seed, 0.05, 2.0);
        auto yh = random_vector(n, seed + 1, -0.5, 2.5);
        double re = 0.0, abs_sum = 0.0, sq_sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double e = y[j] - yh[j];
            re += std::abs(e) / std::abs(y[j]);
            abs_sum += std::abs(e);
            sq_sum += e * e;
        }
        const double dn = static_cast<double>(n);
        const Metrics m = compute_metrics(y, yh);
        worst = std::max({worst, std::abs(m.re - re / dn), std::abs(m.mae - abs_sum / dn),
                          std::abs(m.rmse - std::sqrt(sq_sum / dn))});
        ordered = ordered && m.rmse >= m.mae;
    }
    report(4, "metric oracle equivalence", worst <= kMetricTol && ordered,
           fmt("max |lib - oracle| %.3g (tol %.0e); RMSE >= MAE on all 1000: %s", worst, kMetricTol,
               ordered ? "yes" : "no"));
}

// 5 ---------------------------------------------------------------------------

double sign(double v) { return v > 0 ? 1.0 : v < 0 ? -1.0 : 0.0; }

double direct_soft(double t, double e) { return sign(t) * std::max(std::abs(t) - e, 0.0); }
double direct_hard(double t, double e) { return std::abs(t) >= e ? t : 0.0; }
double direct_garrote(double t, double e) {
    if (t == 0.0) return 0.0;
    return sign(t) * std::max(std::abs(t) - e, 0.0) / (1.0 + e / std::abs(t));
}

void threshold_table() {
    // 40 theta x 25 epsilon = 1000 points; theta includes 0 and +-epsilon
    // exactly for every epsilon on the grid.
    std::vector<double> eps;
    for (int j = 0; j < 25; ++j) eps.push_back(j == 0 ? 0.0 : 0.002 * j * j);
    double worst = 0.0;
    std::size_t points = 0, edges = 0;
    for (double e : eps) {
        std::vector<double> thetas{0.0, e, -e, std::nextafter(e, 0.0), -std::nextafter(e, 0.0),
                                   std::nextafter(e, 10.0), -std::nextafter(e, 10.0)};
        for (int i = 0; thetas.size() < 40; ++i) thetas.push_back(-1.5 + 3.0 * i / 32.0);
        for (double t : thetas) {
            for (auto [mode, direct] : {std::pair{ThresholdMode::Soft, &direct_soft},
                                        std::pair{ThresholdMode::Hard, &direct_hard},
                                        std::pair{ThresholdMode::Garrote, &direct_garrote}})
                worst = std::max(worst, std::abs(shrink(t, e, mode) - direct(t, e)));
            ++points;
            if (t == 0.0 || std::abs(t) == e) ++edges;
        }
    }
    report(5, "threshold-rule table", worst <= kShrinkTol && points == 1000,
           fmt("max |lib - direct| %.3g (tol %.0e) over %zu (theta, eps) points x 3 modes, %zu edge points", worst,
               kShrinkTol, points, edges));
}

// 6 ---------------------------------------------------------------------------

struct Moments {
    double mean, sd, kurtosis;  // of the corruption term
};

void noise_statistics() {
    const std::size_t n = 100000;
    const double level = 0.05;
    bool pass = true;
    std::string detail;
    for (auto family : {NoiseFamily::Gaussian, NoiseFamily::Speckle, NoiseFamily::Poisson, NoiseFamily::Uniform}) {
        const auto spec = NoiseSpec::at_level(family, level, 606);
        // Speckle is multiplicative, so the base signal is 1 and the noise
        // term is the output minus 1; the additive families use 0 as well.
        const double base = family == NoiseFamily::Speckle ? 1.0 : 0.0;
        const std::vector<double> x(n, base);
        auto y = corrupt(x, spec);
        double sum = 0.0;
        for (double& v : y) sum += (v -= base);
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (double v : y) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));

        Moments want{};
        switch (family) {
            case NoiseFamily::Gaussian: want = {spec.mu, spec.sigma, 3.0}; break;
            case NoiseFamily::Speckle: want = {spec.gamma, spec.gamma, 9.0}; break;
            case NoiseFamily::Uniform:
                want = {(spec.a + spec.b) / 2.0, (spec.b - spec.a) / std::sqrt(12.0), 1.8};
                break;
            case NoiseFamily::Poisson: {
                const double scale = level / std::max(spec.lambda, 1.0);
                want = {0.0, scale * std::sqrt(spec.lambda), 3.0 + 1.0 / spec.lambda};
                break;
            }
        }
        // Standard errors of the sample mean and sample standard deviation.
        const double se_mean = want.sd / std::sqrt(static_cast<double>(n));
        const double se_sd = want.sd * std::sqrt((want.kurtosis - 1.0) / (4.0 * static_cast<double>(n)));
        const bool ok = std::abs(mean - want.mean) <= kSigmaBand * se_mean &&
                        std::abs(sd - want.sd) <= kSigmaBand * se_sd;
        pass = pass && ok;
        detail += fmt("%s mean %.5f/%.5f sd %.5f/%.5f%s; ", std::string(to_string(family)).c_str(), mean, want.mean,
                      sd, want.sd, ok ? "" : " OUT");
    }
    report(6, "noise statistics (3-sigma, n=1e5)", pass, detail);
}

// 7 ---------------------------------------------------------------------------

void minimization_layer() {
    const std::vector<std::string> ids{"a", "b", "c", "d"};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const std::vector<double> values{0.1, 0.2, 0.3, nan};
    std::size_t cases = 0, wrong = 0;
    for (std::size_t n = 1; n <= 4; ++n) {
        std::vector<std::string> names(ids.begin(), ids.begin() + static_cast<long>(n));
        std::vector<std::size_t> pick(n, 0);
        // Every assignment of the value set to n branches (ties and NaN
        // included), under every permutation of the ids.
        for (;;) {
            std::vector<std::string> perm = names;
            do {
                std::map<std::string, BranchMetrics> per;
                for (std::size_t i = 0; i < n; ++i) {
                    BranchMetrics m;
                    m.re = values[pick[i]];
                    m.mae = values[pick[(i + 1) % n]];
                    m.rmse = 1.0;
                    per[perm[i]] = m;
                }
                // Oracle: smallest RE, NaN worst, ties to the smallest id.
                std::string best;
                double best_re = nan;
                for (std::size_t i = 0; i < n; ++i) {
                    const double re = per[perm[i]].re;
                    const bool better = best.empty() || (!std::isnan(re) && (std::isnan(best_re) || re < best_re)) ||
                                        ((re == best_re || (std::isnan(re) && std::isnan(best_re))) && perm[i] < best);
                    if (better) best = perm[i], best_re = re;
                }
                ++cases;
                if (select_branch(per).selected != best) ++wrong;
            } while (std::next_permutation(perm.begin(), perm.end()));
            std::size_t pos = 0;
            while (pos < n && ++pick[pos] == values.size()) pick[pos++] = 0;
            if (pos == n) break;
        }
    }
    report(7, "minimization layer", wrong == 0, fmt("%zu / %zu exhaustive cases agree", cases - wrong, cases));
}

// 8 ---------------------------------------------------------------------------

std::vector<double> clean_series(std::uint64_t seed) {
    return normalize(synthetic_series(SyntheticModel::ExponentialRegeneration, 168, {}, seed));
}

double mse(const std::vector<double>& a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

void denoising_efficacy() {
    const std::size_t m = 16;
    const int seeds = 20;
    double in_dae = 0.0, out_dae = 0.0, in_wav = 0.0, out_wav = 0.0;
    for (int s = 0; s < seeds; ++s) {
        const auto seed = 300 + static_cast<std::uint64_t>(s) * 10;
        const auto noise = NoiseSpec::at_level(NoiseFamily::Gaussian, 0.05, seed);

        // DAE: trained on windows of three series, scored on a fourth.
        std::vector<double> rows;
        for (std::uint64_t k = 1; k <= 3; ++k) {
            auto w = make_windows(clean_series(seed + k), m, 4);
            rows.insert(rows.end(), w.inputs.begin(), w.inputs.end());
        }
        DaeTrainConfig cfg;
        cfg.hidden = 16;
        cfg.lr = 1e-2;
        cfg.epochs = 600;
        cfg.seed = seed;
        const std::size_t count = rows.size() / m;
        auto trained = train_dae(Tensor::from(count, m, std::move(rows)), noise, cfg);

        const auto held = clean_series(seed + 4);
        const auto hw = make_windows(held, m, 4);
        const auto corrupted = corrupt(hw.inputs, noise.with_seed(seed + 99));
        const auto rec = reconstruct(trained.model, Tensor::from(hw.count(), m, corrupted));
        in_dae += mse(hw.inputs, corrupted);
        out_dae += mse(hw.inputs, rec.values());

        // Hard-threshold wavelet on the whole corrupted series.
        WaveletConfig wcfg;
        wcfg.mode = ThresholdMode::Hard;
        wcfg.epsilon = 0.05;
        const auto noisy = corrupt(held, noise.with_seed(seed + 98));
        in_wav += mse(held, noisy);
        out_wav += mse(held, wavelet_denoise(noisy, wcfg));
    }
    in_dae /= seeds, out_dae /= seeds, in_wav /= seeds, out_wav /= seeds;
    report(8, "denoising efficacy (20 seeds)", out_dae < in_dae && out_wav < in_wav,
           fmt("DAE mse %.3g -> %.3g; wavelet hard eps 0.05 mse %.3g -> %.3g", in_dae, out_dae, in_wav, out_wav));
}

}  // namespace

int main() {
    wavelet_round_trip();
    gradient_correctness();
    attention_normalization();
    metric_oracle();
    threshold_table();
    noise_statistics();
    minimization_layer();
    denoising_efficacy();
    std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
