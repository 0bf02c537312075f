#include "desate/wavelet.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "desate/error.hpp"

namespace desate {

namespace {

constexpr double kHaar[] = {std::numbers::sqrt2 / 2.0, std::numbers::sqrt2 / 2.0};

// Daubechies, 4 vanishing moments (8 taps).
constexpr double kDb4[] = {
    0.2303778133088965,   0.7148465705529157,   0.6308807679298589,  -0.027983769416859854,
    -0.18703481171909309, 0.030841381835560764, 0.0328830116668852,  -0.010597401785069032,
};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

struct FilterBank {
    std::vector<double> rec_lo, rec_hi, dec_lo, dec_hi;
    std::size_t taps() const { return rec_lo.size(); }
};

const FilterBank& bank(WaveletFamily family) {
    auto build = [](std::span<const double> h) {
        FilterBank fb;
        const std::size_t f = h.size();
        fb.rec_lo.assign(h.begin(), h.end());
        fb.rec_hi.resize(f);
        fb.dec_lo.resize(f);
        fb.dec_hi.resize(f);
        for (std::size_t k = 0; k < f; ++k) fb.rec_hi[k] = (k % 2 == 0 ? 1.0 : -1.0) * h[f - 1 - k];
        for (std::size_t j = 0; j < f; ++j) {
            fb.dec_lo[j] = fb.rec_lo[f - 1 - j];
            fb.dec_hi[j] = fb.rec_hi[f - 1 - j];
        }
        return fb;
    };
    static const FilterBank haar = build(kHaar);
    static const FilterBank db4 = build(kDb4);
    return family == WaveletFamily::Haar ? haar : db4;
}

std::size_t next_length(std::size_t n, std::size_t taps, BoundaryMode mode) {
    return mode == BoundaryMode::SymmetricPad ? (n + taps - 1) / 2 : (n + 1) / 2;
}

// Half-sample symmetric reflection of an index into [0, n).
std::size_t reflect(long idx, long n) {
    while (idx < 0 || idx >= n) idx = idx < 0 ? -idx - 1 : 2 * n - 1 - idx;
    return static_cast<std::size_t>(idx);
}

void analyze(std::span<const double> x, const FilterBank& fb, BoundaryMode mode,
             std::vector<double>& approx, std::vector<double>& detail) {
    const long n = static_cast<long>(x.size());
    const long f = static_cast<long>(fb.taps());
    const std::size_t out_len = next_length(x.size(), fb.taps(), mode);
    approx.assign(out_len, 0.0);
    detail.assign(out_len, 0.0);
    if (mode == BoundaryMode::SymmetricPad) {
        for (std::size_t o = 0; o < out_len; ++o) {
            const long i = 2 * static_cast<long>(o) + 1;
            double a = 0.0, d = 0.0;
            for (long j = 0; j < f; ++j) {
                const double v = x[reflect(i - j, n)];
                a += fb.dec_lo[j] * v;
                d += fb.dec_hi[j] * v;
            }
            approx[o] = a;
            detail[o] = d;
        }
        return;
    }
    const long np = n + (n % 2);  // odd lengths repeat the last sample
    auto at = [&](long idx) {
        idx = ((idx % np) + np) % np;
        return x[static_cast<std::size_t>(std::min(idx, n - 1))];
    };
    for (std::size_t o = 0; o < out_len; ++o) {
        const long i = 2 * static_cast<long>(o) + 1;
        double a = 0.0, d = 0.0;
        for (long j = 0; j < f; ++j) {
            const double v = at(i - j);
            a += fb.dec_lo[j] * v;
            d += fb.dec_hi[j] * v;
        }
        approx[o] = a;
        detail[o] = d;
    }
}

std::vector<double> synthesize(std::span<const double> approx, std::span<const double> detail,
                               const FilterBank& fb, BoundaryMode mode, std::size_t out_len) {
    const long f = static_cast<long>(fb.taps());
    const long bands = static_cast<long>(approx.size());
    if (mode == BoundaryMode::SymmetricPad) {
        // x[n] = sum_o rec_lo[n - 2o + F - 2] a[o] + rec_hi[n - 2o + F - 2] d[o]
        std::vector<double> x(out_len, 0.0);
        for (long n = 0; n < static_cast<long>(out_len); ++n) {
            const long o_lo = std::max<long>(0, (n - 1 + 1) / 2);
            const long o_hi = std::min<long>(bands - 1, (n + f - 2) / 2);
            double s = 0.0;
            for (long o = o_lo; o <= o_hi; ++o) {
                const long k = n - 2 * o + f - 2;
                if (k < 0 || k >= f) continue;
                s += fb.rec_lo[k] * approx[o] + fb.rec_hi[k] * detail[o];
            }
            x[n] = s;
        }
        return x;
    }
    // Periodized transform is orthogonal: invert with its adjoint.
    const long np = 2 * bands;
    std::vector<double> y(static_cast<std::size_t>(np), 0.0);
    for (long o = 0; o < bands; ++o) {
        const long i = 2 * o + 1;
        for (long j = 0; j < f; ++j) {
            const long idx = (((i - j) % np) + np) % np;
            y[idx] += fb.dec_lo[j] * approx[o] + fb.dec_hi[j] * detail[o];
        }
    }
    y.resize(out_len);
    return y;
}

std::vector<std::size_t> level_lengths(std::size_t n, const WaveletConfig& cfg) {
    std::vector<std::size_t> lengths{n};
    const std::size_t taps = bank(cfg.family).taps();
    for (int l = 0; l < cfg.levels; ++l) lengths.push_back(next_length(lengths.back(), taps, cfg.boundary));
    return lengths;
}

}  // namespace

std::string_view to_string(WaveletFamily f) {
    return f == WaveletFamily::Haar ? "haar" : "db4";
}

std::string_view to_string(ThresholdMode m) {
    switch (m) {
        case ThresholdMode::Soft: return "soft";
        case ThresholdMode::Hard: return "hard";
        case ThresholdMode::Garrote: return "garrote";
    }
    return "unknown";
}

std::string_view to_string(BoundaryMode b) {
    return b == BoundaryMode::SymmetricPad ? "symmetric" : "periodic";
}

WaveletFamily parse_wavelet_family(std::string_view s) {
    const std::string v = lower(s);
    if (v == "haar") return WaveletFamily::Haar;
    if (v == "db4" || v == "daubechies4") return WaveletFamily::Daubechies4;
    throw ConfigError("unknown wavelet family '" + std::string(s) + "' (expected haar or db4)");
}

ThresholdMode parse_threshold_mode(std::string_view s) {
    const std::string v = lower(s);
    if (v == "soft") return ThresholdMode::Soft;
    if (v == "hard") return ThresholdMode::Hard;
    if (v == "garrote" || v == "garotte") return ThresholdMode::Garrote;
    throw ConfigError("unknown threshold mode '" + std::string(s) +
                      "' (expected soft, hard or garrote)");
}

BoundaryMode parse_boundary_mode(std::string_view s) {
    const std::string v = lower(s);
    if (v == "symmetric") return BoundaryMode::SymmetricPad;
    if (v == "periodic") return BoundaryMode::PeriodicPad;
    throw ConfigError("unknown boundary mode '" + std::string(s) +
                      "' (expected symmetric or periodic)");
}

std::span<const double> scaling_filter(WaveletFamily family) { return bank(family).rec_lo; }

int max_levels(std::size_t length, WaveletFamily family) {
    const std::size_t taps = bank(family).taps();
    if (length < taps) return 0;
    return static_cast<int>(std::floor(std::log2(static_cast<double>(length) /
                                                 static_cast<double>(taps - 1))));
}

CoefficientPyramid dwt(std::span<const double> signal, const WaveletConfig& cfg) {
    const std::size_t taps = bank(cfg.family).taps();
    if (signal.size() < taps)
        throw ConfigError("dwt: signal of length " + std::to_string(signal.size()) +
                          " is shorter than the " + std::string(to_string(cfg.family)) +
                          " filter (" + std::to_string(taps) + " taps)");
    const int admissible = max_levels(signal.size(), cfg.family);
    if (cfg.levels < 1 || cfg.levels > admissible)
        throw ConfigError("dwt: " + std::to_string(cfg.levels) + " levels requested but a length-" +
                          std::to_string(signal.size()) + " signal admits 1.." +
                          std::to_string(admissible) + " for " + std::string(to_string(cfg.family)));
    for (double v : signal)
        if (!std::isfinite(v)) throw ContractError("dwt: signal contains non-finite values");

    const FilterBank& fb = bank(cfg.family);
    CoefficientPyramid pyr;
    std::vector<double> current(signal.begin(), signal.end());
    std::vector<double> approx, detail;
    for (int l = 0; l < cfg.levels; ++l) {
        analyze(current, fb, cfg.boundary, approx, detail);
        pyr.details.push_back(detail);
        current.swap(approx);
    }
    std::reverse(pyr.details.begin(), pyr.details.end());
    pyr.approx = std::move(current);
    return pyr;
}

double shrink(double theta, double epsilon, ThresholdMode mode) {
    const double mag = std::abs(theta);
    switch (mode) {
        case ThresholdMode::Soft: return std::copysign(std::max(mag - epsilon, 0.0), theta);
        case ThresholdMode::Hard: return mag >= epsilon ? theta : 0.0;
        case ThresholdMode::Garrote:
            if (theta == 0.0) return 0.0;
            return std::copysign(std::max(mag - epsilon, 0.0), theta) / (1.0 + epsilon / mag);
    }
    return theta;
}

CoefficientPyramid threshold(const CoefficientPyramid& pyr, const WaveletConfig& cfg) {
    CoefficientPyramid out = pyr;
    for (auto& band : out.details)
        for (double& c : band) c = shrink(c, cfg.epsilon, cfg.mode);
    return out;
}

std::vector<double> idwt(const CoefficientPyramid& pyr, const WaveletConfig& cfg,
                         std::size_t original_length) {
    if (static_cast<int>(pyr.details.size()) != cfg.levels)
        throw ContractError("idwt: pyramid has " + std::to_string(pyr.details.size()) +
                            " detail bands, config expects " + std::to_string(cfg.levels));
    const auto lengths = level_lengths(original_length, cfg);
    const std::size_t levels = pyr.details.size();
    if (pyr.approx.size() != lengths[levels])
        throw ContractError("idwt: approximation band has " + std::to_string(pyr.approx.size()) +
                            " coefficients, expected " + std::to_string(lengths[levels]));
    for (std::size_t k = 0; k < levels; ++k)
        if (pyr.details[k].size() != lengths[levels - k])
            throw ContractError("idwt: detail band " + std::to_string(k) + " has " +
                                std::to_string(pyr.details[k].size()) + " coefficients, expected " +
                                std::to_string(lengths[levels - k]));

    const FilterBank& fb = bank(cfg.family);
    std::vector<double> current = pyr.approx;
    for (std::size_t k = 0; k < levels; ++k)
        current = synthesize(current, pyr.details[k], fb, cfg.boundary, lengths[levels - k - 1]);
    return current;
}

std::vector<double> wavelet_denoise(std::span<const double> signal, const WaveletConfig& cfg) {
    return idwt(threshold(dwt(signal, cfg), cfg), cfg, signal.size());
}

}  // namespace desate
