#pragma once
// One-dimensional multi-level discrete wavelet transform with detail-band
// shrinkage.
//
// Two boundary treatments are offered:
//  * SymmetricPad: half-sample symmetric extension, floor((N+F-1)/2)
//    coefficients per band. Redundant near the edges, exact reconstruction at
//    any length, no wrap-around jump on monotone trends.
//  * PeriodicPad: circular (periodized) transform, ceil(N/2) coefficients per
//    band. Orthogonal, so energy is preserved whenever no level needs the
//    odd-length extension (last sample repeated).

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace desate {

enum class WaveletFamily { Haar, Daubechies4 };
enum class ThresholdMode { Soft, Hard, Garrote };
enum class BoundaryMode { SymmetricPad, PeriodicPad };

std::string_view to_string(WaveletFamily f);
std::string_view to_string(ThresholdMode m);
std::string_view to_string(BoundaryMode b);
WaveletFamily parse_wavelet_family(std::string_view s);
ThresholdMode parse_threshold_mode(std::string_view s);
BoundaryMode parse_boundary_mode(std::string_view s);

struct WaveletConfig {
    WaveletFamily family = WaveletFamily::Daubechies4;
    int levels = 2;
    ThresholdMode mode = ThresholdMode::Hard;
    double epsilon = 0.01;
    BoundaryMode boundary = BoundaryMode::SymmetricPad;
};

// Reconstruction (scaling) filter of the family; sums to sqrt(2), unit norm.
std::span<const double> scaling_filter(WaveletFamily family);

// Deepest admissible decomposition for a signal of this length:
// floor(log2(length / (filter_length - 1))), 0 when the signal is shorter
// than the filter.
int max_levels(std::size_t length, WaveletFamily family);

struct CoefficientPyramid {
    std::vector<double> approx;                // final-level approximation
    std::vector<std::vector<double>> details;  // coarsest first
};

// Throws ConfigError when cfg.levels is outside [1, max_levels(signal.size())].
CoefficientPyramid dwt(std::span<const double> signal, const WaveletConfig& cfg);

// Shrinks detail bands with cfg.mode at threshold cfg.epsilon; the
// approximation band is copied unchanged.
CoefficientPyramid threshold(const CoefficientPyramid& pyr, const WaveletConfig& cfg);

// Single-coefficient shrinkage rules.
double shrink(double theta, double epsilon, ThresholdMode mode);

// Throws ContractError when band sizes do not match cfg and original_length.
std::vector<double> idwt(const CoefficientPyramid& pyr, const WaveletConfig& cfg,
                         std::size_t original_length);

std::vector<double> wavelet_denoise(std::span<const double> signal, const WaveletConfig& cfg);

}  // namespace desate
