#pragma once
// Seeded corruption of normalized capacity sequences.
//
// Four families are supported. The intensity `level` maps onto distribution
// parameters through NoiseSpec::at_level:
//   Gaussian  x + n,               n ~ N(mu, sigma^2), sigma = level, mu = 0
//   Speckle   x * (1 + s),         s ~ Exp(scale gamma),  gamma = level
//   Poisson   x + level*(p - lambda)/max(lambda, 1),  p ~ Poisson(lambda)
//   Uniform   x + u,               u ~ U(a, b),  a = -level, b = +level
// corrupt() consults only the active family's explicit fields, so a spec can
// also be written by hand.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace desate {

enum class NoiseFamily { Gaussian, Speckle, Poisson, Uniform };

std::string_view to_string(NoiseFamily f);
NoiseFamily parse_noise_family(std::string_view name);

inline constexpr double kNoiseLevels[] = {0.001, 0.01, 0.05};

struct NoiseSpec {
    NoiseFamily family = NoiseFamily::Gaussian;
    double mu = 0.0;
    double sigma = 0.0;
    double gamma = 1.0;
    double lambda = 1.0;
    double a = 0.0;
    double b = 0.0;
    double level = 0.0;
    std::uint64_t seed = 0;

    // Parameters derived from `level` as documented above. lambda is the
    // Poisson mean and is not tied to the level.
    static NoiseSpec at_level(NoiseFamily family, double level, std::uint64_t seed,
                              double lambda = 1.0);

    // Throws ConfigError when the active family's parameters are invalid. With
    // `standard_levels_only`, level must be one of kNoiseLevels.
    void validate(bool standard_levels_only = false) const;

    NoiseSpec with_seed(std::uint64_t s) const {
        NoiseSpec copy = *this;
        copy.seed = s;
        return copy;
    }
};

// Pure function of (x, spec); the spec's seed fixes the draw.
std::vector<double> corrupt(std::span<const double> x, const NoiseSpec& spec);

// Density (Gaussian, Speckle, Uniform) or mass (Poisson) of the family's
// underlying distribution. Speckle uses the normalized exponential density
// exp(-x/gamma)/gamma on x >= 0. Poisson requires a nonnegative integer x.
double pdf(const NoiseSpec& spec, double x);

}  // namespace desate
