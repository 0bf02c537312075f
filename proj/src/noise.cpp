#include "desate/noise.hpp"

#include <algorithm>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <cmath>
#include <numbers>

#include "desate/error.hpp"
#include "desate/rng.hpp"

namespace desate {

std::string_view to_string(NoiseFamily f) {
    switch (f) {
        case NoiseFamily::Gaussian: return "gaussian";
        case NoiseFamily::Speckle: return "speckle";
        case NoiseFamily::Poisson: return "poisson";
        case NoiseFamily::Uniform: return "uniform";
    }
    return "unknown";
}

NoiseFamily parse_noise_family(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "gaussian") return NoiseFamily::Gaussian;
    if (lower == "speckle") return NoiseFamily::Speckle;
    if (lower == "poisson") return NoiseFamily::Poisson;
    if (lower == "uniform") return NoiseFamily::Uniform;
    throw ConfigError("unknown noise family '" + std::string(name) +
                      "' (expected gaussian, speckle, poisson or uniform)");
}

NoiseSpec NoiseSpec::at_level(NoiseFamily family, double level, std::uint64_t seed, double lambda) {
    NoiseSpec s;
    s.family = family;
    s.level = level;
    s.seed = seed;
    s.mu = 0.0;
    s.sigma = level;
    s.gamma = level;
    s.lambda = lambda;
    s.a = -level;
    s.b = level;
    return s;
}

void NoiseSpec::validate(bool standard_levels_only) const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(level) || level < 0.0) throw ConfigError("noise level must be finite and >= 0");
    if (standard_levels_only &&
        std::none_of(std::begin(kNoiseLevels), std::end(kNoiseLevels),
                     [&](double l) { return l == level; }))
        throw ConfigError("noise level " + std::to_string(level) +
                          " is not one of 0.001, 0.01, 0.05");
    switch (family) {
        case NoiseFamily::Gaussian:
            if (!finite(mu) || !finite(sigma) || sigma < 0.0)
                throw ConfigError("gaussian noise requires finite mu and sigma >= 0");
            break;
        case NoiseFamily::Speckle:
            if (!finite(gamma) || gamma <= 0.0)
                throw ConfigError("speckle noise requires gamma > 0");
            break;
        case NoiseFamily::Poisson:
            if (!finite(lambda) || lambda < 0.0)
                throw ConfigError("poisson noise requires lambda >= 0");
            break;
        case NoiseFamily::Uniform:
            if (!finite(a) || !finite(b) || a > b)
                throw ConfigError("uniform noise requires finite bounds with a <= b");
            break;
    }
}

std::vector<double> corrupt(std::span<const double> x, const NoiseSpec& spec) {
    if (x.empty()) throw ContractError("corrupt: input sequence is empty");
    for (double v : x)
        if (!std::isfinite(v)) throw ContractError("corrupt: input contains non-finite values");
    spec.validate();

    Rng rng(spec.seed);
    std::vector<double> out(x.begin(), x.end());
    switch (spec.family) {
        case NoiseFamily::Gaussian: {
            boost::random::normal_distribution<double> dist(spec.mu, spec.sigma);
            for (double& v : out) v += dist(rng);
            break;
        }
        case NoiseFamily::Speckle: {
            boost::random::exponential_distribution<double> dist(1.0 / spec.gamma);
            for (double& v : out) v *= 1.0 + dist(rng);
            break;
        }
        case NoiseFamily::Poisson: {
            const double norm = std::max(spec.lambda, 1.0);
            if (spec.lambda == 0.0) break;  // every draw is 0 == lambda
            boost::random::poisson_distribution<long, double> dist(spec.lambda);
            for (double& v : out)
                v += spec.level * (static_cast<double>(dist(rng)) - spec.lambda) / norm;
            break;
        }
        case NoiseFamily::Uniform: {
            if (spec.a == spec.b) {
                for (double& v : out) v += spec.a;
                break;
            }
            boost::random::uniform_real_distribution<double> dist(spec.a, spec.b);
            for (double& v : out) v += dist(rng);
            break;
        }
    }
    return out;
}

double pdf(const NoiseSpec& spec, double x) {
    spec.validate();
    switch (spec.family) {
        case NoiseFamily::Gaussian: {
            if (spec.sigma == 0.0) throw ContractError("pdf: gaussian with sigma = 0 has no density");
            const double z = (x - spec.mu) / spec.sigma;
            return std::exp(-0.5 * z * z) / (spec.sigma * std::sqrt(2.0 * std::numbers::pi));
        }
        case NoiseFamily::Speckle:
            return x < 0.0 ? 0.0 : std::exp(-x / spec.gamma) / spec.gamma;
        case NoiseFamily::Poisson: {
            if (x < 0.0 || std::floor(x) != x)
                throw ContractError("pdf: poisson mass requires a nonnegative integer, got " +
                                    std::to_string(x));
            if (spec.lambda == 0.0) return x == 0.0 ? 1.0 : 0.0;
            return std::exp(-spec.lambda + x * std::log(spec.lambda) - std::lgamma(x + 1.0));
        }
        case NoiseFamily::Uniform:
            if (spec.a == spec.b) throw ContractError("pdf: uniform with a == b has no density");
            return (x >= spec.a && x <= spec.b) ? 1.0 / (spec.b - spec.a) : 0.0;
    }
    return 0.0;
}

}  // namespace desate
