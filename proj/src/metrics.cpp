#include <cmath>
#include <iostream>
#include <limits>

#include "desate/error.hpp"
#include "desate/pipeline.hpp"

namespace desate {

namespace {

void check_pair(std::span<const double> a, std::span<const double> p, const char* who) {
    if (a.empty()) throw ContractError(std::string(who) + ": empty input");
    if (a.size() != p.size())
        throw DimensionError(std::string(who) + ": " + std::to_string(a.size()) + " actual vs " +
                             std::to_string(p.size()) + " predicted values");
}

}  // namespace

double relative_error(double actual, double predicted) {
    if (actual == 0.0) throw ContractError("relative_error: actual value is zero");
    return std::abs(actual - predicted) / std::abs(actual);
}

double mean_relative_error(std::span<const double> actual, std::span<const double> predicted) {
    check_pair(actual, predicted, "mean_relative_error");
    double s = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) s += relative_error(actual[i], predicted[i]);
    return s / static_cast<double>(actual.size());
}

double mae(std::span<const double> actual, std::span<const double> predicted) {
    check_pair(actual, predicted, "mae");
    double s = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) s += std::abs(predicted[i] - actual[i]);
    return s / static_cast<double>(actual.size());
}

double rmse(std::span<const double> actual, std::span<const double> predicted) {
    check_pair(actual, predicted, "rmse");
    double s = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) s += (predicted[i] - actual[i]) * (predicted[i] - actual[i]);
    return std::sqrt(s / static_cast<double>(actual.size()));
}

Metrics compute_metrics(std::span<const double> actual, std::span<const double> predicted) {
    Metrics m{mean_relative_error(actual, predicted), mae(actual, predicted), rmse(actual, predicted)};
    // Power-mean inequality, up to rounding in the two summations.
    if (m.rmse < m.mae * (1.0 - 1e-12))
        throw ContractError("compute_metrics: RMSE " + std::to_string(m.rmse) + " below MAE " + std::to_string(m.mae));
    return m;
}

std::size_t first_crossing(std::span<const double> trajectory, double threshold) {
    for (std::size_t i = 0; i < trajectory.size(); ++i)
        if (trajectory[i] < threshold) return i;
    return trajectory.size();
}

RulEstimate estimate_rul(std::span<const double> predicted, std::span<const double> actual, double threshold,
                         std::size_t forecast_start) {
    if (predicted.empty() || actual.empty()) throw ContractError("estimate_rul: empty trajectory");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("estimate_rul: threshold must lie in (0, 1)");
    RulEstimate r;
    r.eol_threshold = threshold;
    r.forecast_start = forecast_start;
    r.predicted_eol_cycle = first_crossing(predicted, threshold);
    r.actual_eol_cycle = first_crossing(actual, threshold);
    r.predicted_censored = r.predicted_eol_cycle == predicted.size();
    r.actual_censored = r.actual_eol_cycle == actual.size();
    r.rul_error_cycles = r.predicted_eol_cycle > r.actual_eol_cycle ? r.predicted_eol_cycle - r.actual_eol_cycle
                                                                    : r.actual_eol_cycle - r.predicted_eol_cycle;
    const double y = static_cast<double>(r.actual_eol_cycle) - static_cast<double>(forecast_start);
    r.re = static_cast<double>(r.rul_error_cycles) / std::max(std::abs(y), 1.0);
    return r;
}

std::vector<double> normalize(const CapacitySeries& series) {
    const double c0 = series.rated_capacity_ah;
    if (!(c0 > 0.0) || !std::isfinite(c0)) throw DataError("normalize: rated capacity must be positive");
    std::vector<double> out(series.capacity_ah.size());
    std::size_t high = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = series.capacity_ah[i];
        if (!(x > 0.0) || !std::isfinite(x))
            throw DataError("normalize: nonpositive capacity at index " + std::to_string(i) +
                            (i < series.cycles.size() ? " (cycle " + std::to_string(series.cycles[i]) + ")" : ""));
        out[i] = x / c0;
        if (out[i] > 1.05) ++high;
    }
    if (high > 0)
        std::clog << "warning: " << series.battery_id << ": " << high
                  << " normalized capacities exceed 1.05; check the rated capacity\n";
    return out;
}

Tensor WindowSet::input_tensor() const { return Tensor::from(count(), m, inputs); }
Tensor WindowSet::target_tensor() const { return Tensor::from(count(), 1, targets); }

WindowSet make_windows(std::span<const double> x, std::size_t m, std::size_t stride) {
    if (m == 0 || stride == 0) throw ConfigError("make_windows: window length and stride must be positive");
    if (x.size() < m + 1)
        throw DataError("make_windows: sequence of length " + std::to_string(x.size()) +
                        " is shorter than window + 1 = " + std::to_string(m + 1));
    WindowSet w;
    w.m = m;
    const std::size_t count = (x.size() - m - 1) / stride + 1;
    w.inputs.reserve(count * m);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t start = k * stride;
        w.inputs.insert(w.inputs.end(), x.begin() + start, x.begin() + start + m);
        w.targets.push_back(x[start + m]);
        w.target_index.push_back(start + m);
    }
    return w;
}

namespace {

bool better(double a, double b) {
    // NaN loses to everything; equal values keep the earlier (lexicographic) id.
    if (std::isnan(a)) return false;
    if (std::isnan(b)) return true;
    return a < b;
}

}  // namespace

MetricsReport select_branch(std::map<std::string, BranchMetrics> per_branch) {
    if (per_branch.empty()) throw ContractError("select_branch: no branches");
    MetricsReport r;
    r.per_branch = std::move(per_branch);
    auto argmin = [&](double BranchMetrics::*field) {
        auto best = r.per_branch.begin();
        for (auto it = std::next(best); it != r.per_branch.end(); ++it)
            if (better(it->second.*field, best->second.*field)) best = it;
        return best->first;
    };
    r.argmin_branch["re"] = argmin(&BranchMetrics::re);
    r.argmin_branch["mae"] = argmin(&BranchMetrics::mae);
    r.argmin_branch["rmse"] = argmin(&BranchMetrics::rmse);
    r.selected = r.argmin_branch["re"];
    return r;
}

}  // namespace desate
