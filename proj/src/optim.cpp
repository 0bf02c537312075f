#include "desate/optim.hpp"

#include <cmath>

#include "desate/error.hpp"

namespace desate {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    if (!(cfg_.lr > 0.0)) throw ConfigError("Adam learning rate must be positive");
    if (cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 || cfg_.beta2 < 0.0 || cfg_.beta2 >= 1.0)
        throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(cfg_.eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
    for (const Tensor& p : params_) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
        Tensor& param = params_[p];
        if (!param.has_grad()) continue;
        auto w = param.mutable_values();
        auto g = param.grad();
        auto& m = m_[p];
        auto& v = v_[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
}

}  // namespace desate
