#pragma once

#include <vector>

#include "desate/tensor.hpp"

namespace desate {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias-corrected first/second moments. Owns one moment buffer pair
// per parameter; parameters are updated in place through their handles.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig cfg);

    // Applies one update from the currently accumulated gradients.
    void step();
    void zero_grad();

    long steps() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return cfg_; }

private:
    std::vector<Tensor> params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
};

}  // namespace desate
